"""Concept-layer construction and cross-layer mapping via a completion client.

Client responses are line-oriented tuples: parenthesized, pipe-delimited,
one per line.  The parser is tolerant of missing parentheses and stray
bullets; lines it cannot use are kept with a reason instead of silently
dropped.
"""

from __future__ import annotations

import logging
import os
import re
from dataclasses import dataclass, field

from .errors import EmptyConceptLayer, ParseFailure
from .odkg import (
    ConceptEntity,
    ConceptTriple,
    CrossLayerLink,
    InstanceEntity,
    OdKg,
    CONCEPT_RELATIONS,
    concept_id_for_label,
    normalize_label,
)
from .prompts import TemplateSet

logger = logging.getLogger(__name__)

CROSS_LAYER_BATCH = 9  # upper bound on options per mapping prompt

_SOURCE_KINDS = ("benchmark-doc", "paper", "manual", "other")


@dataclass(frozen=True)
class CorpusDocument:
    id: str
    title: str
    body: str
    source_kind: str = "other"

    def __post_init__(self) -> None:
        if not self.body:
            raise ValueError(f"corpus document {self.id} has an empty body")
        if self.source_kind not in _SOURCE_KINDS:
            raise ValueError(f"bad source kind {self.source_kind!r}")


def load_corpus(directory: str) -> list[CorpusDocument]:
    """Documents from a directory of .txt/.md files, ordered by id.

    A first-level subdirectory named after a source kind classifies its
    files; anything else is "other".
    """
    docs = []
    for dirpath, _dirnames, filenames in sorted(os.walk(directory)):
        rel = os.path.relpath(dirpath, directory)
        kind = rel.split(os.sep)[0]
        if kind not in _SOURCE_KINDS:
            kind = "other"
        for filename in sorted(filenames):
            if not filename.endswith((".txt", ".md")):
                continue
            path = os.path.join(dirpath, filename)
            with open(path, "r", encoding="utf-8", errors="replace") as fh:
                body = fh.read()
            if not body.strip():
                continue
            title = next((l.strip() for l in body.splitlines() if l.strip()), filename)
            doc_id = os.path.splitext(filename)[0]
            docs.append(CorpusDocument(doc_id, title, body, kind))
    return sorted(docs, key=lambda d: d.id)


# --- response line parsing ----------------------------------------------------

_BULLET_RE = re.compile(r"^\s*(?:[-*•]|\d+[.)])\s*")


def parse_tuple_line(line: str) -> list[str] | None:
    """Fields of one tuple line, or None for blank/unusable lines."""
    text = _BULLET_RE.sub("", line.strip())
    if not text:
        return None
    if text.startswith("(") and text.endswith(")"):
        text = text[1:-1]
    fields = [f.strip() for f in text.split("|")]
    if any(not f for f in fields):
        return None
    if not all(re.search(r"[A-Za-z0-9]", f) for f in fields):
        return None  # decoration like "~~~" is not a label
    return fields


@dataclass
class ExtractionResult:
    concepts: list[ConceptEntity] = field(default_factory=list)
    triples: list[ConceptTriple] = field(default_factory=list)
    rejected_lines: list[tuple[str, str]] = field(default_factory=list)


def extract_concepts(docs: list[CorpusDocument], client, kg: OdKg,
                     templates: TemplateSet | None = None) -> ExtractionResult:
    """Run concept/relation extraction over the corpus and merge into kg.

    Raises ParseFailure (with kg untouched) if any response yields zero
    usable lines; individually bad lines land in rejected_lines.
    """
    if not docs:
        raise ValueError("extract_concepts needs at least one document")
    templates = templates or TemplateSet()
    result = ExtractionResult()
    seen: dict[str, ConceptEntity] = {}

    def register(label: str, provenance: str) -> str:
        cid = concept_id_for_label(label)
        if cid not in seen and cid not in kg.concept_entities:
            seen[cid] = ConceptEntity(cid, " ".join(label.split()), provenance)
            result.concepts.append(seen[cid])
        return cid

    pending_triples: list[ConceptTriple] = []
    for doc in docs:
        prompt = templates.render("concept_extract", KNOWLEDGE=doc.body)
        response = client.complete(prompt)
        accepted = 0
        for line in response.text.splitlines():
            fields = parse_tuple_line(line)
            if fields is None:
                continue
            if len(fields) == 1:
                register(fields[0], doc.id)
                accepted += 1
            elif len(fields) == 3:
                head, relation, tail = fields
                if relation not in CONCEPT_RELATIONS:
                    result.rejected_lines.append((line.strip(),
                                                  f"unknown relation {relation!r}"))
                    continue
                if normalize_label(head) == normalize_label(tail):
                    result.rejected_lines.append((line.strip(), "self-loop"))
                    continue
                head_id = register(head, doc.id)
                tail_id = register(tail, doc.id)
                pending_triples.append(ConceptTriple(head_id, relation, tail_id))
                accepted += 1
            else:
                result.rejected_lines.append((line.strip(),
                                              f"expected 1 or 3 fields, got {len(fields)}"))
        if accepted == 0:
            raise ParseFailure(
                f"no parseable lines in extraction response for document {doc.id}")

    # Merge only after every response parsed, so a late ParseFailure leaves
    # the graph untouched.
    kg.upsert_entities(result.concepts)
    deduped = []
    for triple in pending_triples:
        if triple not in kg.concept_triples and triple not in deduped:
            deduped.append(triple)
    kg.upsert_triples(deduped)
    result.triples = deduped
    return result


@dataclass
class MappingResult:
    links: set[CrossLayerLink] = field(default_factory=set)
    unresolved: list[tuple[str, str, str]] = field(default_factory=list)  # (symbol, label, reason)


def map_cross_layer(instance_entities: list[InstanceEntity], kg: OdKg, client,
                    templates: TemplateSet | None = None) -> MappingResult:
    """Link options to concepts, batching at most nine options per prompt.

    Labels that do not resolve to an existing concept are recorded, never
    stubbed.  Links are merged into kg and returned.
    """
    if not kg.concept_entities:
        raise EmptyConceptLayer("cross-layer mapping needs a non-empty concept layer")
    templates = templates or TemplateSet()
    labels = sorted(e.label for e in kg.concept_entities.values())
    label_block = "\n".join(labels)
    entities = sorted(instance_entities, key=lambda e: e.symbol)
    result = MappingResult()

    for start in range(0, len(entities), CROSS_LAYER_BATCH):
        batch = entities[start:start + CROSS_LAYER_BATCH]
        configs = "\n".join(e.description for e in batch)
        prompt = templates.render("cross_layer", KNOWLEDGE=label_block,
                                  CONFIGS=configs)
        response = client.complete(prompt)
        batch_symbols = {e.symbol for e in batch}
        for line in response.text.splitlines():
            fields = parse_tuple_line(line)
            if fields is None:
                continue
            if len(fields) == 3 and fields[1] == "related_to":
                symbol, label = fields[0], fields[2]
            elif len(fields) == 2:
                symbol, label = fields
            else:
                result.unresolved.append(("?", line.strip(), "malformed tuple"))
                continue
            symbol = symbol.removeprefix("CONFIG_")
            if symbol not in batch_symbols:
                result.unresolved.append((symbol, label, "symbol not in batch"))
                continue
            cid = kg.concept_id_by_label(label)
            if cid is None:
                result.unresolved.append((symbol, label, "label not in concept layer"))
                continue
            result.links.add(CrossLayerLink(symbol, cid))

    kg.upsert_triples(sorted(result.links, key=lambda l: l.as_tuple()))
    return result


# --- knowledge retrieval (keyword overlap) ------------------------------------

_WORD_RE = re.compile(r"[a-z0-9]+")

_STOPWORDS = frozenset(
    "a an and are as at be by for from has have i in is it its my of on or "
    "that the this to want with".split()
)


def _tokens(text: str) -> set[str]:
    return {w for w in _WORD_RE.findall(text.lower()) if w not in _STOPWORDS}


class KnowledgeRetriever:
    """Keyword-overlap ranker over corpus documents and option descriptions.

    Stands in for a full retrieval system: scores are plain token-set
    overlaps, top-k with deterministic (score, id) ordering.
    """

    TOP_K = 5
    SNIPPET_CHARS = 400

    def __init__(self, docs: list[CorpusDocument] | None = None,
                 kg: OdKg | None = None):
        self._entries: list[tuple[str, str, set[str]]] = []
        for doc in docs or []:
            snippet = " ".join(doc.body.split())[: self.SNIPPET_CHARS]
            self._entries.append((f"doc:{doc.id}", snippet, _tokens(doc.body)))
        if kg is not None:
            for symbol in sorted(kg.instance_entities):
                entity = kg.instance_entities[symbol]
                if entity.description:
                    self._entries.append((f"option:{symbol}", entity.description,
                                          _tokens(entity.description)))
        self._entries.sort(key=lambda e: e[0])

    def query(self, text: str, k: int | None = None) -> list[str]:
        """Top-k snippet strings for the query, best first."""
        k = self.TOP_K if k is None else k
        query_tokens = _tokens(text)
        scored = []
        for entry_id, snippet, tokens in self._entries:
            score = len(query_tokens & tokens)
            if score > 0:
                scored.append((-score, entry_id, snippet))
        scored.sort()
        return [snippet for _, _, snippet in scored[:k]]

    def knowledge_block(self, text: str, k: int | None = None) -> str:
        snippets = self.query(text, k)
        return "\n".join(f"- {s}" for s in snippets) if snippets else "(none)"
