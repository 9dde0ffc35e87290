"""Graph-guided reasoning from a tuning objective to candidate options.

The search walks the unified graph (both layers plus cross links, edges
usable in either direction), scoring a path as the product of per-step
relation strengths and node importances.  Because every factor lies in
(0, 1], a partial product below the threshold can never recover, which
makes threshold pruning exact.
"""

from __future__ import annotations

import heapq
import logging
import math
import re
from dataclasses import dataclass, field

from .errors import EmptyConceptLayer, EmptyObjective, NoAlignment, UnknownRelation
from .knowledge import parse_tuple_line
from .odkg import OdKg, normalize_label
from .prompts import TemplateSet

logger = logging.getLogger(__name__)

DEFAULT_RELATION_STRENGTH = {
    "select": 0.95,
    "depends_on": 0.90,
    "inclusion": 0.90,
    "related_to": 0.85,
    "dependency": 0.85,
    "has_child": 0.80,
    "influence": 0.75,
    "imply": 0.70,
}

_WORD_RE = re.compile(r"[a-z0-9]+")


@dataclass
class TuningObjective:
    text: str
    extracted_entities: list[str] = field(default_factory=list)

    def __post_init__(self) -> None:
        if not self.text.strip():
            raise EmptyObjective("tuning objective text is empty")


@dataclass
class ScoringParams:
    relation_strength: dict[str, float] = field(
        default_factory=lambda: dict(DEFAULT_RELATION_STRENGTH))
    node_importance_mode: str = "uniform"
    threshold: float = 0.30
    max_hops: int = 4

    def __post_init__(self) -> None:
        for relation, strength in self.relation_strength.items():
            if not 0.0 < strength <= 1.0:
                raise ValueError(f"strength for {relation} outside (0, 1]: {strength}")
        if self.node_importance_mode not in ("uniform", "degree-normalized"):
            raise ValueError(f"bad importance mode {self.node_importance_mode!r}")
        if not 0.0 < self.threshold <= 1.0:
            raise ValueError(f"threshold outside (0, 1]: {self.threshold}")
        if self.max_hops < 1:
            raise ValueError("max_hops must be at least 1")

    def strength(self, relation: str) -> float:
        try:
            return self.relation_strength[relation]
        except KeyError:
            raise UnknownRelation(relation) from None

    def importance(self, node: str, kg: OdKg,
                   degree_cache: dict[str, int] | None = None) -> float:
        if self.node_importance_mode == "uniform":
            return 1.0
        if degree_cache is not None and node in degree_cache:
            degree = degree_cache[node]
        else:
            degree = kg.degree(node)
            if degree_cache is not None:
                degree_cache[node] = degree
        return min(1.0, 1.0 / (1.0 + math.log(1.0 + degree)))


@dataclass(frozen=True)
class ReasoningPath:
    start: str
    steps: tuple[tuple[str, str], ...]
    score: float

    def nodes(self) -> tuple[str, ...]:
        return (self.start,) + tuple(node for _, node in self.steps)

    def end(self) -> str:
        return self.steps[-1][1] if self.steps else self.start

    def render(self) -> str:
        out = [self.start]
        for relation, node in self.steps:
            out.append(f"-[{relation}]->")
            out.append(node)
        return " ".join(out)


@dataclass
class CandidateSet:
    options: set[str] = field(default_factory=set)
    witness: dict[str, ReasoningPath] = field(default_factory=dict)

    def ordered(self) -> list[str]:
        """Symbols by descending witness score, ties lexicographic."""
        return sorted(self.options, key=lambda s: (-self.witness[s].score, s))

    def export_text(self) -> str:
        lines = []
        for symbol in sorted(self.options):
            path = self.witness[symbol]
            lines.append(f"{symbol}\t{path.score:.12g}\t{path.render()}")
        return "\n".join(lines) + ("\n" if lines else "")


# --- operations -----------------------------------------------------------------

def parse_objective(q: str, client, templates: TemplateSet | None = None) -> TuningObjective:
    """Extract entity mentions from the objective text via the client.

    Entities deduplicate case-insensitively; the first-seen casing wins.
    """
    if not q.strip():
        raise EmptyObjective("tuning objective text is empty")
    templates = templates or TemplateSet()
    response = client.complete(templates.render("objective_parse", TARGET=q))
    entities: list[str] = []
    seen: set[str] = set()
    for line in response.text.splitlines():
        fields = parse_tuple_line(line)
        if fields is None or len(fields) != 1:
            continue
        entity = fields[0]
        key = normalize_label(entity)
        if key not in seen:
            seen.add(key)
            entities.append(entity)
    return TuningObjective(text=q, extracted_entities=entities)


def _token_set(text: str) -> frozenset[str]:
    return frozenset(_WORD_RE.findall(text.lower()))


def match_concept_label(entity: str, kg: OdKg) -> str | None:
    """Pattern matching: case-insensitive exact, then token-set equality."""
    exact = kg.concept_id_by_label(entity)
    if exact is not None:
        return exact
    wanted = _token_set(entity)
    candidates = sorted(
        (e.label, cid) for cid, e in kg.concept_entities.items()
        if _token_set(e.label) == wanted
    )
    return candidates[0][1] if candidates else None


def align_concepts(obj: TuningObjective, kg: OdKg, client,
                   templates: TemplateSet | None = None) -> set[str]:
    """Map extracted entities to concept ids; pattern matching first, the
    client only for entities with no direct match."""
    if not kg.concept_entities:
        raise EmptyConceptLayer("alignment needs a non-empty concept layer")
    templates = templates or TemplateSet()
    labels = sorted(e.label for e in kg.concept_entities.values())
    aligned: set[str] = set()
    misses: list[str] = []
    for entity in obj.extracted_entities:
        cid = match_concept_label(entity, kg)
        if cid is None:
            response = client.complete(templates.render(
                "concept_align", TARGET=entity, KNOWLEDGE="\n".join(labels)))
            for line in response.text.splitlines():
                fields = parse_tuple_line(line)
                if fields and len(fields) == 1:
                    cid = match_concept_label(fields[0], kg)
                    break
        if cid is None:
            misses.append(entity)
            logger.warning("no concept aligned for entity %r", entity)
        else:
            aligned.add(cid)
    if not aligned:
        raise NoAlignment(f"no entity aligned to any concept: {misses or obj.text!r}")
    return aligned


def score_path(path: ReasoningPath, params: ScoringParams, kg: OdKg) -> float:
    """Product of relation-strength and node-importance factors over the
    path's steps; 1.0 for the empty path."""
    nodes = path.nodes()
    if len(set(nodes)) != len(nodes):
        raise ValueError("path must be simple")
    cache: dict[str, int] = {}
    score = 1.0
    for relation, node in path.steps:
        score *= params.strength(relation) * params.importance(node, kg, cache)
    return score


def _witness_key(path: ReasoningPath) -> tuple:
    return (-path.score, len(path.steps), path.steps, path.start)


def extract_candidates(concepts: set[str], kg: OdKg,
                       params: ScoringParams) -> CandidateSet:
    """All instance-layer options on simple paths from the aligned concepts
    whose score stays at or above the threshold, with best witness paths.

    Exhaustive best-first exploration; the only pruning is the threshold
    (sound, every factor being at most 1) and the hop bound.
    """
    if not concepts:
        raise ValueError("extract_candidates needs a non-empty concept set")
    adjacency: dict[str, list[tuple[str, str]]] = {}
    for head, relation, tail in kg.all_edges():
        adjacency.setdefault(head, []).append((relation, tail))
        adjacency.setdefault(tail, []).append((relation, head))
    for edges in adjacency.values():
        edges.sort()

    degree_cache: dict[str, int] = {}
    best: dict[str, ReasoningPath] = {}
    heap: list[tuple[float, str, tuple, str]] = []
    for start in sorted(concepts):
        heapq.heappush(heap, (-1.0, start, (), start))

    while heap:
        neg_score, node, steps, start = heapq.heappop(heap)
        score = -neg_score
        path = ReasoningPath(start=start, steps=steps, score=score)
        if node in kg.instance_entities:
            incumbent = best.get(node)
            if incumbent is None or _witness_key(path) < _witness_key(incumbent):
                best[node] = path
        if len(steps) >= params.max_hops:
            continue
        on_path = set(path.nodes())
        for relation, neighbor in adjacency.get(node, ()):
            if neighbor in on_path:
                continue
            next_score = score * params.strength(relation) \
                * params.importance(neighbor, kg, degree_cache)
            if next_score < params.threshold:
                continue
            heapq.heappush(heap, (-next_score, neighbor,
                                  steps + ((relation, neighbor),), start))

    return CandidateSet(options=set(best), witness=best)
