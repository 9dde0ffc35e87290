"""Dual-layer knowledge graph: instance layer, concept layer, cross links.

The store keeps three edge sets (instance triples, concept triples, and
cross-layer ``related_to`` links) over two disjoint entity layers, with
referential integrity enforced on every mutation.  Persistence is a single
versioned JSON document whose arrays are sorted, so structurally equal
graphs serialize to identical bytes.
"""

from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass, field

from .errors import CorruptFile, LayerMismatch, SchemaVersionTooNew, UnknownEntity
from .kconfig.model import (
    ConfigSpace,
    InstanceTriple,
    OptionType,
    extract_instance_triples,
    normalize_description,
)

SCHEMA_VERSION = 1
CONCEPT_RELATIONS = ("inclusion", "dependency", "influence")
CROSS_RELATION = "related_to"


@dataclass(frozen=True)
class InstanceEntity:
    symbol: str
    description: str
    option_type: OptionType | None


@dataclass(frozen=True)
class ConceptEntity:
    id: str
    label: str
    provenance: str

    def __post_init__(self) -> None:
        if not self.label:
            raise ValueError("concept label must be non-empty")


@dataclass(frozen=True)
class ConceptTriple:
    head: str
    relation: str
    tail: str

    def __post_init__(self) -> None:
        if self.relation not in CONCEPT_RELATIONS:
            raise ValueError(f"not a concept relation: {self.relation}")
        if self.head == self.tail:
            raise ValueError(f"self-loop on concept {self.head}")

    def as_tuple(self) -> tuple[str, str, str]:
        return (self.head, self.relation, self.tail)


@dataclass(frozen=True)
class CrossLayerLink:
    instance: str
    concept: str

    @property
    def relation(self) -> str:
        return CROSS_RELATION

    def as_tuple(self) -> tuple[str, str, str]:
        return (self.instance, CROSS_RELATION, self.concept)


def normalize_label(label: str) -> str:
    return " ".join(label.split()).lower()


def concept_id_for_label(label: str) -> str:
    """Stable content-hash identifier; case/whitespace variants collapse."""
    digest = hashlib.sha256(normalize_label(label).encode("utf-8")).hexdigest()
    return "c" + digest[:16]


@dataclass
class OdKg:
    instance_entities: dict[str, InstanceEntity] = field(default_factory=dict)
    instance_triples: set[InstanceTriple] = field(default_factory=set)
    concept_entities: dict[str, ConceptEntity] = field(default_factory=dict)
    concept_triples: set[ConceptTriple] = field(default_factory=set)
    links: set[CrossLayerLink] = field(default_factory=set)
    schema_version: int = SCHEMA_VERSION
    kernel_version_label: str = ""
    strict: bool = True

    # -- identity ----------------------------------------------------------

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, OdKg):
            return NotImplemented
        return (self.instance_entities == other.instance_entities
                and self.instance_triples == other.instance_triples
                and self.concept_entities == other.concept_entities
                and self.concept_triples == other.concept_triples
                and self.links == other.links
                and self.kernel_version_label == other.kernel_version_label)

    def snapshot(self) -> "OdKg":
        return copy.deepcopy(self)

    def has_node(self, name: str) -> bool:
        return name in self.instance_entities or name in self.concept_entities

    def concept_id_by_label(self, label: str) -> str | None:
        cid = concept_id_for_label(label)
        return cid if cid in self.concept_entities else None

    # -- mutations ----------------------------------------------------------

    def upsert_entities(self, items) -> "OdKg":
        for item in items:
            if isinstance(item, InstanceEntity):
                if item.symbol in self.concept_entities:
                    raise LayerMismatch(f"{item.symbol} already names a concept")
                self.instance_entities[item.symbol] = item
            elif isinstance(item, ConceptEntity):
                if item.id in self.instance_entities:
                    raise LayerMismatch(f"{item.id} already names an option")
                self.concept_entities[item.id] = item
            else:
                raise TypeError(f"not an entity: {item!r}")
        return self

    def _require(self, layer: dict, name: str, other: dict, what: str) -> None:
        if name in layer:
            return
        if name in other:
            raise LayerMismatch(f"{what} endpoint {name} lives in the other layer")
        if self.strict:
            raise UnknownEntity(f"{what} endpoint {name} does not exist")
        # Lenient mode: materialize a stub so LLM-extracted triples can land
        # before their entities are described.
        if layer is self.instance_entities:
            self.instance_entities[name] = InstanceEntity(name, "", None)
        else:
            self.concept_entities[name] = ConceptEntity(name, name, "stub")

    def upsert_triples(self, items) -> "OdKg":
        for item in items:
            if isinstance(item, InstanceTriple):
                self._require(self.instance_entities, item.head,
                              self.concept_entities, "instance triple")
                self._require(self.instance_entities, item.tail,
                              self.concept_entities, "instance triple")
                self.instance_triples.add(item)
            elif isinstance(item, ConceptTriple):
                self._require(self.concept_entities, item.head,
                              self.instance_entities, "concept triple")
                self._require(self.concept_entities, item.tail,
                              self.instance_entities, "concept triple")
                self.concept_triples.add(item)
            elif isinstance(item, CrossLayerLink):
                self._require(self.instance_entities, item.instance,
                              self.concept_entities, "link")
                self._require(self.concept_entities, item.concept,
                              self.instance_entities, "link")
                self.links.add(item)
            else:
                raise TypeError(f"not a triple: {item!r}")
        return self

    def remove_entity(self, name: str) -> "OdKg":
        """Remove an entity and every triple or link touching it."""
        if name in self.instance_entities:
            del self.instance_entities[name]
            self.instance_triples = {
                t for t in self.instance_triples if name not in (t.head, t.tail)
            }
            self.links = {l for l in self.links if l.instance != name}
        elif name in self.concept_entities:
            del self.concept_entities[name]
            self.concept_triples = {
                t for t in self.concept_triples if name not in (t.head, t.tail)
            }
            self.links = {l for l in self.links if l.concept != name}
        else:
            raise UnknownEntity(name)
        return self

    # -- queries --------------------------------------------------------------

    def neighbors(self, node: str, direction: str = "both",
                  relation_filter: set[str] | None = None) -> list[tuple[str, str]]:
        """Incident edges as (relation, other-node), deterministically sorted."""
        if not self.has_node(node):
            raise UnknownEntity(node)
        if direction not in ("out", "in", "both"):
            raise ValueError(f"bad direction {direction!r}")
        found: set[tuple[str, str]] = set()

        def consider(head: str, relation: str, tail: str) -> None:
            if relation_filter is not None and relation not in relation_filter:
                return
            if direction in ("out", "both") and head == node:
                found.add((relation, tail))
            if direction in ("in", "both") and tail == node:
                found.add((relation, head))

        for t in self.instance_triples:
            consider(t.head, t.relation, t.tail)
        for t in self.concept_triples:
            consider(t.head, t.relation, t.tail)
        for l in self.links:
            consider(l.instance, CROSS_RELATION, l.concept)
        return sorted(found)

    def all_edges(self) -> list[tuple[str, str, str]]:
        """Every edge of the unified graph as (head, relation, tail), sorted."""
        edges = [t.as_tuple() for t in self.instance_triples]
        edges += [t.as_tuple() for t in self.concept_triples]
        edges += [l.as_tuple() for l in self.links]
        return sorted(edges)

    def degree(self, node: str) -> int:
        return len([1 for h, _, t in self.all_edges() if node in (h, t)])

    def check_integrity(self) -> list[str]:
        """Referential-integrity violations; empty list means consistent."""
        problems = []
        for t in self.instance_triples:
            for end in (t.head, t.tail):
                if end not in self.instance_entities:
                    problems.append(f"instance triple endpoint missing: {end}")
        for t in self.concept_triples:
            for end in (t.head, t.tail):
                if end not in self.concept_entities:
                    problems.append(f"concept triple endpoint missing: {end}")
        for l in self.links:
            if l.instance not in self.instance_entities:
                problems.append(f"link instance missing: {l.instance}")
            if l.concept not in self.concept_entities:
                problems.append(f"link concept missing: {l.concept}")
        return sorted(problems)

    def stats_text(self) -> str:
        return (
            f"instance_entities: {len(self.instance_entities)}\n"
            f"instance_triples: {len(self.instance_triples)}\n"
            f"concept_entities: {len(self.concept_entities)}\n"
            f"concept_triples: {len(self.concept_triples)}\n"
            f"links: {len(self.links)}\n"
        )

    # -- persistence -------------------------------------------------------------

    def to_canonical_json(self) -> str:
        doc = {
            "schema_version": self.schema_version,
            "kernel_version_label": self.kernel_version_label,
            "instance_entities": [
                {
                    "symbol": e.symbol,
                    "description": e.description,
                    "option_type": e.option_type.value if e.option_type else None,
                }
                for _, e in sorted(self.instance_entities.items())
            ],
            "instance_triples": sorted(t.as_tuple() for t in self.instance_triples),
            "concept_entities": [
                {"id": e.id, "label": e.label, "provenance": e.provenance}
                for _, e in sorted(self.concept_entities.items())
            ],
            "concept_triples": sorted(t.as_tuple() for t in self.concept_triples),
            "links": sorted([l.instance, l.concept] for l in self.links),
        }
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"

    def save(self, path: str) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.to_canonical_json())


def load(path: str) -> OdKg:
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise CorruptFile(f"{path}: {exc.msg}", exc.pos) from exc
    if not isinstance(doc, dict):
        raise CorruptFile(f"{path}: top level is not an object")
    version = doc.get("schema_version")
    if not isinstance(version, int):
        raise CorruptFile(f"{path}: missing schema_version")
    if version > SCHEMA_VERSION:
        raise SchemaVersionTooNew(f"{path}: schema {version} > {SCHEMA_VERSION}")
    kg = OdKg(schema_version=version,
              kernel_version_label=doc.get("kernel_version_label", ""))
    try:
        for raw in doc["instance_entities"]:
            ot = OptionType(raw["option_type"]) if raw["option_type"] else None
            kg.instance_entities[raw["symbol"]] = InstanceEntity(
                raw["symbol"], raw["description"], ot)
        for head, relation, tail in doc["instance_triples"]:
            kg.instance_triples.add(InstanceTriple(head, relation, tail))
        for raw in doc["concept_entities"]:
            kg.concept_entities[raw["id"]] = ConceptEntity(
                raw["id"], raw["label"], raw["provenance"])
        for head, relation, tail in doc["concept_triples"]:
            kg.concept_triples.add(ConceptTriple(head, relation, tail))
        for instance, concept in doc["links"]:
            kg.links.add(CrossLayerLink(instance, concept))
    except (KeyError, TypeError, ValueError) as exc:
        raise CorruptFile(f"{path}: malformed document: {exc}") from exc
    problems = kg.check_integrity()
    if problems:
        raise CorruptFile(f"{path}: integrity: {problems[0]}")
    return kg


def build_instance_layer(space: ConfigSpace, strict: bool = True) -> OdKg:
    """Instance-layer graph fragment for a parsed configuration space.

    One entity per option (assignable or container); triples referencing
    unresolved external symbols are excluded, matching the layer's
    referential-integrity contract.  The parse report retains those names.
    """
    kg = OdKg(kernel_version_label=space.kernel_version_label, strict=strict)
    for name in sorted(space.options):
        opt = space.options[name]
        kg.instance_entities[name] = InstanceEntity(
            symbol=name,
            description=normalize_description(opt),
            option_type=opt.option_type,
        )
    for triple in extract_instance_triples(space):
        if triple.head in kg.instance_entities and triple.tail in kg.instance_entities:
            kg.instance_triples.add(triple)
    return kg
