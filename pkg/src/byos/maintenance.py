"""Incremental graph maintenance across kernel snapshots.

Diffing is by symbol-set difference plus canonical per-aspect hashes for
options that persist; applying a delta touches only the instance layer
and cross links, never the concept layer.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

from .errors import StaleKg
from .kconfig.expr import expr_to_text
from .kconfig.model import (
    ConfigOption,
    ConfigSpace,
    extract_instance_triples,
    normalize_description,
)
from .knowledge import MappingResult, map_cross_layer
from .odkg import InstanceEntity, OdKg
from .prompts import TemplateSet

CHANGE_KINDS = ("domain", "dependency", "description")


@dataclass
class KernelSnapshot:
    space: ConfigSpace
    version_label: str

    def __post_init__(self) -> None:
        if not self.version_label:
            raise ValueError("snapshot needs a non-empty version label")


@dataclass
class ConfigDelta:
    added: set[str] = field(default_factory=set)
    removed: set[str] = field(default_factory=set)
    modified: dict[str, list[str]] = field(default_factory=dict)

    def is_empty(self) -> bool:
        return not (self.added or self.removed or self.modified)


def _expr_text(expr) -> str:
    return "" if expr is None else expr_to_text(expr)


def _aspect_payloads(opt: ConfigOption) -> dict[str, str]:
    """Canonical JSON payloads per change aspect; equal payloads hash equal."""
    domain = {
        "type": opt.option_type.value,
        "range": list(opt.range) if opt.range else None,
        "defaults": [[d.raw, _expr_text(d.guard)] for d in opt.defaults],
    }
    dependency = {
        "depends_on": _expr_text(opt.depends_on),
        "selects": [[s.target, _expr_text(s.guard)] for s in opt.selects],
        "implies": [[s.target, _expr_text(s.guard)] for s in opt.implies],
        "parent": opt.parent,
    }
    description = {"text": normalize_description(opt)}
    return {
        "domain": json.dumps(domain, sort_keys=True),
        "dependency": json.dumps(dependency, sort_keys=True),
        "description": json.dumps(description, sort_keys=True),
    }


def option_aspect_hashes(opt: ConfigOption) -> dict[str, str]:
    return {
        aspect: hashlib.sha256(payload.encode("utf-8")).hexdigest()
        for aspect, payload in _aspect_payloads(opt).items()
    }


def diff_spaces(old: KernelSnapshot, new: KernelSnapshot) -> ConfigDelta:
    """Symbol-level delta: pure set difference for added/removed, canonical
    aspect-hash comparison for options that persist."""
    old_names = set(old.space.options)
    new_names = set(new.space.options)
    delta = ConfigDelta(added=new_names - old_names, removed=old_names - new_names)
    for name in sorted(old_names & new_names):
        old_hashes = option_aspect_hashes(old.space.options[name])
        new_hashes = option_aspect_hashes(new.space.options[name])
        kinds = [k for k in CHANGE_KINDS if old_hashes[k] != new_hashes[k]]
        if kinds:
            delta.modified[name] = kinds
    return delta


def render_delta_report(delta: ConfigDelta) -> str:
    """Three-section sorted text report; empty string for an empty delta."""
    sections = []
    if delta.added:
        sections.append("ADDED:\n" + "\n".join(f"  {s}" for s in sorted(delta.added)))
    if delta.removed:
        sections.append("REMOVED:\n" + "\n".join(f"  {s}" for s in sorted(delta.removed)))
    if delta.modified:
        lines = [f"  {s}: {', '.join(delta.modified[s])}"
                 for s in sorted(delta.modified)]
        sections.append("MODIFIED:\n" + "\n".join(lines))
    return ("\n".join(sections) + "\n") if sections else ""


def apply_instance_delta(kg: OdKg, delta: ConfigDelta, new_space: ConfigSpace,
                         on_stale: str = "error") -> OdKg:
    """Bring the instance layer in line with the new snapshot.

    Added symbols gain entities and their incident triples; removed
    symbols lose their entity, every incident triple, and every cross
    link; modified symbols get their entity and outgoing relations
    re-derived.  The concept layer is never touched.

    ``on_stale`` picks between raising StaleKg and skipping when the delta
    does not match the graph (e.g. it was already applied).
    """
    if on_stale not in ("error", "skip"):
        raise ValueError(f"bad on_stale mode {on_stale!r}")

    added = sorted(delta.added)
    removed = sorted(delta.removed)
    for symbol in removed:
        if symbol not in kg.instance_entities and on_stale == "error":
            raise StaleKg(f"removed symbol {symbol} is not in the graph")
    for symbol in added:
        if symbol in kg.instance_entities and on_stale == "error":
            raise StaleKg(f"added symbol {symbol} is already in the graph")
        if symbol not in new_space.options:
            raise StaleKg(f"added symbol {symbol} is missing from the new snapshot")
    for symbol in delta.modified:
        if symbol not in new_space.options:
            raise StaleKg(f"modified symbol {symbol} is missing from the new snapshot")
        if symbol not in kg.instance_entities and on_stale == "error":
            raise StaleKg(f"modified symbol {symbol} is not in the graph")

    for symbol in removed:
        if symbol in kg.instance_entities:
            kg.remove_entity(symbol)

    def entity_for(symbol: str) -> InstanceEntity:
        opt = new_space.options[symbol]
        return InstanceEntity(symbol, normalize_description(opt), opt.option_type)

    for symbol in added:
        kg.instance_entities[symbol] = entity_for(symbol)

    refreshed = sorted(delta.modified)
    for symbol in refreshed:
        if symbol in kg.instance_entities:
            kg.instance_entities[symbol] = entity_for(symbol)
        # Drop this symbol's own relations and its containment edge; both
        # are re-derived from the new snapshot below.
        kg.instance_triples = {
            t for t in kg.instance_triples
            if t.head != symbol and not (t.relation == "has_child" and t.tail == symbol)
        }

    touched = set(added) | set(refreshed)
    for triple in sorted(extract_instance_triples(new_space),
                         key=lambda t: t.as_tuple()):
        incident = (triple.head in touched or triple.tail in touched)
        if not incident:
            continue
        if triple.head in kg.instance_entities and triple.tail in kg.instance_entities:
            kg.instance_triples.add(triple)
    return kg


def update_cross_links(kg: OdKg, added: set[str], client,
                       templates: TemplateSet | None = None) -> MappingResult:
    """Map newly added options to concepts; existing links stay untouched."""
    if not added:
        return MappingResult()
    entities = []
    for symbol in sorted(added):
        if symbol not in kg.instance_entities:
            raise StaleKg(f"symbol {symbol} is not in the instance layer")
        entities.append(kg.instance_entities[symbol])
    return map_cross_layer(entities, kg, client, templates)
