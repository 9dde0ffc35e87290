"""Configuration-space model: options, triples, canonical serialization."""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field

from .expr import DependencyExpr, expr_symbols, expr_to_text

INSTANCE_RELATIONS = ("depends_on", "select", "imply", "has_child")


class OptionType(enum.Enum):
    BOOL = "bool"
    TRISTATE = "tristate"
    INT = "int"
    HEX = "hex"
    STRING = "string"
    CHOICE = "choice"
    MENU = "menu"

    @property
    def is_container(self) -> bool:
        return self in (OptionType.CHOICE, OptionType.MENU)

    @property
    def is_tristate_kind(self) -> bool:
        return self in (OptionType.BOOL, OptionType.TRISTATE)

    @property
    def is_value_kind(self) -> bool:
        return self in (OptionType.INT, OptionType.HEX, OptionType.STRING)


@dataclass(frozen=True)
class InstanceTriple:
    head: str
    relation: str
    tail: str

    def __post_init__(self) -> None:
        if self.relation not in INSTANCE_RELATIONS:
            raise ValueError(f"not an instance relation: {self.relation}")

    def as_tuple(self) -> tuple[str, str, str]:
        return (self.head, self.relation, self.tail)


@dataclass(frozen=True)
class Default:
    """One `default` line: raw token text, parsed expression when the
    value is expression-shaped, and the optional `if` guard."""

    raw: str
    expr: DependencyExpr | None
    guard: DependencyExpr | None


@dataclass(frozen=True)
class Selection:
    """One `select`/`imply` line."""

    target: str
    guard: DependencyExpr | None


@dataclass
class ConfigOption:
    name: str
    option_type: OptionType
    prompt: str | None = None
    help_text: str | None = None
    defaults: list[Default] = field(default_factory=list)
    range: tuple[int, int] | None = None
    depends_on: DependencyExpr | None = None
    selects: list[Selection] = field(default_factory=list)
    implies: list[Selection] = field(default_factory=list)
    parent: str | None = None
    source_file: str = ""
    source_line: int = 0

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "type": self.option_type.value,
            "prompt": self.prompt,
            "help": self.help_text,
            "defaults": [
                {"value": d.raw, "guard": _opt_text(d.guard)} for d in self.defaults
            ],
            "range": list(self.range) if self.range else None,
            "depends_on": _opt_text(self.depends_on),
            "selects": [
                {"target": s.target, "guard": _opt_text(s.guard)} for s in self.selects
            ],
            "implies": [
                {"target": s.target, "guard": _opt_text(s.guard)} for s in self.implies
            ],
            "parent": self.parent,
            "source": f"{self.source_file}:{self.source_line}",
        }


def _opt_text(expr: DependencyExpr | None) -> str | None:
    return None if expr is None else expr_to_text(expr)


@dataclass
class ConfigSpace:
    """Directed graph of options, dependency edges, and constraints."""

    options: dict[str, ConfigOption] = field(default_factory=dict)
    edges: set[InstanceTriple] = field(default_factory=set)
    choice_groups: dict[str, list[str]] = field(default_factory=dict)
    kernel_version_label: str = ""
    unresolved_symbols: set[str] = field(default_factory=set)

    def __contains__(self, name: str) -> bool:
        return name in self.options

    def children_of(self, container: str) -> list[str]:
        """Direct children of a menu/choice node, in name order."""
        return sorted(
            name for name, opt in self.options.items() if opt.parent == container
        )

    def to_canonical_json(self) -> str:
        doc = {
            "kernel_version_label": self.kernel_version_label,
            "options": [self.options[n].to_dict() for n in sorted(self.options)],
            "edges": sorted(t.as_tuple() for t in self.edges),
            "choice_groups": {k: self.choice_groups[k] for k in sorted(self.choice_groups)},
            "unresolved_symbols": sorted(self.unresolved_symbols),
        }
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def normalize_description(option: ConfigOption) -> str:
    """Canonical one-line description used for prompts and graph entities.

    Whitespace runs collapse to single spaces; case and punctuation are
    preserved.  An option without help text keeps the empty text part.
    """
    text = " ".join((option.help_text or "").split())
    return f"Config {option.name} description: {text}"


def extract_instance_triples(space: ConfigSpace) -> set[InstanceTriple]:
    """Dependency/structure triples of the space, deduplicated.

    One triple per symbol referenced by a depends_on expression, one per
    select/imply entry, and one per containment edge (head = container).
    Triples may reference unresolved external symbols; those names are in
    ``space.unresolved_symbols``.
    """
    triples: set[InstanceTriple] = set()
    for name in sorted(space.options):
        opt = space.options[name]
        if opt.depends_on is not None:
            for ref in expr_symbols(opt.depends_on):
                triples.add(InstanceTriple(name, "depends_on", ref))
        for sel in opt.selects:
            triples.add(InstanceTriple(name, "select", sel.target))
        for imp in opt.implies:
            triples.add(InstanceTriple(name, "imply", imp.target))
        if opt.parent is not None:
            triples.add(InstanceTriple(opt.parent, "has_child", name))
    return triples
