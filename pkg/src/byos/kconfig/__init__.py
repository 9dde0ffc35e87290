"""Kconfig parsing: tristate expressions, option model, tree parser."""

from .expr import (
    And,
    ConstTristate,
    DependencyExpr,
    Eq,
    Neq,
    Not,
    Or,
    SymbolRef,
    Tristate,
    conjoin,
    evaluate_expr,
    expr_symbols,
    expr_to_text,
    parse_expr,
)
from .model import (
    ConfigOption,
    ConfigSpace,
    Default,
    InstanceTriple,
    OptionType,
    Selection,
    extract_instance_triples,
    normalize_description,
)
from .parser import parse_kconfig_tree

__all__ = [
    "And", "ConfigOption", "ConfigSpace", "ConstTristate", "Default",
    "DependencyExpr", "Eq", "InstanceTriple", "Neq", "Not", "OptionType",
    "Or", "Selection", "SymbolRef", "Tristate", "conjoin", "evaluate_expr",
    "expr_symbols", "expr_to_text", "extract_instance_triples",
    "normalize_description", "parse_expr", "parse_kconfig_tree",
]
