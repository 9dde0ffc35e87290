"""Exception types shared across the package."""

from __future__ import annotations


class ByosError(Exception):
    """Base class for all errors raised by this package."""


# --- Kconfig parsing ---------------------------------------------------------

class KconfigSyntaxError(ByosError):
    """Malformed construct in a Kconfig file."""

    def __init__(self, message: str, filename: str = "?", line: int = 0):
        super().__init__(f"{filename}:{line}: {message}")
        self.filename = filename
        self.line = line


class UnsupportedConstruct(ByosError):
    """Kconfig construct outside the supported grammar subset."""

    def __init__(self, construct: str, filename: str = "?", line: int = 0):
        super().__init__(f"{filename}:{line}: unsupported construct: {construct}")
        self.construct = construct
        self.filename = filename
        self.line = line


# --- Knowledge graph store ---------------------------------------------------

class UnknownEntity(ByosError):
    """A graph operation referenced an entity that does not exist."""


class LayerMismatch(ByosError):
    """A mutation referenced an entity in the wrong graph layer."""


class SchemaVersionTooNew(ByosError):
    """A persisted graph file was written by a newer schema."""


class CorruptFile(ByosError):
    """A persisted graph file could not be decoded."""

    def __init__(self, message: str, offset: int = 0):
        super().__init__(f"{message} (offset {offset})")
        self.offset = offset


class StaleKg(ByosError):
    """A maintenance delta is inconsistent with the graph's current state."""


# --- Completion client -------------------------------------------------------

class ClientError(ByosError):
    """Transport failure, timeout after retries, or cassette miss."""


class ParseFailure(ByosError):
    """A whole client response contained no parseable lines."""


# --- Reasoning and generation ------------------------------------------------

class EmptyObjective(ByosError):
    """The tuning objective text was empty."""


class NoAlignment(ByosError):
    """No objective entity could be aligned to any concept."""


class EmptyConceptLayer(ByosError):
    """An operation requiring concepts ran against an empty concept layer."""


class UnknownRelation(ByosError):
    """A path step used a relation with no configured strength."""


class UnknownSymbol(ByosError):
    """An operation referenced an option absent from the configuration space."""


class NonConvergence(ByosError):
    """Default resolution oscillated past its round bound."""

    def __init__(self, symbols: list[str]):
        super().__init__("default resolution did not converge; oscillating: "
                         + ", ".join(sorted(symbols)))
        self.symbols = sorted(symbols)


class InvalidConfig(ByosError):
    """A configuration without a passing validity report was emitted."""


class InfeasibleCandidate(ByosError):
    """Even the default-resolved configuration violates the space constraints."""
