"""Operator configuration file (TOML), mirroring the module boundaries."""

from __future__ import annotations

import os
from dataclasses import dataclass, field

try:
    import tomllib  # Python >= 3.11
except ModuleNotFoundError:  # pragma: no cover - depends on interpreter
    import tomli as tomllib

from .errors import ByosError
from .kconfig.expr import Tristate
from .reasoner import DEFAULT_RELATION_STRENGTH, ScoringParams

ENV_CONFIG = "BYOS_CONFIG"


@dataclass
class ClientConfig:
    base_url: str = ""
    model: str = "default-model"
    mode: str = "replay"  # live | record | replay
    cassette_path: str = ""
    max_inflight: int = 4


@dataclass
class EngineConfig:
    bool_batch_size: int = 9
    tristate_increase_value: str = "y"
    step2_enabled: bool = True


@dataclass
class ScorerConfig:
    kind: str = "none"  # none | synthetic | command
    command: str = ""
    timeout_s: float = 60.0
    pattern: str = r"[-+]?\d+(?:\.\d+)?"
    targets: dict[str, tuple[str, float]] = field(default_factory=dict)


@dataclass
class PathsConfig:
    kg_path: str = ""
    templates_dir: str = ""


@dataclass
class CliConfig:
    client: ClientConfig = field(default_factory=ClientConfig)
    reasoner: ScoringParams = field(default_factory=ScoringParams)
    engine: EngineConfig = field(default_factory=EngineConfig)
    scorer: ScorerConfig = field(default_factory=ScorerConfig)
    paths: PathsConfig = field(default_factory=PathsConfig)

    def tristate_increase(self) -> Tristate:
        return Tristate.from_text(self.engine.tristate_increase_value)


def load_config(path: str | None = None) -> CliConfig:
    """Read the TOML config named by ``path`` or $BYOS_CONFIG; every section
    and key is optional."""
    cfg = CliConfig()
    path = path or os.environ.get(ENV_CONFIG)
    if not path:
        return cfg
    if not os.path.exists(path):
        raise FileNotFoundError(path)
    with open(path, "rb") as fh:
        try:
            doc = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise ByosError(f"bad config file {path}: {exc}") from exc

    client = doc.get("client", {})
    cfg.client = ClientConfig(
        base_url=str(client.get("base_url", cfg.client.base_url)),
        model=str(client.get("model", cfg.client.model)),
        mode=str(client.get("mode", cfg.client.mode)),
        cassette_path=str(client.get("cassette_path", cfg.client.cassette_path)),
        max_inflight=int(client.get("max_inflight", cfg.client.max_inflight)),
    )
    if cfg.client.mode not in ("live", "record", "replay"):
        raise ByosError(f"bad client mode {cfg.client.mode!r}")

    reasoner = doc.get("reasoner", {})
    strength = dict(DEFAULT_RELATION_STRENGTH)
    strength.update({k: float(v) for k, v in
                     reasoner.get("relation_strength", {}).items()})
    cfg.reasoner = ScoringParams(
        relation_strength=strength,
        node_importance_mode=str(reasoner.get("node_importance",
                                              cfg.reasoner.node_importance_mode)),
        threshold=float(reasoner.get("tau", cfg.reasoner.threshold)),
        max_hops=int(reasoner.get("max_hops", cfg.reasoner.max_hops)),
    )

    engine = doc.get("engine", {})
    cfg.engine = EngineConfig(
        bool_batch_size=int(engine.get("bool_batch_size",
                                       cfg.engine.bool_batch_size)),
        tristate_increase_value=str(engine.get("tristate_increase_value",
                                               cfg.engine.tristate_increase_value)),
        step2_enabled=bool(engine.get("step2_enabled", cfg.engine.step2_enabled)),
    )
    if not 1 <= cfg.engine.bool_batch_size <= 9:
        raise ByosError("engine.bool_batch_size must be within 1..9")

    scorer = doc.get("scorer", {})
    targets = {}
    for symbol, entry in scorer.get("targets", {}).items():
        value, weight = entry
        targets[str(symbol)] = (str(value), float(weight))
    cfg.scorer = ScorerConfig(
        kind=str(scorer.get("kind", cfg.scorer.kind)),
        command=str(scorer.get("command", cfg.scorer.command)),
        timeout_s=float(scorer.get("timeout_s", cfg.scorer.timeout_s)),
        pattern=str(scorer.get("pattern", cfg.scorer.pattern)),
        targets=targets,
    )
    if cfg.scorer.kind not in ("none", "synthetic", "command"):
        raise ByosError(f"bad scorer kind {cfg.scorer.kind!r}")

    paths = doc.get("paths", {})
    cfg.paths = PathsConfig(
        kg_path=str(paths.get("kg_path", "")),
        templates_dir=str(paths.get("templates_dir", "")),
    )
    return cfg
