"""Command-line interface wiring the whole pipeline.

Exit codes: 0 success, 1 validation failure or any other package error,
2 missing input path, 3 objective aligned to no concept, 4 completion
client failure, 5 write-permission failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time

from . import engine, knowledge, maintenance, odkg, reasoner
from .config import CliConfig, load_config
from .errors import ByosError, ClientError, NoAlignment
from .kconfig.expr import Tristate
from .kconfig.parser import parse_kconfig_tree
from .llm import Cassette, LiveClient, RecordingClient, ReplayClient
from .maintenance import KernelSnapshot
from .prompts import TemplateSet

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_MISSING_PATH = 2
EXIT_NO_ALIGNMENT = 3
EXIT_CLIENT = 4
EXIT_WRITE = 5


def make_client(cfg: CliConfig):
    client = cfg.client
    if client.mode == "replay":
        if not client.cassette_path:
            raise ClientError("replay mode needs client.cassette_path")
        return ReplayClient(Cassette(client.cassette_path))
    live = LiveClient(model=client.model, base_url=client.base_url or None,
                      max_inflight=client.max_inflight)
    if client.mode == "record":
        if not client.cassette_path:
            raise ClientError("record mode needs client.cassette_path")
        return RecordingClient(live, Cassette(client.cassette_path))
    return live


def make_scorer(cfg: CliConfig):
    if cfg.scorer.kind == "synthetic":
        targets = {}
        for symbol, (value, weight) in cfg.scorer.targets.items():
            if value in ("y", "m", "n"):
                targets[symbol] = (Tristate.from_text(value), weight)
            else:
                try:
                    targets[symbol] = (int(value, 0), weight)
                except ValueError:
                    targets[symbol] = (value, weight)
        return engine.SyntheticScorer(targets)
    if cfg.scorer.kind == "command":
        return engine.ExternalCommandScorer(command=cfg.scorer.command,
                                            timeout_s=cfg.scorer.timeout_s,
                                            pattern=cfg.scorer.pattern)
    return None


def make_templates(cfg: CliConfig) -> TemplateSet:
    return TemplateSet(cfg.paths.templates_dir or None)


def _emit(args, record: dict, human: str) -> None:
    if args.json:
        print(json.dumps(record, sort_keys=True))
    else:
        print(human)


# --- subcommands -----------------------------------------------------------------

def cmd_build_kg(args, cfg: CliConfig) -> int:
    space = parse_kconfig_tree(args.kconfig_root, version_label=args.version_label)
    kg = odkg.build_instance_layer(space)
    templates = make_templates(cfg)
    if not args.instance_only:
        docs = knowledge.load_corpus(args.corpus_dir)
        if not docs:
            raise ByosError(f"no corpus documents found under {args.corpus_dir}")
        client = make_client(cfg)
        knowledge.extract_concepts(docs, client, kg, templates)
        entities = [kg.instance_entities[s] for s in sorted(kg.instance_entities)]
        knowledge.map_cross_layer(entities, kg, client, templates)
    kg.save(args.out)
    for line in kg.stats_text().splitlines():
        _emit(args, {"stat": line}, line)
    _emit(args, {"wrote": args.out}, f"wrote {args.out}")
    return EXIT_OK


def cmd_tune(args, cfg: CliConfig) -> int:
    start = time.perf_counter()
    kg = odkg.load(args.kg)
    space = parse_kconfig_tree(args.kconfig_root)
    client = make_client(cfg)
    templates = make_templates(cfg)

    objective = reasoner.parse_objective(args.objective, client, templates)
    concepts = reasoner.align_concepts(objective, kg, client, templates)
    candidates = reasoner.extract_candidates(concepts, kg, cfg.reasoner)
    retriever = knowledge.KnowledgeRetriever(kg=kg)
    settings = engine.GenerationSettings(
        bool_batch_size=cfg.engine.bool_batch_size,
        tristate_increase_value=cfg.tristate_increase(),
        step2_enabled=cfg.engine.step2_enabled,
    )
    config, trace = engine.generate(
        candidates, space, kg, concepts, client,
        make_scorer(cfg),
        objective=objective,
        templates=templates,
        knowledge_block=retriever.knowledge_block(objective.text),
        settings=settings,
    )
    text = engine.emit_dotconfig(config, space)
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write(text)

    labels = sorted(kg.concept_entities[c].label for c in concepts)
    _emit(args, {"entities": objective.extracted_entities},
          "objective_entities: " + ", ".join(objective.extracted_entities))
    _emit(args, {"concepts": labels}, "aligned_concepts: " + ", ".join(labels))
    _emit(args, {"kq_size": len(candidates.options)},
          f"K_q size: {len(candidates.options)}")
    for event in trace.events:
        line = f"{event.outcome}\t{event.option}\t{event.prompt_kind}\t{event.reason}"
        _emit(args, {"trace": line}, line)
    _emit(args, {"wrote": args.out}, f"wrote {args.out}")
    runtime = time.perf_counter() - start
    print(f"runtime_s: {runtime:.3f}")  # timing line, excluded from byte checks
    for line in trace.ledger.lines():
        _emit(args, {"cost": line}, line)
    return EXIT_OK


def cmd_validate(args, cfg: CliConfig) -> int:
    space = parse_kconfig_tree(args.kconfig_root)
    with open(args.config_path, "r", encoding="utf-8") as fh:
        text = fh.read()
    config = engine.parse_dotconfig(text, space)
    unknown = [s for s in config.assignments if s not in space.options]
    for symbol in unknown:
        del config.assignments[symbol]
    report = engine.check_validity(config, space)
    for symbol in sorted(unknown):
        _emit(args, {"warning": symbol}, f"warning: unknown symbol {symbol} ignored")
    if report.valid:
        _emit(args, {"valid": True}, "valid")
        return EXIT_OK
    for violation in report.violations:
        line = f"{violation.kind}\t{violation.symbol}\t{violation.detail}"
        _emit(args, {"violation": line}, line)
    _emit(args, {"valid": False}, "invalid")
    return EXIT_ERROR


def _snapshots(args) -> tuple[KernelSnapshot, KernelSnapshot]:
    old_space = parse_kconfig_tree(args.old_root, version_label=args.old_root)
    new_space = parse_kconfig_tree(args.new_root, version_label=args.new_root)
    return (KernelSnapshot(old_space, args.old_root),
            KernelSnapshot(new_space, args.new_root))


def cmd_diff(args, cfg: CliConfig) -> int:
    old, new = _snapshots(args)
    delta = maintenance.diff_spaces(old, new)
    report = maintenance.render_delta_report(delta)
    if args.json:
        print(json.dumps({
            "added": sorted(delta.added),
            "removed": sorted(delta.removed),
            "modified": {k: v for k, v in sorted(delta.modified.items())},
        }, sort_keys=True))
    elif report:
        print(report, end="")
    return EXIT_OK


def cmd_update_kg(args, cfg: CliConfig) -> int:
    old, new = _snapshots(args)
    delta = maintenance.diff_spaces(old, new)
    report = maintenance.render_delta_report(delta)
    if report:
        print(report, end="")
    if not args.apply:
        return EXIT_OK
    kg = odkg.load(args.kg)
    maintenance.apply_instance_delta(kg, delta, new.space)
    kg.kernel_version_label = new.space.kernel_version_label or kg.kernel_version_label
    if delta.added or (args.remap_modified and delta.modified):
        client = make_client(cfg)
        templates = make_templates(cfg)
        maintenance.update_cross_links(kg, set(delta.added), client, templates)
        if args.remap_modified and delta.modified:
            remap = set(delta.modified)
            kg.links = {l for l in kg.links if l.instance not in remap}
            maintenance.update_cross_links(kg, remap, client, templates)
    kg.save(args.kg)
    _emit(args, {"applied": args.kg}, f"applied delta to {args.kg}")
    return EXIT_OK


def cmd_stats(args, cfg: CliConfig) -> int:
    kg = odkg.load(args.kg)
    print(kg.stats_text(), end="")
    return EXIT_OK


# --- argument plumbing -------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="byos",
        description="Knowledge-driven kernel configuration tuning")
    parser.add_argument("--config", help="TOML config file (or $BYOS_CONFIG)")
    parser.add_argument("--json", action="store_true",
                        help="machine-readable line-delimited output")
    parser.add_argument("--seed", type=int, default=0,
                        help="seed for randomized helpers (none in core)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build-kg", help="parse a tree, build both layers, save")
    p.add_argument("kconfig_root")
    p.add_argument("corpus_dir")
    p.add_argument("-o", "--out", required=True)
    p.add_argument("--instance-only", action="store_true")
    p.add_argument("--version-label", default="")
    p.set_defaults(fn=cmd_build_kg, needs=["kconfig_root", "corpus_dir"])

    p = sub.add_parser("tune", help="objective -> valid .config fragment")
    p.add_argument("objective")
    p.add_argument("--kg", required=True)
    p.add_argument("--kconfig-root", required=True)
    p.add_argument("-o", "--out", required=True)
    p.set_defaults(fn=cmd_tune, needs=["kg", "kconfig_root"])

    p = sub.add_parser("validate", help="check a .config against a tree")
    p.add_argument("config_path")
    p.add_argument("--kconfig-root", required=True)
    p.set_defaults(fn=cmd_validate, needs=["config_path", "kconfig_root"])

    p = sub.add_parser("diff", help="configuration delta between two trees")
    p.add_argument("old_root")
    p.add_argument("new_root")
    p.set_defaults(fn=cmd_diff, needs=["old_root", "new_root"])

    p = sub.add_parser("update-kg", help="diff two trees and maintain the graph")
    p.add_argument("old_root")
    p.add_argument("new_root")
    p.add_argument("--kg", required=True)
    p.add_argument("--apply", action="store_true")
    p.add_argument("--remap-modified", action="store_true")
    p.set_defaults(fn=cmd_update_kg, needs=["old_root", "new_root", "kg"])

    p = sub.add_parser("stats", help="entity/triple/link counts per layer")
    p.add_argument("--kg", required=True)
    p.set_defaults(fn=cmd_stats, needs=["kg"])
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    for attr in getattr(args, "needs", []):
        path = getattr(args, attr)
        if not os.path.exists(path):
            print(f"error: missing path: {path}", file=sys.stderr)
            return EXIT_MISSING_PATH
    try:
        cfg = load_config(args.config)
        return args.fn(args, cfg)
    except FileNotFoundError as exc:
        print(f"error: missing path: {exc}", file=sys.stderr)
        return EXIT_MISSING_PATH
    except NoAlignment as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NO_ALIGNMENT
    except ClientError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CLIENT
    except PermissionError as exc:
        print(f"error: cannot write: {exc}", file=sys.stderr)
        return EXIT_WRITE
    except ByosError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
