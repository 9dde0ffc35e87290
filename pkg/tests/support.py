"""Shared test machinery: scripted clients, fixture generators, and the
independent oracles the module tests check against.

The oracles deliberately re-implement the contracts from scratch (own
tristate arithmetic, own path enumeration, own validity clauses) so the
production code is checked against something it does not share logic with.
"""

from __future__ import annotations

import hashlib
import itertools
import math
import re
from collections import defaultdict
from dataclasses import dataclass, field

from byos.kconfig import expr as E
from byos.kconfig.expr import Tristate
from byos.kconfig.model import ConfigSpace, OptionType
from byos.llm import CompletionResult, UsageLedger, record_usage
from byos.odkg import (
    ConceptEntity,
    ConceptTriple,
    CrossLayerLink,
    InstanceEntity,
    OdKg,
    concept_id_for_label,
)
from byos.kconfig.model import InstanceTriple
from byos.reasoner import ReasoningPath, ScoringParams


def _hash_pct(seed: str) -> int:
    return int(hashlib.sha256(seed.encode()).hexdigest(), 16) % 100


def _hash_pick(seed: str, n: int) -> int:
    return int(hashlib.sha256(seed.encode()).hexdigest(), 16) % n


# --- scripted clients -----------------------------------------------------------

def usage_for(prompt: str, text: str) -> tuple[int, int]:
    return len(prompt) // 4 + 1, len(text) // 4 + 1


class StubClient:
    """Pops scripted responses in order; records the prompts it saw."""

    def __init__(self, responses: list[str]):
        self.responses = list(responses)
        self.prompts: list[str] = []
        self.ledger = UsageLedger()

    def complete(self, prompt: str, *, temperature: float = 0.0,
                 max_tokens: int = 1024) -> CompletionResult:
        self.prompts.append(prompt)
        if not self.responses:
            raise AssertionError("StubClient ran out of scripted responses")
        text = self.responses.pop(0)
        pt, ct = usage_for(prompt, text)
        result = CompletionResult(text, pt, ct)
        record_usage(self.ledger, result)
        return result


class AutoResponder:
    """Deterministic rule-based responder covering every prompt template.

    Answers are a pure function of the content blocks (option lists,
    document text), never of the objective wording, so paraphrased
    objectives produce identical decisions.
    """

    KNOWN_APPS = ("Redis", "Apache", "Nginx", "PostgreSQL", "MySQL", "Linux")

    def __init__(self):
        self.ledger = UsageLedger()
        self.prompts: list[str] = []

    def complete(self, prompt: str, *, temperature: float = 0.0,
                 max_tokens: int = 1024) -> CompletionResult:
        self.prompts.append(prompt)
        text = self._answer(prompt)
        pt, ct = usage_for(prompt, text)
        result = CompletionResult(text, pt, ct)
        record_usage(self.ledger, result)
        return result

    def _answer(self, prompt: str) -> str:
        if "Candidate boolean configuration options:" in prompt:
            return self._bool(prompt)
        if "form an exclusive group" in prompt:
            return self._choice(prompt)
        if "Does this directory contain" in prompt:
            return self._menu(prompt)
        if "Configuration option requiring a value:" in prompt:
            return self._value(prompt)
        if "Extract the named entities" in prompt:
            return self._objective(prompt)
        if "Pick the single tuning concept" in prompt:
            return self._align(prompt)
        if "You are building a knowledge graph" in prompt:
            return self._extract(prompt)
        if "You are linking concrete kernel configuration options" in prompt:
            return self._cross(prompt)
        return ""

    def _bool(self, prompt: str) -> str:
        block = prompt.split("Candidate boolean configuration options:\n", 1)[1]
        block = block.split("\n\nFor each option", 1)[0]
        out = []
        for symbol in re.findall(r"CONFIG_([A-Z0-9_]+)", block):
            bucket = _hash_pct(f"bool:{symbol}")
            if bucket < 45:
                effect = "increase"
            elif bucket < 75:
                effect = "decrease"
            elif bucket < 90:
                effect = "cannot determine"
            else:
                continue  # omit the line: exercises the undetermined fallback
            out.append(f"(CONFIG_{symbol} | {effect})")
        return "\n".join(out)

    def _choice(self, prompt: str) -> str:
        block = prompt.split("selected:\n", 1)[1].split("\n\nAnswer", 1)[0]
        members = re.findall(r"CONFIG_([A-Z0-9_]+)", block)
        pick = _hash_pick("choice:" + ",".join(members), len(members) + 1)
        if pick == len(members):
            return "CONFIG_NOT_A_REAL_MEMBER"  # forces retry then fallback
        return f"CONFIG_{members[pick]}"

    def _menu(self, prompt: str) -> str:
        block = prompt.split("under consideration:\n", 1)[1].split("\n\nDoes", 1)[0]
        return "relevant" if _hash_pick("menu:" + block, 3) < 2 else "irrelevant"

    def _value(self, prompt: str) -> str:
        block = prompt.split("Configuration option requiring a value:\n", 1)[1]
        line = block.splitlines()[0]
        m = re.search(r"CONFIG_([A-Z0-9_]+).*\(type (\w+)(?:, range (-?\w+)\.\.(-?\w+))?\)",
                      line)
        if not m:
            return "1"
        symbol, kind, lo, hi = m.groups()
        if kind == "string":
            return f"tuned-{symbol.lower()[:6]}"
        if lo is None:
            return str(_hash_pick(f"value:{symbol}", 97))
        lo_v, hi_v = int(lo, 0), int(hi, 0)
        candidates = [lo_v, hi_v, (lo_v + hi_v) // 2, hi_v * 2 + 5]
        return str(candidates[_hash_pick(f"value:{symbol}", len(candidates))])

    def _objective(self, prompt: str) -> str:
        line = prompt.split("Objective:", 1)[1].splitlines()[0]
        found = [app for app in self.KNOWN_APPS
                 if re.search(rf"\b{app}\b", line, re.IGNORECASE)]
        return "\n".join(found)

    def _align(self, prompt: str) -> str:
        phrase = prompt.split("Phrase:", 1)[1].splitlines()[0].strip().lower()
        block = prompt.split("Known tuning concepts:\n", 1)[1].split("\n\nAnswer", 1)[0]
        labels = [l.strip() for l in block.splitlines() if l.strip()]
        tokens = set(re.findall(r"[a-z0-9]+", phrase))
        for label in labels:
            if tokens & set(re.findall(r"[a-z0-9]+", label.lower())):
                return label
        return labels[0] if labels else ""

    def _extract(self, prompt: str) -> str:
        doc = prompt.split("Document:\n", 1)[1].lower()
        lines: list[str] = []
        if "zswap" in doc:
            lines += [
                "(Swap Pages)", "(RAM-based Memory Pool)", "(I/O Reduction)",
                "(Workload Performance)",
                "(RAM-based Memory Pool | influence | I/O Reduction)",
                "(RAM-based Memory Pool | influence | Workload Performance)",
                "(Swap Pages | dependency | RAM-based Memory Pool)",
            ]
        if "redis" in doc:
            lines += [
                "(Redis)", "(Memory Management)", "(CPU Frequency Scaling)",
                "(Redis | dependency | Memory Management)",
                "(Redis | dependency | CPU Frequency Scaling)",
                "(Memory Management | inclusion | Swap Pages)",
            ]
        if "apache" in doc:
            lines += [
                "(Apache)", "(HTTP Serving)",
                "(Apache | dependency | HTTP Serving)",
                "(HTTP Serving | influence | Workload Performance)",
            ]
        if "linux kernel tuning overview" in doc:
            lines += [
                "(Linux)", "(Memory Management)", "(CPU Frequency Scaling)",
                "(Linux | inclusion | Memory Management)",
                "(Linux | inclusion | CPU Frequency Scaling)",
                "(Memory Management | influence | I/O Reduction)",
            ]
        if "swap pages administration" in doc:
            lines += [
                "(Swap Pages)",
                "(Swap Pages | inclusion | Memory Management)",
            ]
        if not lines:
            lines = ["(Workload Performance)"]
        return "\n".join(lines)

    def _cross(self, prompt: str) -> str:
        block = prompt.split("Configuration options:\n", 1)[1]
        out = []
        for line in block.splitlines():
            m = re.match(r"Config ([A-Za-z0-9_]+) description:", line.strip())
            if not m:
                continue
            symbol = m.group(1)
            label = self._label_for(symbol)
            if label:
                out.append(f"({symbol} | related_to | {label})")
        return "\n".join(out)

    @staticmethod
    def _label_for(symbol: str) -> str | None:
        if symbol.startswith("MENU_"):
            return None
        if "GOVERNOR" in symbol or symbol.startswith("GOV_"):
            return "CPU Frequency Scaling"
        if "SWAP" in symbol or symbol in ("ZPOOL", "ZBUD", "ZSMALLOC"):
            return "Swap Pages"
        if "NET" in symbol or "URING" in symbol:
            return "HTTP Serving"
        if "PREEMPT" in symbol:
            return "Workload Performance"
        if "LOG_BUF" in symbol:
            return "Memory Management"
        return None


# --- fixed dual-layer fixture ------------------------------------------------------

def paper_kg() -> OdKg:
    """Small two-layer graph mirroring the zswap narrative."""
    kg = OdKg(kernel_version_label="fixture")
    kg.upsert_entities([
        InstanceEntity("ZSWAP", "Config ZSWAP description: Compressed cache for swap pages",
                       OptionType.BOOL),
        InstanceEntity("SWAP", "Config SWAP description: ", OptionType.BOOL),
        InstanceEntity("ZPOOL", "Config ZPOOL description: ", OptionType.BOOL),
    ])
    labels = ["Swap Pages", "RAM-based Memory Pool", "I/O Reduction",
              "Workload Performance"]
    kg.upsert_entities([
        ConceptEntity(concept_id_for_label(l), l, "fixture") for l in labels
    ])
    cid = concept_id_for_label
    kg.upsert_triples([
        InstanceTriple("ZSWAP", "depends_on", "SWAP"),
        InstanceTriple("ZSWAP", "select", "ZPOOL"),
        ConceptTriple(cid("Swap Pages"), "dependency", cid("RAM-based Memory Pool")),
        ConceptTriple(cid("RAM-based Memory Pool"), "influence", cid("I/O Reduction")),
        ConceptTriple(cid("RAM-based Memory Pool"), "influence",
                      cid("Workload Performance")),
        CrossLayerLink("ZSWAP", cid("Swap Pages")),
    ])
    return kg


# --- random dual-layer graphs --------------------------------------------------------

def gen_dual_kg(rng) -> OdKg:
    """Random 10-12 node two-layer graph for path-search equivalence."""
    kg = OdKg(kernel_version_label="random")
    n_concepts = rng.randint(4, 6)
    n_instances = rng.randint(5, 6)
    labels = [f"Concept {chr(65 + i)}" for i in range(n_concepts)]
    cids = []
    for label in labels:
        cid = concept_id_for_label(label)
        cids.append(cid)
        kg.concept_entities[cid] = ConceptEntity(cid, label, "random")
    instances = [f"IOPT{i:02d}" for i in range(n_instances)]
    for symbol in instances:
        kg.instance_entities[symbol] = InstanceEntity(
            symbol, f"Config {symbol} description: ", OptionType.BOOL)
    for a, b in itertools.permutations(cids, 2):
        if rng.random() < 0.22:
            kg.concept_triples.add(ConceptTriple(
                a, rng.choice(["inclusion", "dependency", "influence"]), b))
    for a, b in itertools.permutations(instances, 2):
        if rng.random() < 0.18:
            kg.instance_triples.add(InstanceTriple(
                a, rng.choice(["depends_on", "select", "imply", "has_child"]), b))
    for symbol in instances:
        if rng.random() < 0.6:
            kg.links.add(CrossLayerLink(symbol, rng.choice(cids)))
    if not kg.links:
        kg.links.add(CrossLayerLink(instances[0], cids[0]))
    return kg


# --- exhaustive simple-path oracle ----------------------------------------------------

def oracle_candidates(concepts: set[str], kg: OdKg, params: ScoringParams
                      ) -> dict[str, ReasoningPath]:
    """Enumerate every simple path up to the hop bound, post-filter by the
    threshold, and keep the best witness per instance node."""
    adjacency: dict[str, list[tuple[str, str]]] = defaultdict(list)
    edges = kg.all_edges()
    for head, relation, tail in edges:
        adjacency[head].append((relation, tail))
        adjacency[tail].append((relation, head))
    for lst in adjacency.values():
        lst.sort()

    def importance(node: str) -> float:
        if params.node_importance_mode == "uniform":
            return 1.0
        degree = sum(1 for h, _, t in edges if node in (h, t))
        return min(1.0, 1.0 / (1.0 + math.log(1.0 + degree)))

    best: dict[str, tuple[tuple, ReasoningPath]] = {}

    def record(start: str, steps: tuple, score: float, node: str) -> None:
        if node not in kg.instance_entities or score < params.threshold:
            return
        path = ReasoningPath(start=start, steps=steps, score=score)
        key = (-score, len(steps), steps, start)
        incumbent = best.get(node)
        if incumbent is None or key < incumbent[0]:
            best[node] = (key, path)

    def walk(start: str, node: str, steps: tuple, score: float,
             visited: frozenset) -> None:
        record(start, steps, score, node)
        if len(steps) >= params.max_hops:
            return
        for relation, neighbor in adjacency.get(node, ()):
            if neighbor in visited:
                continue
            next_score = score * params.relation_strength[relation] \
                * importance(neighbor)
            walk(start, neighbor, steps + ((relation, neighbor),),
                 next_score, visited | {neighbor})

    for start in sorted(concepts):
        walk(start, start, (), 1.0, frozenset([start]))
    return {node: path for node, (_, path) in best.items()}


# --- independent validity oracle -------------------------------------------------------

def _oracle_eval(expr, env: dict[str, int]) -> int:
    if isinstance(expr, E.SymbolRef):
        return env.get(expr.name, 0)
    if isinstance(expr, E.ConstTristate):
        return int(expr.value)
    if isinstance(expr, E.Not):
        return 2 - _oracle_eval(expr.operand, env)
    if isinstance(expr, E.And):
        return min(_oracle_eval(expr.left, env), _oracle_eval(expr.right, env))
    if isinstance(expr, E.Or):
        return max(_oracle_eval(expr.left, env), _oracle_eval(expr.right, env))
    if isinstance(expr, (E.Eq, E.Neq)):
        value = _oracle_eval(expr.operand, env)
        lit = {"y": 2, "m": 1, "n": 0}.get(expr.literal)
        hit = lit is not None and value == lit
        if isinstance(expr, E.Neq):
            hit = not hit
        return 2 if hit else 0
    raise TypeError(expr)


def _oracle_null(opt) -> object:
    if opt.option_type in (OptionType.BOOL, OptionType.TRISTATE):
        return 0
    if opt.option_type in (OptionType.INT, OptionType.HEX):
        if opt.range is not None:
            lo, hi = opt.range
            return min(max(0, lo), hi)
        return 0
    return ""


def oracle_validity(config, space: ConfigSpace) -> list[tuple[str, str]]:
    """Literal re-implementation of the three validity clauses plus the
    structural ones; returns sorted (kind, symbol) pairs, empty if valid."""
    tri = (OptionType.BOOL, OptionType.TRISTATE)
    env: dict[str, int] = {}
    for symbol, assignment in config.assignments.items():
        opt = space.options.get(symbol)
        if opt and opt.option_type in tri and isinstance(assignment.value, Tristate):
            env[symbol] = int(assignment.value)

    problems: set[tuple[str, str]] = set()
    domain_bad: set[str] = set()
    for symbol, assignment in config.assignments.items():
        opt = space.options[symbol]
        value = assignment.value
        if opt.option_type.is_container:
            problems.add(("constraint", symbol))
            domain_bad.add(symbol)
            continue
        bad = False
        if opt.option_type is OptionType.BOOL:
            bad = not isinstance(value, Tristate) or int(value) == 1
        elif opt.option_type is OptionType.TRISTATE:
            bad = not isinstance(value, Tristate)
        elif opt.option_type in (OptionType.INT, OptionType.HEX):
            bad = isinstance(value, bool) or not isinstance(value, int)
            if not bad and opt.range is not None:
                bad = not (opt.range[0] <= value <= opt.range[1])
        else:
            bad = not isinstance(value, str)
        if bad:
            problems.add(("domain", symbol))
            domain_bad.add(symbol)

    for symbol, assignment in config.assignments.items():
        if symbol in domain_bad:
            continue
        opt = space.options[symbol]
        value = assignment.value
        if value == _oracle_null(opt) or (
                isinstance(value, Tristate) and int(value) == 0):
            continue
        dep = 2 if opt.depends_on is None else _oracle_eval(opt.depends_on, env)
        if opt.option_type in tri:
            if dep < int(value):
                problems.add(("dependency", symbol))
        elif dep == 0:
            problems.add(("dependency", symbol))

    for symbol, assignment in config.assignments.items():
        opt = space.options[symbol]
        if opt.option_type not in tri or not isinstance(assignment.value, Tristate):
            continue
        if int(assignment.value) < 1:
            continue
        for sel in opt.selects:
            target = space.options.get(sel.target)
            if target is None or target.option_type not in tri:
                continue
            guard = 2 if sel.guard is None else _oracle_eval(sel.guard, env)
            if guard == 0:
                continue
            actual = config.assignments.get(sel.target)
            if actual is None:
                continue  # only assigned targets can conflict
            required = int(assignment.value)
            if target.option_type is OptionType.BOOL and required == 1:
                required = 2
            level = int(actual.value) if isinstance(actual.value, Tristate) else 0
            if level < required:
                problems.add(("select-conflict", sel.target))

    for group, members in space.choice_groups.items():
        enabled = [m for m in members
                   if (a := config.assignments.get(m)) is not None
                   and isinstance(a.value, Tristate) and int(a.value) == 2]
        if len(enabled) > 1:
            problems.add(("choice-exclusivity", group))

    return sorted(problems)


# --- random configuration spaces --------------------------------------------------------

@dataclass
class SpecOption:
    name: str
    kind: str  # bool | int | hex | string
    prompt: str = ""
    depends: str = ""
    selects: list[str] = field(default_factory=list)
    default: str = ""
    range: tuple[int, int] | None = None
    help: str = ""


@dataclass
class SpaceSpec:
    options: list[SpecOption] = field(default_factory=list)
    choice: list[str] = field(default_factory=list)  # member names
    choice_default: str = ""

    def names(self) -> list[str]:
        return [o.name for o in self.options] + list(self.choice)


def render_spec(spec: SpaceSpec) -> str:
    lines: list[str] = []
    for opt in spec.options:
        lines.append(f"config {opt.name}")
        prompt = f' "{opt.prompt}"' if opt.prompt else ""
        lines.append(f"\t{opt.kind}{prompt}")
        if opt.depends:
            lines.append(f"\tdepends on {opt.depends}")
        for target in opt.selects:
            lines.append(f"\tselect {target}")
        if opt.range:
            lines.append(f"\trange {opt.range[0]} {opt.range[1]}")
        if opt.default:
            lines.append(f"\tdefault {opt.default}")
        if opt.help:
            lines.append("\thelp")
            lines.append(f"\t  {opt.help}")
        lines.append("")
    if spec.choice:
        lines.append("choice")
        lines.append('\tprompt "Generated group"')
        if spec.choice_default:
            lines.append(f"\tdefault {spec.choice_default}")
        lines.append("")
        for member in spec.choice:
            lines.append(f"config {member}")
            lines.append(f'\tbool "{member.lower()}"')
            lines.append("")
        lines.append("endchoice")
        lines.append("")
    return "\n".join(lines)


def gen_bool_spec(rng, n: int, with_choice: bool = False,
                  safe_selects: bool = True) -> SpaceSpec:
    """Random all-bool space: sparse dependencies on earlier options, a few
    selects, guarded defaults, optionally a two-member choice group."""
    spec = SpaceSpec()
    n_members = 2 if with_choice and n >= 4 else 0
    names = [f"OPT{i:02d}" for i in range(n - n_members)]
    dep_free = []
    for i, name in enumerate(names):
        opt = SpecOption(name=name, kind="bool", prompt=f"option {i}")
        roll = rng.random()
        if i > 0 and roll < 0.45:
            a = rng.choice(names[:i])
            if i > 1 and rng.random() < 0.4:
                b = rng.choice(names[:i])
                op = rng.choice(["&&", "||"])
                neg = "!" if rng.random() < 0.3 else ""
                opt.depends = f"{a} {op} {neg}{b}"
            else:
                opt.depends = a
        else:
            dep_free.append(name)
        if i > 0 and rng.random() < 0.3:
            pool = dep_free if safe_selects else names[:i]
            pool = [p for p in pool if p != name]
            if pool:
                opt.selects.append(rng.choice(pool))
        roll = rng.random()
        if roll < 0.4:
            opt.default = "y"
        elif roll < 0.5 and i > 0:
            opt.default = f"y if {rng.choice(names[:i])}"
        spec.options.append(opt)
    if n_members:
        spec.choice = [f"CHC{i}" for i in range(n_members)]
        spec.choice_default = spec.choice[0]
    return spec


def gen_rich_spec(rng, n_bools: int = 8) -> SpaceSpec:
    """Bool core plus one int, one hex, and one string option."""
    spec = gen_bool_spec(rng, n_bools, with_choice=True, safe_selects=True)
    lo = rng.randint(0, 4)
    hi = lo + rng.randint(2, 12)
    spec.options.append(SpecOption(
        name="TUNE_LEVEL", kind="int", prompt="tuning level",
        range=(lo, hi), default=str(rng.randint(lo, hi))))
    spec.options.append(SpecOption(
        name="BUF_SIZE", kind="hex", prompt="buffer size",
        range=(0x10, 0x100), default=hex(rng.randrange(0x10, 0x101, 0x10))))
    spec.options.append(SpecOption(
        name="NODE_LABEL", kind="string", prompt="node label", default='"n0"'))
    return spec


def parse_spec(spec: SpaceSpec, tmp_path) -> ConfigSpace:
    from byos.kconfig.parser import parse_kconfig_tree

    root = tmp_path / "Kconfig"
    root.write_text(render_spec(spec), encoding="utf-8")
    return parse_kconfig_tree(str(root))


def all_bool_assignments(names: list[str]):
    """Every y/n combination over the named options."""
    for values in itertools.product((Tristate.N, Tristate.Y), repeat=len(names)):
        yield dict(zip(names, values))


def make_candidates(symbols: list[str], scores: dict[str, float] | None = None):
    """CandidateSet with synthetic single-hop witnesses (for engine tests)."""
    from byos.reasoner import CandidateSet

    witness = {}
    for i, symbol in enumerate(symbols):
        score = (scores or {}).get(symbol, 0.9 - 0.01 * i)
        witness[symbol] = ReasoningPath(
            start="seed", steps=(("related_to", symbol),), score=score)
    return CandidateSet(options=set(symbols), witness=witness)
