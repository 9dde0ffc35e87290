"""Configuration generation: validity checking, default resolution,
type-specific value inference, performance-aware refinement, emission.

The generation loop only ever commits assignments whose fully resolved
configuration passes the validity check, so the returned configuration is
valid by construction; an inferred value that breaks a constraint is
pruned and the option falls back to its resolved default.
"""

from __future__ import annotations

import logging
import re
import shlex
import subprocess
import tempfile
from dataclasses import dataclass, field, replace
from typing import Protocol

from .errors import (
    InfeasibleCandidate,
    InvalidConfig,
    NonConvergence,
    UnknownSymbol,
)
from .kconfig.expr import Tristate, evaluate_expr
from .kconfig.model import ConfigOption, ConfigSpace, OptionType
from .llm import UsageLedger
from .odkg import OdKg
from .prompts import TemplateSet
from .reasoner import CandidateSet, TuningObjective

logger = logging.getLogger(__name__)

EFFECT_INCREASE = "increase"
EFFECT_DECREASE = "decrease"
EFFECT_UNKNOWN = "cannot determine"


@dataclass(frozen=True)
class Assignment:
    symbol: str
    value: object  # Tristate | int | str, matching the option's type
    origin: str  # inferred | default | select-forced | refined | user


@dataclass(frozen=True)
class Violation:
    kind: str  # domain | dependency | constraint | choice-exclusivity | select-conflict
    symbol: str
    detail: str


@dataclass
class ValidityReport:
    valid: bool
    violations: list[Violation] = field(default_factory=list)

    def summary(self) -> str:
        if self.valid:
            return "valid"
        return "; ".join(f"{v.kind} on {v.symbol}: {v.detail}" for v in self.violations)


@dataclass
class KernelConfiguration:
    assignments: dict[str, Assignment] = field(default_factory=dict)
    space_ref: str = ""
    validity: ValidityReport | None = None

    def value_of(self, symbol: str):
        a = self.assignments.get(symbol)
        return a.value if a else None


class PerformanceScorer(Protocol):
    def score(self, config: KernelConfiguration, objective: TuningObjective) -> float: ...


@dataclass
class TraceEvent:
    option: str
    prompt_kind: str  # Bool | Choice | Menu | Value
    proposed: str
    outcome: str  # accepted | pruned
    reason: str


@dataclass
class GenerationTrace:
    events: list[TraceEvent] = field(default_factory=list)
    ledger: UsageLedger = field(default_factory=UsageLedger)

    def lines(self) -> list[str]:
        out = [
            f"{e.outcome}\t{e.option}\t{e.prompt_kind}\t{e.proposed}\t{e.reason}"
            for e in self.events
        ]
        out.extend(self.ledger.lines())
        return out


@dataclass
class GenerationSettings:
    bool_batch_size: int = 9
    tristate_increase_value: Tristate = Tristate.Y
    step2_enabled: bool = True

    def __post_init__(self) -> None:
        if not 1 <= self.bool_batch_size <= 9:
            raise ValueError("bool_batch_size must be within 1..9")


# --- small helpers -------------------------------------------------------------

def null_value(opt: ConfigOption):
    """The value an untouched option carries: n, zero (pulled into the
    declared range), or the empty string."""
    if opt.option_type.is_tristate_kind:
        return Tristate.N
    if opt.option_type in (OptionType.INT, OptionType.HEX):
        if opt.range is not None:
            lo, hi = opt.range
            return min(max(0, lo), hi)
        return 0
    return ""


def tristate_env(assignments: dict[str, Assignment],
                 space: ConfigSpace) -> dict[str, Tristate]:
    """Dependency-evaluation environment: tristate options carry their
    value, everything else (value options, containers, externals) is n."""
    env: dict[str, Tristate] = {}
    for symbol, assignment in assignments.items():
        opt = space.options.get(symbol)
        if opt is not None and opt.option_type.is_tristate_kind \
                and isinstance(assignment.value, Tristate):
            env[symbol] = assignment.value
    return env


def _dep_value(opt: ConfigOption, env: dict[str, Tristate]) -> Tristate:
    if opt.depends_on is None:
        return Tristate.Y
    return evaluate_expr(opt.depends_on, env)


# --- validity --------------------------------------------------------------------

def check_validity(config: KernelConfiguration, space: ConfigSpace) -> ValidityReport:
    """Check domain membership, dependency satisfaction, select
    propagation, and choice exclusivity; report every violation found."""
    for symbol in config.assignments:
        if symbol not in space.options:
            raise UnknownSymbol(symbol)
    env = tristate_env(config.assignments, space)
    violations: list[Violation] = []

    for symbol in sorted(config.assignments):
        assignment = config.assignments[symbol]
        opt = space.options[symbol]
        value = assignment.value
        if opt.option_type.is_container:
            violations.append(Violation("constraint", symbol,
                                        "container options carry no value"))
            continue
        ok, detail = _check_domain(opt, value)
        if not ok:
            violations.append(Violation("domain", symbol, detail))
            continue
        if value == null_value(opt):
            continue  # untouched level never needs its dependencies
        dep_val = _dep_value(opt, env)
        if opt.option_type.is_tristate_kind:
            if dep_val < value:
                violations.append(Violation(
                    "dependency", symbol,
                    f"set to {value} but dependencies evaluate to {dep_val}"))
        elif dep_val == Tristate.N:
            violations.append(Violation(
                "dependency", symbol, "value set while dependencies evaluate to n"))

    for symbol in sorted(config.assignments):
        assignment = config.assignments[symbol]
        opt = space.options[symbol]
        if not (opt.option_type.is_tristate_kind
                and isinstance(assignment.value, Tristate)
                and assignment.value >= Tristate.M):
            continue
        for sel in opt.selects:
            target = space.options.get(sel.target)
            if target is None or not target.option_type.is_tristate_kind:
                continue
            guard_val = Tristate.Y if sel.guard is None else evaluate_expr(sel.guard, env)
            if guard_val == Tristate.N:
                continue
            if sel.target not in config.assignments:
                continue  # unassigned targets are settled by default resolution
            required = assignment.value
            if target.option_type is OptionType.BOOL and required == Tristate.M:
                required = Tristate.Y  # booleans cannot hold m
            actual = config.value_of(sel.target)
            actual = actual if isinstance(actual, Tristate) else Tristate.N
            if actual < required:
                violations.append(Violation(
                    "select-conflict", sel.target,
                    f"selected to {required} by {symbol} but set to {actual}"))

    for group in sorted(space.choice_groups):
        members = space.choice_groups[group]
        enabled = [m for m in members
                   if isinstance(config.value_of(m), Tristate)
                   and config.value_of(m) == Tristate.Y]
        if len(enabled) > 1:
            violations.append(Violation(
                "choice-exclusivity", group,
                "multiple members enabled: " + ", ".join(sorted(enabled))))

    return ValidityReport(valid=not violations, violations=violations)


def _check_domain(opt: ConfigOption, value) -> tuple[bool, str]:
    kind = opt.option_type
    if kind is OptionType.BOOL:
        if not isinstance(value, Tristate) or value == Tristate.M:
            return False, f"bool option cannot hold {value!r}"
    elif kind is OptionType.TRISTATE:
        if not isinstance(value, Tristate):
            return False, f"tristate option cannot hold {value!r}"
    elif kind in (OptionType.INT, OptionType.HEX):
        if isinstance(value, bool) or not isinstance(value, int):
            return False, f"numeric option cannot hold {value!r}"
        if opt.range is not None:
            lo, hi = opt.range
            if not lo <= value <= hi:
                return False, f"{value} outside range {lo}..{hi}"
    elif kind is OptionType.STRING:
        if not isinstance(value, str):
            return False, f"string option cannot hold {value!r}"
    return True, ""


# --- default resolution ------------------------------------------------------------

def resolve_defaults(partial: KernelConfiguration,
                     space: ConfigSpace) -> KernelConfiguration:
    """Complete a partial configuration: guarded defaults, choice-group
    resolution, zero-fill, and select propagation, iterated to a fixpoint.

    Explicit assignments are never overwritten.  Raises NonConvergence if
    the guard/default interplay oscillates past the round bound.
    """
    base = dict(partial.assignments)
    for symbol in base:
        if symbol not in space.options:
            raise UnknownSymbol(symbol)
    env = tristate_env(base, space)
    previous: dict[str, object] | None = None
    full = base
    for _ in range(len(space.options) + 2):
        full = _fill(base, env, space)
        values = {s: a.value for s, a in full.items()}
        if values == previous:
            return KernelConfiguration(assignments=full,
                                       space_ref=space.kernel_version_label)
        previous = values
        env = tristate_env(full, space)
    last = {s: a.value for s, a in full.items()}
    oscillating = [s for s in last if previous is not None and previous.get(s) != last[s]]
    raise NonConvergence(oscillating or sorted(last))


def _resolve_default_value(opt: ConfigOption, env: dict[str, Tristate]):
    dep_val = _dep_value(opt, env)
    for default in opt.defaults:
        guard_val = Tristate.Y if default.guard is None \
            else evaluate_expr(default.guard, env)
        if guard_val == Tristate.N:
            continue
        if opt.option_type.is_tristate_kind:
            if default.expr is None:
                logger.warning("unusable default %r on %s", default.raw, opt.name)
                continue
            value = min(evaluate_expr(default.expr, env), dep_val)
            if opt.option_type is OptionType.BOOL and value == Tristate.M:
                value = Tristate.Y
            return value
        if dep_val == Tristate.N:
            return None  # defaults of unavailable value options never apply
        if opt.option_type in (OptionType.INT, OptionType.HEX):
            try:
                return int(default.raw, 0)
            except ValueError:
                logger.warning("non-numeric default %r on %s", default.raw, opt.name)
                continue
        return default.raw
    return None


def _fill(base: dict[str, Assignment], env: dict[str, Tristate],
          space: ConfigSpace) -> dict[str, Assignment]:
    out = dict(base)
    choice_members = {m for members in space.choice_groups.values() for m in members}

    for name in sorted(space.options):
        opt = space.options[name]
        if opt.option_type.is_container or name in out or name in choice_members:
            continue
        value = _resolve_default_value(opt, env)
        if value is None:
            value = null_value(opt)
        out[name] = Assignment(name, value, "default")

    for group in sorted(space.choice_groups):
        members = space.choice_groups[group]
        gopt = space.options[group]
        available = _dep_value(gopt, env) != Tristate.N
        explicit_y = [m for m in members
                      if m in base and base[m].value == Tristate.Y]
        winner: str | None = None
        if explicit_y:
            winner = explicit_y[0]
        elif available:
            eligible = [m for m in members
                        if (m not in base or base[m].value == Tristate.Y)
                        and _dep_value(space.options[m], env) != Tristate.N]
            for default in gopt.defaults:
                guard_val = Tristate.Y if default.guard is None \
                    else evaluate_expr(default.guard, env)
                if guard_val != Tristate.N and default.raw in eligible:
                    winner = default.raw
                    break
            if winner is None and eligible:
                winner = eligible[0]  # declaration order, standard precedence
        for member in members:
            if member in out:
                continue
            value = Tristate.Y if member == winner else Tristate.N
            out[member] = Assignment(member, value, "default")

    for _ in range(len(space.options) + 1):
        changed = False
        sel_env = tristate_env(out, space)
        for name in sorted(space.options):
            head = out.get(name)
            if head is None or not isinstance(head.value, Tristate) \
                    or head.value < Tristate.M:
                continue
            for sel in space.options[name].selects:
                target = space.options.get(sel.target)
                if target is None or not target.option_type.is_tristate_kind \
                        or sel.target in base:
                    continue
                guard_val = Tristate.Y if sel.guard is None \
                    else evaluate_expr(sel.guard, sel_env)
                if guard_val == Tristate.N:
                    continue
                required = head.value
                if target.option_type is OptionType.BOOL and required == Tristate.M:
                    required = Tristate.Y
                current = out.get(sel.target)
                current_val = current.value if current \
                    and isinstance(current.value, Tristate) else Tristate.N
                if current_val < required:
                    out[sel.target] = Assignment(sel.target, required, "select-forced")
                    changed = True
        if not changed:
            break
    return out


# --- type-specific inference --------------------------------------------------------

@dataclass
class GenerationContext:
    """Everything the prompts need: objective, aligned concepts, knowledge
    retrieval, and the current partial configuration."""

    objective: TuningObjective
    concept_labels: list[str]
    space: ConfigSpace
    kg: OdKg
    knowledge_block: str = "(none)"
    current: dict[str, Assignment] = field(default_factory=dict)

    def target_text(self) -> str:
        return self.objective.text

    def configs_block(self, symbols: list[str]) -> str:
        lines = []
        for symbol in symbols:
            opt = self.space.options[symbol]
            label = opt.prompt or " ".join((opt.help_text or "").split())
            lines.append(f"CONFIG_{symbol}: {label}" if label else f"CONFIG_{symbol}")
        return "\n".join(lines)

    def knowledge_text(self) -> str:
        parts = []
        if self.concept_labels:
            parts.append("Tuning concepts: " + ", ".join(self.concept_labels))
        parts.append(self.knowledge_block)
        if self.current:
            assigned = ", ".join(f"CONFIG_{s}={a.value}"
                                 for s, a in sorted(self.current.items()))
            parts.append(f"Current assignments: {assigned}")
        return "\n".join(parts)


_EFFECT_RE = re.compile(r"\b(increase|decrease|cannot[\s-]*determine|unknown)\b",
                        re.IGNORECASE)
_INT_RE = re.compile(r"[-+]?(?:0x[0-9a-fA-F]+|\d+)")


def infer_bool_batch(options: list[str], context: GenerationContext, client,
                     templates: TemplateSet | None = None) -> dict[str, str]:
    """Ask for the effect of enabling each option (at most nine at once).

    Options whose line cannot be parsed fall back to "cannot determine".
    """
    if not 1 <= len(options) <= 9:
        raise ValueError("bool batches hold between 1 and 9 options")
    templates = templates or TemplateSet()
    prompt = templates.render(
        "bool",
        TARGET=context.target_text(),
        KNOWLEDGE=context.knowledge_text(),
        CONFIGS=context.configs_block(options),
    )
    response = client.complete(prompt)
    effects: dict[str, str] = {}
    for line in response.text.splitlines():
        upper = line.upper()
        match = _EFFECT_RE.search(line)
        if match is None:
            continue
        effect = match.group(1).lower()
        effect = EFFECT_UNKNOWN if effect.startswith(("cannot", "unknown")) else effect
        for symbol in options:
            if symbol in effects:
                continue
            if re.search(rf"\b(?:CONFIG_)?{re.escape(symbol)}\b", upper):
                effects[symbol] = effect
                break
    for symbol in options:
        if symbol not in effects:
            logger.warning("no parseable effect for %s; treating as undetermined",
                           symbol)
            effects[symbol] = EFFECT_UNKNOWN
    return effects


@dataclass
class Proposal:
    kind: str  # Choice | Menu | Value
    value: object  # member symbol | bool (explore) | literal value
    raw: str
    note: str = ""


def infer_choice(group: str, context: GenerationContext, client,
                 templates: TemplateSet | None = None) -> Proposal:
    """Pick one member of a choice group; a response naming a non-member is
    retried once with a corrective suffix, then falls back to the group
    default."""
    templates = templates or TemplateSet()
    members = context.space.choice_groups[group]
    prompt = templates.render(
        "choice",
        TARGET=context.target_text(),
        KNOWLEDGE=context.knowledge_text(),
        CONFIGS=context.configs_block(members),
    )
    raw = ""
    for attempt in range(2):
        attempt_prompt = prompt if attempt == 0 else (
            prompt + "\nThe previous answer was not a member of the group; "
                     "answer with exactly one symbol from the list.")
        response = client.complete(attempt_prompt)
        raw = response.text.strip()
        named = _first_symbol(raw, members)
        if named is not None:
            return Proposal("Choice", named, raw)
    fallback = _choice_default_member(group, context.space)
    return Proposal("Choice", fallback, raw,
                    note=f"response named no member; fell back to {fallback}")


def _first_symbol(text: str, members: list[str]) -> str | None:
    upper = text.upper()
    hits = []
    for member in members:
        m = re.search(rf"\b(?:CONFIG_)?{re.escape(member)}\b", upper)
        if m:
            hits.append((m.start(), member))
    return min(hits)[1] if hits else None


def _choice_default_member(group: str, space: ConfigSpace) -> str:
    gopt = space.options[group]
    members = space.choice_groups[group]
    for default in gopt.defaults:
        if default.raw in members:
            return default.raw
    return members[0]


def infer_menu(menu: str, context: GenerationContext, client,
               templates: TemplateSet | None = None) -> Proposal:
    """Explore-or-skip decision for a menu container."""
    templates = templates or TemplateSet()
    opt = context.space.options[menu]
    children = context.space.children_of(menu)
    directory = f"{opt.prompt or menu}\nSub-options:\n" + "\n".join(
        f"  CONFIG_{c}: {context.space.options[c].prompt or ''}".rstrip()
        for c in children)
    prompt = templates.render(
        "menu",
        TARGET=context.target_text(),
        KNOWLEDGE=context.knowledge_text(),
        DIRECTORIES=directory,
    )
    response = client.complete(prompt)
    raw = response.text.strip()
    lowered = raw.lower()
    explore = "irrelevant" not in lowered and "relevant" in lowered
    if "relevant" not in lowered:
        logger.warning("unparseable menu answer %r for %s; skipping", raw, menu)
    return Proposal("Menu", explore, raw)


def infer_value(option: str, context: GenerationContext, client,
                templates: TemplateSet | None = None) -> Proposal:
    """Propose a literal for an int/hex/string option, clamped into range."""
    templates = templates or TemplateSet()
    opt = context.space.options[option]
    kind = opt.option_type.value
    describe = f"CONFIG_{option}: {opt.prompt or ''} (type {kind}"
    if opt.range is not None:
        describe += f", range {opt.range[0]}..{opt.range[1]}"
    describe += ")"
    prompt = templates.render(
        "value",
        TARGET=context.target_text(),
        KNOWLEDGE=context.knowledge_text(),
        CONFIGS=describe,
    )
    response = client.complete(prompt)
    raw = response.text.strip()
    if opt.option_type is OptionType.STRING:
        line = raw.splitlines()[0].strip() if raw else ""
        if line and len(line) >= 2 and line[0] == line[-1] and line[0] in "\"'":
            line = line[1:-1]
        if not line:
            return Proposal("Value", None, raw, note="empty response")
        return Proposal("Value", line, raw)
    match = _INT_RE.search(raw)
    if not match:
        return Proposal("Value", None, raw, note="no numeric literal in response")
    value = int(match.group(), 0)
    note = ""
    if opt.range is not None:
        lo, hi = opt.range
        clamped = min(max(value, lo), hi)
        if clamped != value:
            note = f"{value} outside {lo}..{hi}; clamped to {clamped}"
            logger.info("clamped %s: %s", option, note)
            value = clamped
    return Proposal("Value", value, raw, note=note)


# --- generation ----------------------------------------------------------------------

def generate(kq: CandidateSet, space: ConfigSpace, kg: OdKg, concepts: set[str],
             client, scorer: PerformanceScorer | None = None, *,
             objective: TuningObjective | None = None,
             templates: TemplateSet | None = None,
             knowledge_block: str = "(none)",
             settings: GenerationSettings | None = None,
             ) -> tuple[KernelConfiguration, GenerationTrace]:
    """Assign every candidate option via type-specific inference, keeping
    only assignments that remain valid, then optionally refine each one
    against the performance scorer."""
    settings = settings or GenerationSettings()
    templates = templates or TemplateSet()
    for symbol in kq.options:
        if symbol not in space.options:
            raise UnknownSymbol(symbol)

    if objective is None:
        labels = sorted(kg.concept_entities[c].label for c in concepts
                        if c in kg.concept_entities)
        objective = TuningObjective(text="Optimize for: " + ", ".join(labels)
                                    if labels else "Optimize overall performance")
    concept_labels = sorted(kg.concept_entities[c].label for c in concepts
                            if c in kg.concept_entities)
    context = GenerationContext(
        objective=objective,
        concept_labels=concept_labels,
        space=space,
        kg=kg,
        knowledge_block=knowledge_block,
    )

    ledger_before = replace(client.ledger)
    trace = GenerationTrace()
    explicit: dict[str, Assignment] = {}
    accept_order: list[str] = []

    base = resolve_defaults(KernelConfiguration(), space)
    base_report = check_validity(base, space)
    if not base_report.valid:
        raise InfeasibleCandidate(
            "default-resolved configuration is already invalid: "
            + base_report.summary())

    def try_assign(symbol: str, value, origin: str = "inferred") -> bool:
        tentative = dict(explicit)
        tentative[symbol] = Assignment(symbol, value, origin)
        full = resolve_defaults(
            KernelConfiguration(assignments=tentative), space)
        report = check_validity(full, space)
        if report.valid:
            explicit[symbol] = tentative[symbol]
            accept_order.append(symbol)
            context.current = explicit
            return True
        return False

    queue: list[str] = kq.ordered()
    processed: set[str] = set()

    while queue:
        head = queue[0]
        head_opt = space.options[head]
        if head_opt.option_type.is_tristate_kind:
            batch = [s for s in queue
                     if space.options[s].option_type.is_tristate_kind]
            batch = batch[: settings.bool_batch_size]
            for symbol in batch:
                queue.remove(symbol)
            processed.update(batch)
            effects = infer_bool_batch(batch, context, client, templates)
            for symbol in batch:
                effect = effects[symbol]
                opt = space.options[symbol]
                if effect == EFFECT_INCREASE:
                    value = (settings.tristate_increase_value
                             if opt.option_type is OptionType.TRISTATE
                             else Tristate.Y)
                elif effect == EFFECT_DECREASE:
                    value = Tristate.N
                else:
                    trace.events.append(TraceEvent(
                        symbol, "Bool", effect, "accepted",
                        "effect undetermined; default kept"))
                    continue
                if try_assign(symbol, value):
                    trace.events.append(TraceEvent(
                        symbol, "Bool", effect, "accepted",
                        f"effect {effect} mapped to {value}"))
                else:
                    trace.events.append(TraceEvent(
                        symbol, "Bool", effect, "pruned",
                        f"{value} failed validity; default kept"))
            continue

        queue.pop(0)
        processed.add(head)
        if head_opt.option_type is OptionType.CHOICE:
            proposal = infer_choice(head, context, client, templates)
            member = proposal.value
            if try_assign(member, Tristate.Y):
                trace.events.append(TraceEvent(
                    head, "Choice", proposal.raw, "accepted",
                    (proposal.note + "; " if proposal.note else "")
                    + f"member {member} enabled"))
            else:
                trace.events.append(TraceEvent(
                    head, "Choice", proposal.raw, "pruned",
                    f"member {member} failed validity; default kept"))
        elif head_opt.option_type is OptionType.MENU:
            proposal = infer_menu(head, context, client, templates)
            if proposal.value:
                added = [c for c in space.children_of(head)
                         if c not in processed and c not in queue]
                queue.extend(added)
                trace.events.append(TraceEvent(
                    head, "Menu", proposal.raw, "accepted",
                    f"explored; queued {len(added)} children"))
            else:
                trace.events.append(TraceEvent(
                    head, "Menu", proposal.raw, "accepted", "skipped"))
        else:
            proposal = infer_value(head, context, client, templates)
            if proposal.value is None:
                trace.events.append(TraceEvent(
                    head, "Value", proposal.raw, "pruned",
                    (proposal.note or "unusable response") + "; default kept"))
            elif try_assign(head, proposal.value):
                note = f"; {proposal.note}" if proposal.note else ""
                trace.events.append(TraceEvent(
                    head, "Value", proposal.raw, "accepted",
                    f"value {proposal.value}{note}"))
            else:
                trace.events.append(TraceEvent(
                    head, "Value", proposal.raw, "pruned",
                    f"value {proposal.value} failed validity; default kept"))

    if scorer is not None and settings.step2_enabled:
        _refine(explicit, accept_order, space, scorer, objective, trace)

    final = resolve_defaults(KernelConfiguration(assignments=explicit), space)
    final.validity = check_validity(final, space)
    trace.ledger = _ledger_delta(ledger_before, client.ledger)
    return final, trace


def _ledger_delta(before: UsageLedger, after: UsageLedger) -> UsageLedger:
    return UsageLedger(
        api_calls=after.api_calls - before.api_calls,
        prompt_tokens=after.prompt_tokens - before.prompt_tokens,
        completion_tokens=after.completion_tokens - before.completion_tokens,
        wall_time=after.wall_time - before.wall_time,
    )


def _sweep_candidates(symbol: str, explicit: dict[str, Assignment],
                      space: ConfigSpace) -> list[object]:
    """Domain sample for refinement: all levels for tristates, range
    endpoints plus the resolved default for numerics, members for choice
    members, the current value for strings."""
    opt = space.options[symbol]
    current = explicit[symbol].value
    if opt.option_type is OptionType.BOOL:
        return [Tristate.Y, Tristate.N]
    if opt.option_type is OptionType.TRISTATE:
        return [Tristate.Y, Tristate.M, Tristate.N]
    if opt.option_type in (OptionType.INT, OptionType.HEX):
        without = {s: a for s, a in explicit.items() if s != symbol}
        resolved = resolve_defaults(
            KernelConfiguration(assignments=without), space)
        default = resolved.value_of(symbol)
        values = {current, default}
        if opt.range is not None:
            values.update(opt.range)
        return sorted(v for v in values if isinstance(v, int))
    return [current]


def _refine(explicit: dict[str, Assignment], accept_order: list[str],
            space: ConfigSpace, scorer: PerformanceScorer,
            objective: TuningObjective, trace: GenerationTrace) -> None:
    member_to_group = {m: g for g, ms in space.choice_groups.items() for m in ms}

    def score_of(assignments: dict[str, Assignment]) -> float | None:
        full = resolve_defaults(KernelConfiguration(assignments=assignments), space)
        report = check_validity(full, space)
        if not report.valid:
            return None
        full.validity = report
        return scorer.score(full, objective)

    for symbol in accept_order:
        if symbol not in explicit:
            continue
        current_value = explicit[symbol].value
        best_score = score_of(explicit)
        if best_score is None:
            continue
        best_value = current_value
        group = member_to_group.get(symbol)
        if group is not None:
            candidates = space.choice_groups[group]
            for member in candidates:
                if member == symbol:
                    continue
                tentative = {s: a for s, a in explicit.items()
                             if s not in candidates}
                tentative[member] = Assignment(member, Tristate.Y, "refined")
                candidate_score = score_of(tentative)
                if candidate_score is not None and candidate_score > best_score:
                    best_score = candidate_score
                    best_value = member
            if best_value != current_value and isinstance(best_value, str):
                for member in candidates:
                    explicit.pop(member, None)
                explicit[best_value] = Assignment(best_value, Tristate.Y, "refined")
                trace.events.append(TraceEvent(
                    group, "Choice", str(best_value), "accepted",
                    f"refined: {symbol} replaced by {best_value}"))
            continue
        for candidate in _sweep_candidates(symbol, explicit, space):
            if candidate == current_value:
                continue
            tentative = dict(explicit)
            tentative[symbol] = Assignment(symbol, candidate, "refined")
            candidate_score = score_of(tentative)
            if candidate_score is not None and candidate_score > best_score:
                best_score = candidate_score
                best_value = candidate
        if best_value != current_value:
            explicit[symbol] = Assignment(symbol, best_value, "refined")
            trace.events.append(TraceEvent(
                symbol, space.options[symbol].option_type.value.capitalize(),
                str(best_value), "accepted", "refined by scorer sweep"))


# --- emission -------------------------------------------------------------------------

def emit_dotconfig(config: KernelConfiguration,
                   space: ConfigSpace | None = None) -> str:
    """Render assignments as .config lines, sorted by symbol.

    Only configurations carrying a passing validity report may be emitted.
    Hex options render in 0x form when the space is supplied to identify
    them.
    """
    if config.validity is None or not config.validity.valid:
        raise InvalidConfig("refusing to emit an unvalidated or invalid configuration")
    lines = []
    for symbol in sorted(config.assignments):
        assignment = config.assignments[symbol]
        value = assignment.value
        opt = space.options.get(symbol) if space else None
        if isinstance(value, Tristate):
            if value == Tristate.N:
                lines.append(f"# CONFIG_{symbol} is not set")
            else:
                lines.append(f"CONFIG_{symbol}={value}")
        elif isinstance(value, int):
            if opt is not None and opt.option_type is OptionType.HEX:
                lines.append(f"CONFIG_{symbol}=0x{value:x}")
            else:
                lines.append(f"CONFIG_{symbol}={value}")
        else:
            escaped = str(value).replace("\\", "\\\\").replace('"', '\\"')
            lines.append(f'CONFIG_{symbol}="{escaped}"')
    return "\n".join(lines) + "\n"


_SET_RE = re.compile(r"^CONFIG_([A-Za-z0-9_]+)=(.*)$")
_UNSET_RE = re.compile(r"^# CONFIG_([A-Za-z0-9_]+) is not set$")


def parse_dotconfig(text: str, space: ConfigSpace) -> KernelConfiguration:
    """Read .config lines back into assignments (values only, origin user)."""
    assignments: dict[str, Assignment] = {}
    for raw_line in text.splitlines():
        line = raw_line.strip()
        unset = _UNSET_RE.match(line)
        if unset:
            assignments[unset.group(1)] = Assignment(unset.group(1), Tristate.N, "user")
            continue
        matched = _SET_RE.match(line)
        if not matched:
            continue
        symbol, raw_value = matched.group(1), matched.group(2).strip()
        opt = space.options.get(symbol)
        value: object
        if raw_value in ("y", "m", "n") and (opt is None
                                             or opt.option_type.is_tristate_kind):
            value = Tristate.from_text(raw_value)
        elif raw_value.startswith('"'):
            value = raw_value[1:-1].replace('\\"', '"').replace("\\\\", "\\")
        else:
            try:
                value = int(raw_value, 0)
            except ValueError:
                value = raw_value
        assignments[symbol] = Assignment(symbol, value, "user")
    return KernelConfiguration(assignments=assignments,
                               space_ref=space.kernel_version_label)


# --- scorers ---------------------------------------------------------------------------

@dataclass
class SyntheticScorer:
    """Weighted agreement with a declared target assignment map; pure."""

    targets: dict[str, tuple[object, float]]

    def score(self, config: KernelConfiguration,
              objective: TuningObjective) -> float:
        total = 0.0
        for symbol, (wanted, weight) in self.targets.items():
            if config.value_of(symbol) == wanted:
                total += weight
        return total


@dataclass
class ExternalCommandScorer:
    """Runs a configured executable against the emitted .config and reads
    one real number from its stdout.  Explicitly non-deterministic."""

    command: str
    timeout_s: float = 60.0
    pattern: str = r"[-+]?\d+(?:\.\d+)?"

    def score(self, config: KernelConfiguration,
              objective: TuningObjective) -> float:
        text = emit_dotconfig(config)
        with tempfile.NamedTemporaryFile("w", suffix=".config",
                                         delete=False) as fh:
            fh.write(text)
            path = fh.name
        proc = subprocess.run(shlex.split(self.command) + [path],
                              capture_output=True, text=True,
                              timeout=self.timeout_s, check=False)
        match = re.search(self.pattern, proc.stdout)
        if proc.returncode != 0 or match is None:
            raise InvalidConfig(
                f"scorer command failed (rc={proc.returncode}) or emitted no number")
        return float(match.group())
