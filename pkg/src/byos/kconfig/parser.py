"""Line-oriented parser for the supported Kconfig grammar subset.

Supported constructs: config, menuconfig, choice/endchoice, menu/endmenu,
if/endif, source, depends on, select, imply, default, def_bool,
def_tristate, range, help, prompt, and the five type keywords.  Anything
else raises UnsupportedConstruct (known Kconfig grammar we exclude) or
KconfigSyntaxError (malformed input).
"""

from __future__ import annotations

import os
import re
from dataclasses import dataclass, field

from ..errors import KconfigSyntaxError, UnsupportedConstruct
from .expr import DependencyExpr, conjoin, expr_symbols, parse_expr
from .model import (
    ConfigOption,
    ConfigSpace,
    Default,
    OptionType,
    Selection,
    extract_instance_triples,
)

_TYPE_KEYWORDS = {
    "bool": OptionType.BOOL,
    "tristate": OptionType.TRISTATE,
    "int": OptionType.INT,
    "hex": OptionType.HEX,
    "string": OptionType.STRING,
}

# Recognized upstream grammar we deliberately do not model.
_UNSUPPORTED_KEYWORDS = {"mainmenu", "comment", "option", "optional", "visible"}

_ENV_REF_RE = re.compile(r"\$\(([A-Za-z0-9_]+)\)")
_NUM_RE = re.compile(r"^-?(0x[0-9a-fA-F]+|\d+)$")


@dataclass
class _Frame:
    """One entry of the scope stack: an if block or an open container."""

    kind: str  # "if" | "menu" | "choice"
    conditions: list[DependencyExpr] = field(default_factory=list)
    container: str | None = None
    members: list[str] = field(default_factory=list)  # choice members


@dataclass
class _Line:
    filename: str
    number: int
    text: str


def _read_lines(path: str, rel_name: str) -> list[_Line]:
    """Physical lines with backslash continuations merged.

    Input is decoded as UTF-8; stray Latin-1 bytes are replaced rather
    than rejected.
    """
    with open(path, "rb") as fh:
        raw = fh.read().decode("utf-8", errors="replace")
    lines: list[_Line] = []
    pending = ""
    pending_start = 0
    for number, text in enumerate(raw.split("\n"), start=1):
        if text.endswith("\\"):
            if not pending:
                pending_start = number
            pending += text[:-1] + " "
            continue
        if pending:
            lines.append(_Line(rel_name, pending_start, pending + text))
            pending = ""
        else:
            lines.append(_Line(rel_name, number, text))
    if pending:
        lines.append(_Line(rel_name, pending_start, pending))
    return lines


def _strip_comment(text: str) -> str:
    out = []
    quote: str | None = None
    i = 0
    while i < len(text):
        ch = text[i]
        if quote:
            if ch == "\\" and i + 1 < len(text):
                out.append(text[i:i + 2])
                i += 2
                continue
            if ch == quote:
                quote = None
        elif ch in ('"', "'"):
            quote = ch
        elif ch == "#":
            break
        out.append(ch)
        i += 1
    return "".join(out)


def _split_if_suffix(text: str) -> tuple[str, str | None]:
    """Split ``VALUE if GUARD`` at the top-level lowercase ``if`` token."""
    depth = 0
    quote: str | None = None
    tokens = list(re.finditer(r"\S+", text))
    for m in tokens:
        tok = m.group()
        if quote is None and depth == 0 and tok == "if":
            return text[: m.start()].strip(), text[m.end():].strip()
        for ch in tok:
            if quote:
                if ch == quote:
                    quote = None
            elif ch in ('"', "'"):
                quote = ch
            elif ch == "(":
                depth += 1
            elif ch == ")":
                depth -= 1
    return text.strip(), None


def _unquote(text: str, filename: str, line: int) -> str:
    text = text.strip()
    if len(text) >= 2 and text[0] == text[-1] and text[0] in ('"', "'"):
        return text[1:-1].replace('\\"', '"').replace("\\'", "'")
    raise KconfigSyntaxError(f"expected quoted string, got {text!r}", filename, line)


def _slug(text: str) -> str:
    slug = re.sub(r"[^A-Za-z0-9]+", "_", text).strip("_").upper()
    return slug or "UNNAMED"


class _TreeParser:
    def __init__(self, root_file: str, include_env: dict[str, str] | None,
                 version_label: str):
        self.root_file = os.path.abspath(root_file)
        self.root_dir = os.path.dirname(self.root_file)
        self.env = dict(include_env or {})
        self.space = ConfigSpace(kernel_version_label=version_label)
        self.frames: list[_Frame] = []
        self.current: ConfigOption | None = None
        self.current_is_new = True
        self.include_stack: list[str] = []
        self.lines: list[_Line] = []
        self.pos = 0

    # -- scope helpers ---------------------------------------------------

    def scope_condition(self) -> DependencyExpr | None:
        parts: list[DependencyExpr] = []
        for frame in self.frames:
            parts.extend(frame.conditions)
        return conjoin(*parts)

    def enclosing_container(self) -> _Frame | None:
        for frame in reversed(self.frames):
            if frame.kind in ("menu", "choice"):
                return frame
        return None

    def fresh_name(self, prefix: str, hint: str) -> str:
        base = f"{prefix}_{_slug(hint)}" if hint else prefix
        name = base
        serial = 1
        while name in self.space.options:
            serial += 1
            name = f"{base}_{serial}"
        return name

    # -- file plumbing ----------------------------------------------------

    def rel_name(self, path: str) -> str:
        return os.path.relpath(os.path.abspath(path), self.root_dir)

    def parse(self) -> ConfigSpace:
        self.ingest_file(self.root_file)
        self.run()
        self.finalize()
        return self.space

    def ingest_file(self, path: str) -> None:
        apath = os.path.abspath(path)
        if apath in self.include_stack:
            raise KconfigSyntaxError(f"circular source of {self.rel_name(apath)}",
                                     self.rel_name(apath), 0)
        if not os.path.exists(apath):
            raise FileNotFoundError(apath)
        self.include_stack.append(apath)
        new_lines = _read_lines(apath, self.rel_name(apath))
        sentinel = _Line(self.rel_name(apath), 0, "\0endsource")
        self.lines[self.pos:self.pos] = new_lines + [sentinel]

    # -- main loop ----------------------------------------------------------

    def run(self) -> None:
        while self.pos < len(self.lines):
            line = self.lines[self.pos]
            self.pos += 1
            if line.text == "\0endsource":
                self.include_stack.pop()
                continue
            stripped = _strip_comment(line.text).strip()
            if not stripped:
                continue
            keyword, _, rest = stripped.partition(" ")
            rest = rest.strip()
            self.dispatch(keyword, rest, line)

    def dispatch(self, keyword: str, rest: str, line: _Line) -> None:
        fn, ln = line.filename, line.number
        if keyword in ("config", "menuconfig"):
            self.begin_config(rest, fn, ln)
        elif keyword == "choice":
            self.begin_choice(rest, fn, ln)
        elif keyword == "endchoice":
            self.end_frame("choice", fn, ln)
        elif keyword == "menu":
            self.begin_menu(rest, fn, ln)
        elif keyword == "endmenu":
            self.end_frame("menu", fn, ln)
        elif keyword == "if":
            self.current = None
            self.frames.append(_Frame("if", conditions=[parse_expr(rest, fn, ln)]))
        elif keyword == "endif":
            self.end_frame("if", fn, ln)
        elif keyword == "source":
            self.current = None
            self.handle_source(rest, fn, ln)
        elif keyword in _TYPE_KEYWORDS:
            self.attr_type(keyword, rest, fn, ln)
        elif keyword in ("def_bool", "def_tristate"):
            self.attr_def_type(keyword, rest, fn, ln)
        elif keyword == "prompt":
            self.attr_prompt(rest, fn, ln)
        elif keyword == "default":
            self.attr_default(rest, fn, ln)
        elif keyword == "depends":
            if not rest.startswith("on "):
                raise KconfigSyntaxError("expected 'depends on'", fn, ln)
            self.attr_depends(rest[3:].strip(), fn, ln)
        elif keyword in ("select", "imply"):
            self.attr_selection(keyword, rest, fn, ln)
        elif keyword == "range":
            self.attr_range(rest, fn, ln)
        elif keyword == "help":
            self.attr_help(fn, ln)
        elif keyword in _UNSUPPORTED_KEYWORDS:
            construct = f"{keyword} {rest.split(' ')[0]}".strip() if keyword in ("visible", "option") else keyword
            raise UnsupportedConstruct(construct, fn, ln)
        else:
            raise KconfigSyntaxError(f"unknown keyword {keyword!r}", fn, ln)

    # -- block starts -------------------------------------------------------

    def begin_config(self, rest: str, fn: str, ln: int) -> None:
        name = rest.strip()
        if not re.fullmatch(r"[A-Za-z0-9_]+", name or ""):
            raise KconfigSyntaxError(f"bad config symbol {rest!r}", fn, ln)
        name = name.upper()
        container = self.enclosing_container()
        if name in self.space.options:
            # Re-declaration of a split symbol: merge into the earlier node.
            self.current = self.space.options[name]
            self.current_is_new = False
        else:
            self.current = ConfigOption(
                name=name,
                option_type=None,  # type: ignore[arg-type] -- set by a type line
                parent=container.container if container else None,
                source_file=fn,
                source_line=ln,
            )
            self.current_is_new = True
            self.space.options[name] = self.current
        scope = self.scope_condition()
        if scope is not None:
            self.current.depends_on = conjoin(self.current.depends_on, scope)
        if container and container.kind == "choice" and name not in container.members:
            container.members.append(name)
            self.space.choice_groups[container.container].append(name)

    def begin_choice(self, rest: str, fn: str, ln: int) -> None:
        if rest:
            raise UnsupportedConstruct("named choice block", fn, ln)
        name = self.fresh_name("CHOICE", self.peek_prompt_hint())
        node = ConfigOption(
            name=name,
            option_type=OptionType.CHOICE,
            parent=(self.enclosing_container() or _Frame("menu")).container,
            source_file=fn,
            source_line=ln,
            depends_on=self.scope_condition(),
        )
        self.space.options[name] = node
        self.space.choice_groups[name] = []
        self.frames.append(_Frame("choice", container=name))
        self.current = node
        self.current_is_new = True

    def begin_menu(self, rest: str, fn: str, ln: int) -> None:
        title = _unquote(rest, fn, ln)
        name = self.fresh_name("MENU", title)
        node = ConfigOption(
            name=name,
            option_type=OptionType.MENU,
            prompt=title,
            parent=(self.enclosing_container() or _Frame("menu")).container,
            source_file=fn,
            source_line=ln,
            depends_on=self.scope_condition(),
        )
        self.space.options[name] = node
        self.frames.append(_Frame("menu", container=name))
        self.current = node
        self.current_is_new = True

    def peek_prompt_hint(self) -> str:
        """Look ahead for the choice's prompt line so its synthesized name
        is readable; purely cosmetic, no state changes."""
        for line in self.lines[self.pos:self.pos + 8]:
            stripped = _strip_comment(line.text).strip()
            if stripped.startswith("prompt "):
                try:
                    return _unquote(_split_if_suffix(stripped[7:])[0],
                                    line.filename, line.number)
                except KconfigSyntaxError:
                    return ""
            if stripped.split(" ", 1)[0] in ("config", "menuconfig", "endchoice"):
                break
        return ""

    def end_frame(self, kind: str, fn: str, ln: int) -> None:
        if not self.frames or self.frames[-1].kind != kind:
            raise KconfigSyntaxError(f"unbalanced end{kind}", fn, ln)
        self.frames.pop()
        self.current = None

    def handle_source(self, rest: str, fn: str, ln: int) -> None:
        path = _unquote(rest, fn, ln)

        def substitute(m: re.Match) -> str:
            var = m.group(1)
            if var not in self.env:
                raise UnsupportedConstruct(f"preprocessor macro $({var})", fn, ln)
            return self.env[var]

        path = _ENV_REF_RE.sub(substitute, path)
        if "$" in path:
            raise UnsupportedConstruct("preprocessor macro in source path", fn, ln)
        full = os.path.join(self.root_dir, path)
        if not os.path.exists(full):
            raise FileNotFoundError(full)
        self.ingest_file(full)

    # -- attributes -----------------------------------------------------------

    def need_current(self, fn: str, ln: int) -> ConfigOption:
        if self.current is None:
            raise KconfigSyntaxError("attribute outside any block", fn, ln)
        return self.current

    def attr_type(self, keyword: str, rest: str, fn: str, ln: int) -> None:
        opt = self.need_current(fn, ln)
        if opt.option_type is OptionType.CHOICE:
            return  # members declare their own types; the group line is cosmetic
        if opt.option_type is OptionType.MENU:
            raise KconfigSyntaxError("type line inside menu block", fn, ln)
        new_type = _TYPE_KEYWORDS[keyword]
        if opt.option_type is not None and opt.option_type is not new_type:
            raise KconfigSyntaxError(
                f"type conflict for {opt.name}: {opt.option_type.value} vs {keyword}",
                fn, ln)
        opt.option_type = new_type
        if rest:
            text, _guard = _split_if_suffix(rest)  # prompt visibility is not modeled
            if text:
                prompt = _unquote(text, fn, ln)
                if opt.prompt is None:
                    opt.prompt = prompt

    def attr_def_type(self, keyword: str, rest: str, fn: str, ln: int) -> None:
        # def_bool/def_tristate are sugar for a type line plus a default.
        opt = self.need_current(fn, ln)
        base = "bool" if keyword == "def_bool" else "tristate"
        new_type = _TYPE_KEYWORDS[base]
        if opt.option_type is not None and opt.option_type is not new_type:
            raise KconfigSyntaxError(
                f"type conflict for {opt.name}: {opt.option_type.value} vs {keyword}",
                fn, ln)
        opt.option_type = new_type
        self.attr_default(rest, fn, ln)

    def attr_prompt(self, rest: str, fn: str, ln: int) -> None:
        opt = self.need_current(fn, ln)
        text, _guard = _split_if_suffix(rest)
        prompt = _unquote(text, fn, ln)
        if opt.prompt is None:
            opt.prompt = prompt

    def attr_default(self, rest: str, fn: str, ln: int) -> None:
        opt = self.need_current(fn, ln)
        if opt.option_type is OptionType.MENU:
            raise KconfigSyntaxError("default inside menu block", fn, ln)
        value_text, guard_text = _split_if_suffix(rest)
        if not value_text:
            raise KconfigSyntaxError("default without a value", fn, ln)
        guard = parse_expr(guard_text, fn, ln) if guard_text else None
        expr: DependencyExpr | None
        if value_text.startswith(('"', "'")):
            expr = None
            raw = _unquote(value_text, fn, ln)
        else:
            raw = value_text
            if _NUM_RE.match(value_text):
                expr = None
            else:
                try:
                    expr = parse_expr(value_text, fn, ln)
                except KconfigSyntaxError:
                    expr = None
        opt.defaults.append(Default(raw=raw, expr=expr, guard=guard))

    def attr_depends(self, rest: str, fn: str, ln: int) -> None:
        opt = self.need_current(fn, ln)
        expr = parse_expr(rest, fn, ln)
        opt.depends_on = conjoin(opt.depends_on, expr)
        if self.frames and self.frames[-1].container == opt.name:
            # Container's own dependency also scopes everything inside it.
            self.frames[-1].conditions.append(expr)

    def attr_selection(self, keyword: str, rest: str, fn: str, ln: int) -> None:
        opt = self.need_current(fn, ln)
        target_text, guard_text = _split_if_suffix(rest)
        if not re.fullmatch(r"[A-Za-z0-9_]+", target_text or ""):
            raise KconfigSyntaxError(f"bad {keyword} target {target_text!r}", fn, ln)
        guard = parse_expr(guard_text, fn, ln) if guard_text else None
        entry = Selection(target=target_text.upper(), guard=guard)
        if keyword == "select":
            opt.selects.append(entry)
        else:
            opt.implies.append(entry)

    def attr_range(self, rest: str, fn: str, ln: int) -> None:
        opt = self.need_current(fn, ln)
        bounds_text, _guard = _split_if_suffix(rest)
        parts = bounds_text.split()
        if len(parts) != 2:
            raise KconfigSyntaxError(f"range needs two bounds, got {rest!r}", fn, ln)
        values = []
        for part in parts:
            if not _NUM_RE.match(part):
                raise UnsupportedConstruct(f"symbolic range bound {part!r}", fn, ln)
            values.append(int(part, 0))
        if values[0] > values[1]:
            raise KconfigSyntaxError("range min exceeds max", fn, ln)
        if opt.range is None:  # first declaration wins
            opt.range = (values[0], values[1])

    def attr_help(self, fn: str, ln: int) -> None:
        opt = self.need_current(fn, ln)
        body: list[str] = []
        base_indent: int | None = None
        while self.pos < len(self.lines):
            line = self.lines[self.pos]
            if line.text == "\0endsource":
                break
            expanded = line.text.expandtabs(8)
            if not expanded.strip():
                if base_indent is not None:
                    body.append("")
                self.pos += 1
                continue
            indent = len(expanded) - len(expanded.lstrip(" "))
            if base_indent is None:
                base_indent = indent
            if indent < base_indent:
                break
            body.append(expanded[base_indent:].rstrip())
            self.pos += 1
        while body and not body[-1]:
            body.pop()
        if opt.help_text is None:
            opt.help_text = "\n".join(body)

    # -- finish ---------------------------------------------------------------

    def finalize(self) -> None:
        if self.frames:
            frame = self.frames[-1]
            raise KconfigSyntaxError(f"unclosed {frame.kind} block at end of input",
                                     self.rel_name(self.root_file), 0)
        for name in sorted(self.space.options):
            opt = self.space.options[name]
            if opt.option_type is None:
                raise KconfigSyntaxError(f"option {name} has no type",
                                         opt.source_file, opt.source_line)
            if opt.range is not None and not opt.option_type.is_value_kind:
                raise KconfigSyntaxError(f"range on non-numeric option {name}",
                                         opt.source_file, opt.source_line)
        for group, members in self.space.choice_groups.items():
            if not members:
                raise KconfigSyntaxError(f"choice {group} has no members",
                                         self.space.options[group].source_file,
                                         self.space.options[group].source_line)
            for member in members:
                if not self.space.options[member].option_type.is_tristate_kind:
                    raise KconfigSyntaxError(
                        f"choice member {member} must be bool or tristate",
                        self.space.options[member].source_file,
                        self.space.options[member].source_line)
        self.space.edges = extract_instance_triples(self.space)
        referenced: set[str] = set()
        for triple in self.space.edges:
            referenced.add(triple.head)
            referenced.add(triple.tail)
        for opt in self.space.options.values():
            for default in opt.defaults:
                if default.expr is not None:
                    referenced.update(expr_symbols(default.expr))
            for entry in list(opt.selects) + list(opt.implies):
                if entry.guard is not None:
                    referenced.update(expr_symbols(entry.guard))
            for default in opt.defaults:
                if default.guard is not None:
                    referenced.update(expr_symbols(default.guard))
        self.space.unresolved_symbols = {
            name for name in referenced if name not in self.space.options
        }


def parse_kconfig_tree(root_file: str, include_env: dict[str, str] | None = None,
                       version_label: str = "") -> ConfigSpace:
    """Parse a Kconfig tree into a ConfigSpace.

    ``source`` directives resolve relative to the root file's directory
    after ``$(VAR)`` substitution from ``include_env``.  Parsing is
    deterministic: the same tree and env produce byte-identical canonical
    serializations.
    """
    return _TreeParser(root_file, include_env, version_label).parse()
