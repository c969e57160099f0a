"""Lexer, parser, printer and validator for alpha formulas.

Grammar, loosest binding first::

    ternary  := or ('?' ternary ':' ternary)?
    or       := cmp ('||' cmp)*
    cmp      := add (('<' | '>' | '<=' | '>=' | '==') add)?
    add      := mul (('+' | '-') mul)*
    mul      := unary (('*' | '/') unary)*
    unary    := '-' unary | power
    power    := primary ('^' unary)?
    primary  := NUMBER | IDENT | IDENT '(' args ')' | IndClass.LEVEL | '(' ternary ')'

Identifiers are case-insensitive and canonicalised to lower case.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field, replace
from typing import Iterator, NamedTuple, Sequence, Union

from .market import INDUSTRY_LEVELS

Position = tuple[int, int]

BASE_INPUTS = frozenset({"returns", "open", "close", "high", "low", "volume", "vwap", "cap"})
_ADV = re.compile(r"adv(\d+)$")


class ExprError(ValueError):
    """Base class for lexing, parsing and validation errors."""

    def __init__(self, message: str, position: Position | None = None, detail: str | None = None) -> None:
        self.message = message
        self.position = position
        self.detail = detail
        if position is not None:
            message = f"{message} at line {position[0]}, column {position[1]}"
        if detail:
            message = f"{message}: {detail}"
        super().__init__(message)


class LexError(ExprError):
    pass


class ParseError(ExprError):
    pass


class ValidationError(ExprError):
    pass


# --------------------------------------------------------------------------
# tokens


class Token(NamedTuple):
    kind: str  # number | identifier | dotted | operator | punct | end
    text: str
    position: Position

    @property
    def canonical(self) -> str:
        return self.text.lower() if self.kind in ("identifier", "dotted") else self.text

    @property
    def value(self) -> float:
        return float(self.text)


_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<number>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<dotted>[A-Za-z_]\w*\.[A-Za-z_]\w*)
  | (?P<identifier>[A-Za-z_]\w*)
  | (?P<operator>\|\||<=|>=|==|[-+*/^<>?:])
  | (?P<punct>[(),])
    """,
    re.VERBOSE,
)


def tokenize(source: str, *, line: int = 1, column: int = 1) -> list[Token]:
    """Split ``source`` into tokens; ``line``/``column`` locate its first character."""
    tokens: list[Token] = []
    pos = 0
    ln, line_start = line, -(column - 1)
    while pos < len(source):
        m = _TOKEN_RE.match(source, pos)
        where = (ln, pos - line_start + 1)
        if m is None:
            raise LexError(f"unexpected character {source[pos]!r}", where)
        kind = m.lastgroup
        text = m.group()
        if kind == "ws":
            nl = text.rfind("\n")
            if nl >= 0:
                ln += text.count("\n")
                line_start = pos + nl + 1
        else:
            tokens.append(Token(kind, text, where))
        pos = m.end()
    tokens.append(Token("end", "", (ln, pos - line_start + 1)))
    return tokens


# --------------------------------------------------------------------------
# AST


@dataclass(frozen=True)
class Number:
    value: float
    pos: Position | None = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class InputRef:
    name: str
    pos: Position | None = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class GroupRef:
    level: str
    pos: Position | None = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Unary:
    op: str
    operand: "Expr"
    pos: Position | None = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Binary:
    op: str
    left: "Expr"
    right: "Expr"
    pos: Position | None = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Ternary:
    cond: "Expr"
    then: "Expr"
    orelse: "Expr"
    pos: Position | None = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Call:
    name: str
    args: tuple["Expr", ...]
    pos: Position | None = field(default=None, compare=False, repr=False)


Expr = Union[Number, InputRef, GroupRef, Unary, Binary, Ternary, Call]

COMPARISONS = ("<", ">", "<=", ">=", "==")


def children(node: Expr) -> tuple[Expr, ...]:
    if isinstance(node, Unary):
        return (node.operand,)
    if isinstance(node, Binary):
        return (node.left, node.right)
    if isinstance(node, Ternary):
        return (node.cond, node.then, node.orelse)
    if isinstance(node, Call):
        return node.args
    return ()


def walk(node: Expr) -> Iterator[Expr]:
    yield node
    for c in children(node):
        yield from walk(c)


# --------------------------------------------------------------------------
# parser


class _Parser:
    def __init__(self, tokens: Sequence[Token]) -> None:
        self.tokens = tokens
        self.i = 0

    @property
    def tok(self) -> Token:
        return self.tokens[self.i]

    def advance(self) -> Token:
        t = self.tokens[self.i]
        self.i += 1
        return t

    def at(self, *texts: str) -> bool:
        t = self.tok
        return t.kind in ("operator", "punct") and t.text in texts

    def expect(self, text: str, context: str) -> Token:
        if not self.at(text):
            t = self.tok
            found = "end of input" if t.kind == "end" else repr(t.text)
            if text == ")":
                raise ParseError("unbalanced parenthesis", t.position, f"expected ')' {context}, found {found}")
            raise ParseError(f"expected {text!r} {context}, found {found}", t.position)
        return self.advance()

    def ternary(self) -> Expr:
        cond = self.logical_or()
        if self.at("?"):
            q = self.advance()
            then = self.ternary()
            self.expect(":", "in conditional expression")
            orelse = self.ternary()
            return Ternary(cond, then, orelse, q.position)
        return cond

    def logical_or(self) -> Expr:
        left = self.comparison()
        while self.at("||"):
            op = self.advance()
            left = Binary("||", left, self.comparison(), op.position)
        return left

    def comparison(self) -> Expr:
        left = self.additive()
        if self.at(*COMPARISONS):
            op = self.advance()
            left = Binary(op.text, left, self.additive(), op.position)
            if self.at(*COMPARISONS):
                raise ParseError(
                    "comparisons do not chain; parenthesize one side", self.tok.position
                )
        return left

    def additive(self) -> Expr:
        left = self.multiplicative()
        while self.at("+", "-"):
            op = self.advance()
            left = Binary(op.text, left, self.multiplicative(), op.position)
        return left

    def multiplicative(self) -> Expr:
        left = self.unary()
        while self.at("*", "/"):
            op = self.advance()
            left = Binary(op.text, left, self.unary(), op.position)
        return left

    def unary(self) -> Expr:
        if self.at("-"):
            op = self.advance()
            return Unary("-", self.unary(), op.position)
        return self.power()

    def power(self) -> Expr:
        base = self.primary()
        if self.at("^"):
            op = self.advance()
            return Binary("^", base, self.unary(), op.position)
        return base

    def primary(self) -> Expr:
        t = self.tok
        if t.kind == "number":
            self.advance()
            return Number(t.value, t.position)
        if t.kind == "dotted":
            self.advance()
            head, _, level = t.canonical.partition(".")
            if head != "indclass":
                raise ParseError(f"unknown qualified name {t.text!r}", t.position)
            if level not in INDUSTRY_LEVELS:
                raise ParseError(
                    f"unknown industry level {level!r}; expected one of {', '.join(INDUSTRY_LEVELS)}",
                    t.position,
                )
            return GroupRef(level, t.position)
        if t.kind == "identifier":
            self.advance()
            if self.at("("):
                self.advance()
                args: list[Expr] = []
                if not self.at(")"):
                    args.append(self.ternary())
                    while self.at(","):
                        self.advance()
                        args.append(self.ternary())
                self.expect(")", f"to close call of {t.text}")
                return Call(t.canonical, tuple(args), t.position)
            return InputRef(t.canonical, t.position)
        if self.at("("):
            self.advance()
            inner = self.ternary()
            self.expect(")", "to close '('")
            return inner
        if t.kind == "end":
            raise ParseError("unexpected end of input, expected an operand", t.position)
        raise ParseError(f"unexpected {t.text!r}, expected an operand", t.position)


def parse(source: str, *, line: int = 1, column: int = 1) -> Expr:
    """Parse one alpha expression into an AST."""
    tokens = tokenize(source, line=line, column=column)
    if len(tokens) == 1:
        raise ParseError("empty expression", tokens[0].position)
    p = _Parser(tokens)
    expr = p.ternary()
    if p.tok.kind != "end":
        t = p.tok
        if t.text == ")":
            raise ParseError("unbalanced parenthesis", t.position, "unexpected ')'")
        raise ParseError(f"unexpected trailing {t.text!r}", t.position)
    return expr


# --------------------------------------------------------------------------
# printer


def _fmt_number(v: float) -> str:
    if v.is_integer() and abs(v) < 1e15:
        return str(int(v))
    return repr(v)


def to_source(node: Expr) -> str:
    """Fully parenthesized source text; ``parse(to_source(e)) == e``."""
    if isinstance(node, Number):
        return _fmt_number(node.value)
    if isinstance(node, InputRef):
        return node.name
    if isinstance(node, GroupRef):
        return f"IndClass.{node.level}"
    if isinstance(node, Unary):
        return f"(-{to_source(node.operand)})"
    if isinstance(node, Binary):
        return f"({to_source(node.left)} {node.op} {to_source(node.right)})"
    if isinstance(node, Ternary):
        return f"({to_source(node.cond)} ? {to_source(node.then)} : {to_source(node.orelse)})"
    if isinstance(node, Call):
        return f"{node.name}({', '.join(to_source(a) for a in node.args)})"
    raise TypeError(f"not an expression node: {node!r}")


# --------------------------------------------------------------------------
# validation


class FunctionSpec(NamedTuple):
    arity: tuple[int, ...]
    window: int | None = None  # index of the window argument
    min_window: int = 1
    lag: bool = False  # lookback grows by d (delay/delta) instead of d - 1
    scalar: int | None = None  # index of a literal scalar argument
    group: int | None = None  # index of the IndClass argument


FUNCTIONS: dict[str, FunctionSpec] = {
    "abs": FunctionSpec((1,)),
    "log": FunctionSpec((1,)),
    "sign": FunctionSpec((1,)),
    "rank": FunctionSpec((1,)),
    "scale": FunctionSpec((1, 2), scalar=1),
    "signedpower": FunctionSpec((2,)),
    "indneutralize": FunctionSpec((2,), group=1),
    "delay": FunctionSpec((2,), window=1, lag=True),
    "delta": FunctionSpec((2,), window=1, lag=True),
    "correlation": FunctionSpec((3,), window=2, min_window=2),
    "covariance": FunctionSpec((3,), window=2, min_window=2),
    "decay_linear": FunctionSpec((2,), window=1),
    "ts_min": FunctionSpec((2,), window=1),
    "ts_max": FunctionSpec((2,), window=1),
    "ts_argmax": FunctionSpec((2,), window=1),
    "ts_argmin": FunctionSpec((2,), window=1),
    "ts_rank": FunctionSpec((2,), window=1, min_window=2),
    "sum": FunctionSpec((2,), window=1),
    "product": FunctionSpec((2,), window=1),
    "stddev": FunctionSpec((2,), window=1, min_window=2),
    # two-argument min/max: time-series alias when the second argument is a
    # bare number, elementwise otherwise
    "min": FunctionSpec((2,)),
    "max": FunctionSpec((2,)),
}


@dataclass(frozen=True)
class ValidatedExpr:
    """A checked, window-normalized expression plus its data requirements."""

    expr: Expr
    required_inputs: frozenset[str]
    required_industry_levels: frozenset[str]
    max_lookback: int
    source: str | None = None

    @property
    def warmup_rows(self) -> int:
        return self.max_lookback - 1


def input_lookback(name: str) -> int:
    """Days of raw history one value of a named input needs."""
    m = _ADV.match(name)
    if m:
        return int(m.group(1))
    return 2 if name == "returns" else 1


def is_input_name(name: str) -> bool:
    m = _ADV.match(name)
    return name in BASE_INPUTS or (m is not None and int(m.group(1)) >= 1)


def _window_value(fname: str, arg: Expr, spec: FunctionSpec) -> int:
    if not isinstance(arg, Number):
        raise ValidationError(f"{fname}: window must be a number literal", _pos(arg))
    d = math.floor(arg.value)
    if d < spec.min_window:
        raise ValidationError(
            f"{fname}: window {arg.value:g} floors to {d}, needs >= {spec.min_window}", arg.pos
        )
    return d


def _pos(node: Expr) -> Position | None:
    return getattr(node, "pos", None)


def _check(node: Expr, inputs: set[str], levels: set[str]) -> tuple[Expr, int]:
    """Return the normalized node and its lookback in days."""
    if isinstance(node, Number):
        if not math.isfinite(node.value):
            raise ValidationError("non-finite literal", node.pos)
        return node, 1
    if isinstance(node, InputRef):
        if not is_input_name(node.name):
            raise ValidationError(f"unknown input {node.name!r}", node.pos)
        inputs.add(node.name)
        return node, input_lookback(node.name)
    if isinstance(node, GroupRef):
        raise ValidationError(
            "IndClass is only allowed as the second argument of indneutralize", node.pos
        )
    if isinstance(node, Unary):
        child, lb = _check(node.operand, inputs, levels)
        return replace(node, operand=child), lb
    if isinstance(node, Binary):
        left, l1 = _check(node.left, inputs, levels)
        right, l2 = _check(node.right, inputs, levels)
        return replace(node, left=left, right=right), max(l1, l2)
    if isinstance(node, Ternary):
        parts = [_check(c, inputs, levels) for c in (node.cond, node.then, node.orelse)]
        return (
            Ternary(parts[0][0], parts[1][0], parts[2][0], node.pos),
            max(p[1] for p in parts),
        )
    if isinstance(node, Call):
        return _check_call(node, inputs, levels)
    raise TypeError(f"not an expression node: {node!r}")


def _check_call(node: Call, inputs: set[str], levels: set[str]) -> tuple[Expr, int]:
    name, args = node.name, node.args
    spec = FUNCTIONS.get(name)
    if spec is None:
        raise ValidationError(f"unknown function {name!r}", node.pos)
    if len(args) not in spec.arity:
        want = " or ".join(str(a) for a in spec.arity)
        raise ValidationError(f"{name} takes {want} argument(s), got {len(args)}", node.pos)
    if name in ("min", "max") and isinstance(args[1], Number):
        return _check_call(Call("ts_" + name, args, node.pos), inputs, levels)

    new_args: list[Expr] = []
    lookbacks: list[int] = []
    extra = 0
    for k, arg in enumerate(args):
        if k == spec.window:
            d = _window_value(name, arg, spec)
            new_args.append(Number(float(d), arg.pos))
            extra = d if spec.lag else d - 1
        elif k == spec.group:
            if not isinstance(arg, GroupRef):
                raise ValidationError(f"{name}: second argument must be IndClass.<level>", _pos(arg))
            levels.add(arg.level)
            new_args.append(arg)
        elif k == spec.scalar:
            if not isinstance(arg, Number) or arg.value <= 0:
                raise ValidationError(f"{name}: scale target must be a positive number", _pos(arg))
            new_args.append(arg)
        else:
            child, lb = _check(arg, inputs, levels)
            new_args.append(child)
            lookbacks.append(lb)
    return Call(name, tuple(new_args), node.pos), max(lookbacks) + extra


def validate(expr: Expr | str) -> ValidatedExpr:
    """Check arity/arguments, floor window literals and compute data requirements."""
    source = None
    if isinstance(expr, str):
        source = expr
        expr = parse(expr)
    inputs: set[str] = set()
    levels: set[str] = set()
    normalized, lookback = _check(expr, inputs, levels)
    return ValidatedExpr(normalized, frozenset(inputs), frozenset(levels), lookback, source)


# --------------------------------------------------------------------------
# alpha source files

# a label never parses as an expression: no valid expression starts with "name:"
_ENTRY_RE = re.compile(r"\s*([A-Za-z_]\w*(?:#\d+)?)\s*:\s*")


class SourceEntry(NamedTuple):
    name: str
    text: str
    line: int
    column: int


def split_source_file(text: str) -> list[SourceEntry]:
    """Split an alpha source file into entries.

    Blank lines and lines starting with ``#`` are ignored. An entry is either
    ``Alpha#<id>: <expr>``, ``<name>: <expr>`` or a bare expression; indented lines continue the
    previous entry.
    """
    entries: list[list] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        stripped = raw.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if raw[0].isspace() and entries:
            entries[-1][1] += "\n" + raw
            continue
        m = _ENTRY_RE.match(raw)
        if m:
            entries.append([m.group(1), raw[m.end():], lineno, m.end() + 1])
        else:
            entries.append([f"expr{len(entries) + 1}", raw, lineno, 1])
    return [SourceEntry(name, body, ln, col) for name, body, ln, col in entries]
