"""Expression DSL for chart-level metric and map definitions.

Expressions are written over positional chart variables ``x1..xn`` (base
point) and ``y1..yn`` (fibre coordinates). The grammar is ordinary infix
with precedence ``^`` > unary ``-`` > ``* /`` > ``+ -``, parentheses,
numeric literals, the constants ``pi`` and ``e`` and the smooth elementary
functions sqrt, exp, log, sin, cos, tan, sinh, cosh, tanh.

Evaluation is generic: the same compiled expression runs on Python floats,
on numpy arrays and on any object implementing the jet protocol (arithmetic
operators plus one method per elementary function, see :mod:`finslerkit.jets`).

Definition files are flat ``key = value`` lists, one entry per line (or
comma separated on one line)::

    name = "euclidean2"
    dim = 2
    F = "sqrt(y1^2 + y2^2)"
    cone = ["y1^2 + y2^2"]

Map files use ``f = ["<expr>", ...]`` (or ``f1 = ..., f2 = ...``).
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property, lru_cache
from typing import Callable, Mapping, Sequence

import numpy as np

from .errors import (
    DefinitionError,
    DimensionMismatchError,
    DomainError,
    ExprSyntaxError,
    UnknownIdentifierError,
)

FUNCTIONS = ("sqrt", "exp", "log", "sin", "cos", "tan", "sinh", "cosh", "tanh")
CONSTANTS = {"pi": math.pi, "e": math.e}
MIN_DIM, MAX_DIM = 2, 6


# ---------------------------------------------------------------------------
# AST


class Expr:
    """Base class of expression nodes (all nodes are frozen and hashable)."""

    __slots__ = ()

    def __str__(self):
        return format_expr(self)


@dataclass(frozen=True)
class Num(Expr):
    value: float


@dataclass(frozen=True)
class Const(Expr):
    name: str


@dataclass(frozen=True)
class Var(Expr):
    kind: str  # "x" or "y"
    index: int  # 1-based

    @property
    def name(self):
        return f"{self.kind}{self.index}"


@dataclass(frozen=True)
class Neg(Expr):
    operand: Expr


@dataclass(frozen=True)
class BinOp(Expr):
    op: str
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Pow(Expr):
    base: Expr
    exponent: Fraction


@dataclass(frozen=True)
class Call(Expr):
    func: str
    arg: Expr


# ---------------------------------------------------------------------------
# Tokenizer

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>[-+*/^(),])
    """,
    re.VERBOSE,
)

# typographic minus and friends that show up when formulas are pasted
_NORMALIZE = str.maketrans({"−": "-", "–": "-", "·": "*", "⋅": "*"})


@dataclass(frozen=True)
class _Token:
    kind: str
    text: str
    pos: int


def _tokenize(text: str) -> list[_Token]:
    text = text.translate(_NORMALIZE)
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ExprSyntaxError(f"unexpected character {text[pos]!r}", 1, pos + 1)
        kind = m.lastgroup
        if kind != "ws":
            tokens.append(_Token(kind, m.group(), pos))
        pos = m.end()
    tokens.append(_Token("end", "", len(text)))
    return tokens


# ---------------------------------------------------------------------------
# Parser (Pratt / precedence climbing)

_BINARY_BP = {"+": 10, "-": 10, "*": 20, "/": 20, "^": 40}
_UNARY_BP = 30
_VAR_RE = re.compile(r"^([xy])([1-9][0-9]*)$")


class _Parser:
    def __init__(self, text, n, allow_y):
        self.tokens = _tokenize(text)
        self.i = 0
        self.n = n
        self.allow_y = allow_y

    def peek(self):
        return self.tokens[self.i]

    def advance(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def error(self, cls, message, tok):
        raise cls(message, 1, tok.pos + 1)

    def expect(self, text):
        tok = self.advance()
        if tok.text != text:
            found = tok.text or "end of input"
            self.error(ExprSyntaxError, f"expected {text!r}, found {found!r}", tok)
        return tok

    def parse(self):
        expr = self.expression(0)
        tok = self.peek()
        if tok.kind != "end":
            self.error(ExprSyntaxError, f"unexpected {tok.text!r}", tok)
        return expr

    def expression(self, min_bp):
        left = self.prefix()
        while True:
            tok = self.peek()
            if tok.kind != "op" or tok.text not in _BINARY_BP:
                return left
            bp = _BINARY_BP[tok.text]
            if bp <= min_bp:
                return left
            self.advance()
            if tok.text == "^":
                # right associative; operand may carry a unary minus
                right = self.expression(bp - 1)
                left = Pow(left, self.rational(right, tok))
            else:
                right = self.expression(bp)
                left = BinOp(tok.text, left, right)

    def prefix(self):
        tok = self.advance()
        if tok.kind == "num":
            return Num(float(tok.text))
        if tok.text == "-":
            return Neg(self.expression(_UNARY_BP))
        if tok.text == "+":
            return self.expression(_UNARY_BP)
        if tok.text == "(":
            inner = self.expression(0)
            self.expect(")")
            return inner
        if tok.kind == "name":
            return self.name(tok)
        found = tok.text or "end of input"
        self.error(ExprSyntaxError, f"unexpected {found!r}", tok)

    def name(self, tok):
        name = tok.text
        if self.peek().text == "(":
            if name == "abs":
                self.error(DefinitionError, "abs() is not smooth and is not accepted", tok)
            if name not in FUNCTIONS:
                self.error(UnknownIdentifierError, f"unknown function {name!r}", tok)
            self.advance()
            arg = self.expression(0)
            self.expect(")")
            return Call(name, arg)
        if name in FUNCTIONS:
            self.error(ExprSyntaxError, f"function {name!r} needs an argument", tok)
        if name in CONSTANTS:
            return Const(name)
        m = _VAR_RE.match(name)
        if m is None:
            self.error(UnknownIdentifierError, f"unknown identifier {name!r}", tok)
        kind, index = m.group(1), int(m.group(2))
        if kind == "y" and not self.allow_y:
            self.error(UnknownIdentifierError, f"y-variables are not allowed here ({name!r})", tok)
        if self.n is not None and index > self.n:
            self.error(UnknownIdentifierError, f"unknown identifier {name!r} (dim = {self.n})", tok)
        return Var(kind, index)

    def rational(self, node, tok):
        try:
            return _constant_fraction(node)
        except ValueError:
            self.error(DefinitionError, "exponent must be a constant integer or rational", tok)


def _constant_fraction(node: Expr) -> Fraction:
    if isinstance(node, Num):
        return Fraction(repr(node.value))
    if isinstance(node, Neg):
        return -_constant_fraction(node.operand)
    if isinstance(node, BinOp):
        a, b = _constant_fraction(node.left), _constant_fraction(node.right)
        if node.op == "+":
            return a + b
        if node.op == "-":
            return a - b
        if node.op == "*":
            return a * b
        if b == 0:
            raise ValueError("zero denominator")
        return a / b
    if isinstance(node, Pow) and node.exponent.denominator == 1:
        return _constant_fraction(node.base) ** int(node.exponent)
    raise ValueError("not a rational constant")


def parse_expr(text: str, n: int | None = None, allow_y: bool = True) -> Expr:
    """Parse one expression. ``n`` bounds variable indices when given."""
    return _Parser(text, n, allow_y).parse()


# ---------------------------------------------------------------------------
# Printer


def _prec(e):
    if isinstance(e, BinOp):
        return _BINARY_BP[e.op]
    if isinstance(e, Neg):
        return _UNARY_BP
    if isinstance(e, Pow):
        return _BINARY_BP["^"]
    return 100


def _wrap(e, cond):
    s = format_expr(e)
    return f"({s})" if cond else s


def format_expr(e: Expr) -> str:
    """Render ``e`` so that :func:`parse_expr` gives back an equal AST."""
    if isinstance(e, Num):
        return repr(float(e.value))
    if isinstance(e, Const):
        return e.name
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Call):
        return f"{e.func}({format_expr(e.arg)})"
    if isinstance(e, Neg):
        return "-" + _wrap(e.operand, _prec(e.operand) <= _UNARY_BP)
    if isinstance(e, Pow):
        r = e.exponent
        exp = str(r.numerator) if r.denominator == 1 and r >= 0 else f"({r.numerator}/{r.denominator})"
        if r.denominator == 1 and r < 0:
            exp = f"({r.numerator})"
        return _wrap(e.base, _prec(e.base) <= _BINARY_BP["^"]) + "^" + exp
    if isinstance(e, BinOp):
        p = _BINARY_BP[e.op]
        return f"{_wrap(e.left, _prec(e.left) < p)} {e.op} {_wrap(e.right, _prec(e.right) <= p)}"
    raise TypeError(f"not an expression node: {e!r}")


# ---------------------------------------------------------------------------
# Structural helpers


def variables(e: Expr) -> set[str]:
    if isinstance(e, Var):
        return {e.name}
    if isinstance(e, (Num, Const)):
        return set()
    if isinstance(e, (Neg, Call)):
        return variables(e.operand if isinstance(e, Neg) else e.arg)
    if isinstance(e, Pow):
        return variables(e.base)
    return variables(e.left) | variables(e.right)


def substitute(e: Expr, mapping: Mapping[str, Expr]) -> Expr:
    """Replace variables by expressions (used for map composition)."""
    if isinstance(e, Var):
        return mapping.get(e.name, e)
    if isinstance(e, (Num, Const)):
        return e
    if isinstance(e, Neg):
        return Neg(substitute(e.operand, mapping))
    if isinstance(e, Call):
        return Call(e.func, substitute(e.arg, mapping))
    if isinstance(e, Pow):
        return Pow(substitute(e.base, mapping), e.exponent)
    return BinOp(e.op, substitute(e.left, mapping), substitute(e.right, mapping))


def square_expr(e: Expr) -> Expr:
    """An expression for ``e**2`` that avoids differentiating through sqrt.

    ``sqrt(a)^2 -> a`` and friends are exact wherever ``e`` itself is
    defined. Near the light cone of a Lorentzian norm this keeps third
    derivatives of F^2 free of catastrophic cancellation.
    """
    if isinstance(e, Call) and e.func == "sqrt":
        return e.arg
    if isinstance(e, Neg):
        return square_expr(e.operand)
    if isinstance(e, BinOp) and e.op in "*/":
        return BinOp(e.op, square_expr(e.left), square_expr(e.right))
    if isinstance(e, Pow):
        r = 2 * e.exponent
        return e.base if r == 1 else Pow(e.base, r)
    return Pow(e, Fraction(2))


# ---------------------------------------------------------------------------
# Evaluation


def _value_of(v):
    return v.value if hasattr(v, "first") else v


def _any(cond):
    return cond.any() if isinstance(cond, np.ndarray) else bool(cond)


def pow_value(b, r: Fraction):
    """``b**r`` computed identically for floats and for jet base values."""
    if r.denominator == 1:
        return b ** int(r)
    return b ** float(r)


def _check_domain(func, v, node):
    val = _value_of(v)
    is_jet = val is not v
    if isinstance(val, np.ndarray):
        bad = np.any(val <= 0) if func == "log" else np.any(val < 0)
    elif func == "log":
        bad = val <= 0
    else:  # sqrt: the derivative needs a strictly positive argument
        bad = val <= 0 if is_jet else val < 0
    if bad:
        raise DomainError(f"{func} of non-positive value {val!r}", format_expr(node))


_MATH = {name: getattr(math, name) for name in FUNCTIONS}
_NUMPY = {name: getattr(np, name) for name in FUNCTIONS}


def _compile(e: Expr) -> Callable[[Mapping], object]:
    if isinstance(e, Num):
        v = float(e.value)
        return lambda env: v
    if isinstance(e, Const):
        v = CONSTANTS[e.name]
        return lambda env: v
    if isinstance(e, Var):
        name = e.name
        return lambda env: env[name]
    if isinstance(e, Neg):
        f = _compile(e.operand)
        return lambda env: -f(env)
    if isinstance(e, BinOp):
        fl, fr = _compile(e.left), _compile(e.right)
        if e.op == "+":
            return lambda env: fl(env) + fr(env)
        if e.op == "-":
            return lambda env: fl(env) - fr(env)
        if e.op == "*":
            return lambda env: fl(env) * fr(env)

        def div(env):
            a, b = fl(env), fr(env)
            bv = _value_of(b)
            if _any(bv == 0):
                raise DomainError("division by zero", format_expr(e))
            return a / b

        return div
    if isinstance(e, Pow):
        fb, r = _compile(e.base), e.exponent

        def power(env):
            b = fb(env)
            bv = _value_of(b)
            if r.denominator != 1 and _any(bv <= 0):
                raise DomainError(f"fractional power of non-positive value {bv!r}", format_expr(e))
            if r < 0 and _any(bv == 0):
                raise DomainError("negative power of zero", format_expr(e))
            if hasattr(b, "first"):
                return b.pow_rational(r)
            if isinstance(b, np.ndarray):
                return np.power(b, int(r)) if r.denominator == 1 else np.power(b, float(r))
            return pow_value(b, r)

        return power
    if isinstance(e, Call):
        fa, func = _compile(e.arg), e.func
        mfun, nfun = _MATH[func], _NUMPY[func]
        checked = func in ("sqrt", "log")

        def call(env):
            a = fa(env)
            if checked:
                _check_domain(func, a, e)
            if isinstance(a, float):
                return mfun(a)
            if isinstance(a, np.ndarray):
                return nfun(a)
            if isinstance(a, int):
                return mfun(float(a))
            return getattr(a, func)()

        return call
    raise TypeError(f"not an expression node: {e!r}")


compile_expr = lru_cache(maxsize=None)(_compile)


def evaluate(e: Expr, env: Mapping[str, object]):
    """Evaluate ``e`` with variables bound by ``env`` (floats, arrays or jets)."""
    return compile_expr(e)(env)


def bundle_env(x: Sequence[float], y: Sequence[float] | None = None) -> dict:
    env = {f"x{i + 1}": float(v) for i, v in enumerate(x)}
    if y is not None:
        env.update({f"y{i + 1}": float(v) for i, v in enumerate(y)})
    return env


# ---------------------------------------------------------------------------
# Definitions


@dataclass(frozen=True)
class MetricDef:
    """A pseudo-Finsler structure on one chart: F on the open cone ``cone > 0``."""

    name: str
    n: int
    F: Expr
    cone: tuple[Expr, ...] = ()
    source: str | None = field(default=None, compare=False, repr=False)

    @cached_property
    def F2(self) -> Expr:
        return square_expr(self.F)

    def value(self, x, y) -> float:
        return evaluate(self.F, bundle_env(x, y))

    def cone_values(self, x, y) -> list[float]:
        env = bundle_env(x, y)
        return [evaluate(c, env) for c in self.cone]

    def in_cone(self, x, y, margin: float = 0.0) -> bool:
        try:
            return all(v > margin for v in self.cone_values(x, y))
        except DomainError:
            return False

    def to_text(self) -> str:
        cone = ", ".join(f'"{format_expr(c)}"' for c in self.cone)
        return f'name = "{self.name}"\ndim = {self.n}\nF = "{format_expr(self.F)}"\ncone = [{cone}]\n'


@dataclass(frozen=True)
class MapDef:
    """A candidate diffeomorphism given by n component expressions in x."""

    name: str
    n: int
    components: tuple[Expr, ...]
    source: str | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if len(self.components) != self.n:
            raise DimensionMismatchError(f"map {self.name!r} has {len(self.components)} components, dim = {self.n}")

    def apply(self, x) -> np.ndarray:
        env = bundle_env(x)
        return np.array([evaluate(c, env) for c in self.components], dtype=float)

    def to_text(self) -> str:
        comps = ", ".join(f'"{format_expr(c)}"' for c in self.components)
        return f'name = "{self.name}"\ndim = {self.n}\nf = [{comps}]\n'


def compose_maps(f: MapDef, g: MapDef, name: str | None = None) -> MapDef:
    """The map ``f o g`` built by substituting g's components into f."""
    if f.n != g.n:
        raise DimensionMismatchError(f"cannot compose maps of dim {f.n} and {g.n}")
    mapping = {f"x{i + 1}": c for i, c in enumerate(g.components)}
    comps = tuple(substitute(c, mapping) for c in f.components)
    return MapDef(name or f"{f.name}*{g.name}", f.n, comps)


# --- file format -----------------------------------------------------------


def _locate(text: str, offset: int) -> tuple[int, int]:
    line = text.count("\n", 0, offset) + 1
    col = offset - (text.rfind("\n", 0, offset) + 1) + 1
    return line, col


def _split_top(text: str, start: int, end: int, seps: str) -> list[tuple[int, int]]:
    """Split text[start:end] at separator chars outside quotes/brackets."""
    parts, depth, quoted, comment = [], 0, False, False
    seg = start
    for i in range(start, end):
        c = text[i]
        if comment:
            if c == "\n":
                comment = False
                seg = i + 1
            continue
        if c == '"':
            quoted = not quoted
        elif quoted:
            continue
        elif c == "#":
            comment = True
            parts.append((seg, i))
        elif c in "([":
            depth += 1
        elif c in ")]":
            depth -= 1
        elif depth == 0 and c in seps:
            parts.append((seg, i))
            seg = i + 1
    if not comment:
        parts.append((seg, end))
    if quoted:
        raise ExprSyntaxError("unterminated string", *_locate(text, end))
    return parts


def _strip_span(text, a, b):
    while a < b and text[a].isspace():
        a += 1
    while b > a and text[b - 1].isspace():
        b -= 1
    return a, b


def _unquote(text, a, b):
    if b - a >= 2 and text[a] == '"' and text[b - 1] == '"':
        return a + 1, b - 1
    if text[a:b].startswith('"') or text[a:b].endswith('"'):
        raise ExprSyntaxError("unbalanced quotes", *_locate(text, a))
    return a, b


def _entries(text: str) -> dict[str, tuple[int, int]]:
    entries = {}
    for a, b in _split_top(text, 0, len(text), "\n,"):
        a, b = _strip_span(text, a, b)
        if a == b:
            continue
        eq = text.find("=", a, b)
        if eq < 0:
            raise ExprSyntaxError("expected 'key = value'", *_locate(text, a))
        ka, kb = _strip_span(text, a, eq)
        key = text[ka:kb]
        if not re.fullmatch(r"[A-Za-z_][A-Za-z_0-9]*", key):
            raise ExprSyntaxError(f"invalid key {key!r}", *_locate(text, ka))
        if key in entries:
            raise DefinitionError(f"duplicate key {key!r}", *_locate(text, ka))
        entries[key] = _strip_span(text, eq + 1, b)
    return entries


def _list_items(text, span):
    a, b = span
    if not (text[a:b].startswith("[") and text[a:b].endswith("]")):
        raise ExprSyntaxError("expected a list '[...]'", *_locate(text, a))
    items = []
    for ia, ib in _split_top(text, a + 1, b - 1, ","):
        ia, ib = _strip_span(text, ia, ib)
        if ia == ib:
            continue
        items.append(_unquote(text, ia, ib))
    return items


def _expr_at(text, span, n, allow_y):
    a, b = span
    a, b = _unquote(text, a, b)
    try:
        return parse_expr(text[a:b], n, allow_y)
    except DefinitionError as exc:
        line, col = _locate(text, a + (exc.column or 1) - 1)
        msg = str(exc).split(": ", 1)[-1]
        raise type(exc)(msg, line, col) from None


def _int_at(text, span, key):
    a, b = span
    try:
        return int(text[a:b])
    except ValueError:
        raise ExprSyntaxError(f"{key} must be an integer", *_locate(text, a)) from None


def _check_dim(n, text, span):
    if not MIN_DIM <= n <= MAX_DIM:
        raise DimensionMismatchError(f"dim must be between {MIN_DIM} and {MAX_DIM}, got {n}", *_locate(text, span[0]))


def _name(text, entries, default):
    if "name" not in entries:
        return default
    a, b = _unquote(text, *entries["name"])
    return text[a:b]


def parse_metric(text: str, name: str = "metric") -> MetricDef:
    entries = _entries(text)
    unknown = set(entries) - {"name", "dim", "F", "cone"}
    if unknown:
        key = sorted(unknown)[0]
        raise DefinitionError(f"unknown key {key!r} in metric file", *_locate(text, entries[key][0]))
    for key in ("dim", "F"):
        if key not in entries:
            raise DefinitionError(f"metric file is missing {key!r}", *_locate(text, len(text)))
    n = _int_at(text, entries["dim"], "dim")
    _check_dim(n, text, entries["dim"])
    F = _expr_at(text, entries["F"], n, True)
    cone = ()
    if "cone" in entries:
        cone = tuple(_expr_at(text, item, n, True) for item in _list_items(text, entries["cone"]))
    return MetricDef(_name(text, entries, name), n, F, cone, source=text)


def parse_map(text: str, name: str = "map") -> MapDef:
    entries = _entries(text)
    numbered = sorted((k for k in entries if re.fullmatch(r"f[1-9][0-9]*", k)), key=lambda k: int(k[1:]))
    unknown = set(entries) - {"name", "dim", "f"} - set(numbered)
    if unknown:
        key = sorted(unknown)[0]
        raise DefinitionError(f"unknown key {key!r} in map file", *_locate(text, entries[key][0]))
    if "f" in entries and numbered:
        raise DefinitionError("use either 'f = [...]' or 'f1 = ..., f2 = ...', not both", *_locate(text, entries["f"][0]))
    if "f" in entries:
        spans = _list_items(text, entries["f"])
    elif numbered:
        if [int(k[1:]) for k in numbered] != list(range(1, len(numbered) + 1)):
            raise DimensionMismatchError("map components must be numbered f1..fn without gaps")
        spans = [entries[k] for k in numbered]
    else:
        raise DefinitionError("map file has no components", *_locate(text, len(text)))
    n = _int_at(text, entries["dim"], "dim") if "dim" in entries else len(spans)
    # expression errors (e.g. y-variables) are reported before component-count errors
    comps = tuple(_expr_at(text, s, n if MIN_DIM <= n <= MAX_DIM else None, False) for s in spans)
    if "dim" in entries:
        _check_dim(n, text, entries["dim"])
        if n != len(spans):
            raise DimensionMismatchError(f"dim = {n} but {len(spans)} components given", *_locate(text, entries["dim"][0]))
    elif not MIN_DIM <= n <= MAX_DIM:
        raise DimensionMismatchError(f"map needs between {MIN_DIM} and {MAX_DIM} components, got {n}")
    return MapDef(_name(text, entries, name), n, comps, source=text)


def load_metric(path) -> MetricDef:
    from pathlib import Path

    p = Path(path)
    return parse_metric(p.read_text(encoding="utf-8"), name=p.stem)


def load_map(path) -> MapDef:
    from pathlib import Path

    p = Path(path)
    return parse_map(p.read_text(encoding="utf-8"), name=p.stem)
