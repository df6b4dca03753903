"""Exact symbolic scalar calculus over chart coordinates.

Expressions are immutable trees over a fixed set of node kinds (constants,
coordinates, sums, products, quotients, rational powers, sin/cos/exp/log/sqrt,
negation).  They support exact differentiation of any order, conservative
simplification and fast repeated evaluation (each expression is compiled to a
Python callable on first use).  The text syntax used by manifold manifests is
infix with ``+ - * / ^``, functions ``sin cos exp log sqrt`` and coordinates
``x1..xN``.
"""

from __future__ import annotations

import math
import re
from fractions import Fraction

from .errors import ArityError, DomainError, ParseError

__all__ = [
    "ScalarExpr", "const", "coord", "add", "mul", "div", "neg", "power",
    "sin", "cos", "exp", "log", "sqrt",
    "evaluate", "differentiate", "simplify", "substitute",
    "parse_expression", "to_text", "as_expr",
]

_FUNCS = ("sin", "cos", "exp", "log", "sqrt")


class ScalarExpr:
    """Immutable expression tree node.

    Build instances through the module constructors (`const`, `coord`, `add`,
    ...) or through Python operators; the constructors fold constants and
    apply 0/1 identities so derivative trees stay small.
    """

    __slots__ = ("kind", "args", "value", "index", "exponent",
                 "_hash", "_fn", "_maxc")

    def __init__(self, kind, args=(), value=None, index=None, exponent=None):
        self.kind = kind
        self.args = tuple(args)
        self.value = value
        self.index = index
        self.exponent = exponent
        self._hash = None
        self._fn = None
        maxc = index if kind == "coord" else -1
        for a in self.args:
            if a._maxc > maxc:
                maxc = a._maxc
        self._maxc = maxc

    # -- structural identity -------------------------------------------------

    def __eq__(self, other):
        if self is other:
            return True
        if not isinstance(other, ScalarExpr):
            return NotImplemented
        if (self.kind != other.kind or self.value != other.value
                or self.index != other.index or self.exponent != other.exponent):
            return False
        return self.args == other.args

    def __hash__(self):
        if self._hash is None:
            self._hash = hash((self.kind, self.value, self.index,
                               self.exponent, self.args))
        return self._hash

    def __repr__(self):
        return f"ScalarExpr({to_text(self)!r})"

    # -- operator sugar -------------------------------------------------------

    def __add__(self, other):
        return add(self, as_expr(other))

    def __radd__(self, other):
        return add(as_expr(other), self)

    def __sub__(self, other):
        return add(self, neg(as_expr(other)))

    def __rsub__(self, other):
        return add(as_expr(other), neg(self))

    def __mul__(self, other):
        return mul(self, as_expr(other))

    def __rmul__(self, other):
        return mul(as_expr(other), self)

    def __truediv__(self, other):
        return div(self, as_expr(other))

    def __rtruediv__(self, other):
        return div(as_expr(other), self)

    def __pow__(self, r):
        return power(self, r)

    def __neg__(self):
        return neg(self)

    # --顶-level helpers ------------------------------------------------------

    @property
    def max_coordinate(self):
        """Largest coordinate index referenced, or -1 for constant expressions."""
        return self._maxc

    def is_const(self, v=None):
        if self.kind != "const":
            return False
        return True if v is None else self.value == v

    def __call__(self, p):
        return evaluate(self, p)


def as_expr(x):
    """Coerce a number into a constant node (expressions pass through)."""
    if isinstance(x, ScalarExpr):
        return x
    if isinstance(x, (int, float)):
        return const(float(x))
    raise TypeError(f"cannot treat {x!r} as a scalar expression")


# -- constructors (apply conservative simplification) -------------------------

_ZERO = None  # populated after `const` is defined
_ONE = None


def const(v):
    return ScalarExpr("const", value=float(v))


def coord(i):
    if i < 0:
        raise ValueError("coordinate index must be non-negative")
    return ScalarExpr("coord", index=int(i))


def add(*terms):
    flat = []
    csum = 0.0
    seen_const = False
    for t in terms:
        t = as_expr(t)
        if t.kind == "add":
            sub = t.args
        else:
            sub = (t,)
        for s in sub:
            if s.kind == "const":
                csum += s.value
                seen_const = True
            else:
                flat.append(s)
    if seen_const and csum != 0.0:
        flat.append(const(csum))
    if not flat:
        return const(0.0)
    if len(flat) == 1:
        return flat[0]
    return ScalarExpr("add", flat)


def mul(*factors):
    flat = []
    cprod = 1.0
    seen_const = False
    for f in factors:
        f = as_expr(f)
        if f.kind == "mul":
            sub = f.args
        else:
            sub = (f,)
        for s in sub:
            if s.kind == "const":
                cprod *= s.value
                seen_const = True
            else:
                flat.append(s)
    if seen_const and cprod == 0.0:
        return const(0.0)
    if seen_const and cprod != 1.0:
        flat.insert(0, const(cprod))
    if not flat:
        return const(1.0)
    if len(flat) == 1:
        return flat[0]
    return ScalarExpr("mul", flat)


def div(num, den):
    num, den = as_expr(num), as_expr(den)
    if den.is_const(1.0):
        return num
    if num.is_const(0.0):
        return const(0.0)
    if num.kind == "const" and den.kind == "const" and den.value != 0.0:
        return const(num.value / den.value)
    return ScalarExpr("div", (num, den))


def neg(x):
    x = as_expr(x)
    if x.kind == "const":
        return const(-x.value)
    if x.kind == "neg":
        return x.args[0]
    return ScalarExpr("neg", (x,))


def power(base, r):
    """Raise to an exact rational exponent (general powers go through exp/log)."""
    base = as_expr(base)
    if not isinstance(r, Fraction):
        if isinstance(r, int):
            r = Fraction(r)
        elif isinstance(r, float) and r == int(r):
            r = Fraction(int(r))
        else:
            r = Fraction(str(r))
    if r == 1:
        return base
    if r == 0:
        return const(1.0)
    if base.kind == "const":
        try:
            return const(base.value ** _exp_value(r))
        except (ValueError, ZeroDivisionError, OverflowError):
            pass
    return ScalarExpr("pow", (base,), exponent=r)


def _exp_value(r: Fraction):
    return int(r) if r.denominator == 1 else float(r)


def _unary(kind, fn):
    def build(x):
        x = as_expr(x)
        if x.kind == "const":
            try:
                return const(fn(x.value))
            except (ValueError, OverflowError):
                pass
        return ScalarExpr(kind, (x,))
    build.__name__ = kind
    return build


sin = _unary("sin", math.sin)
cos = _unary("cos", math.cos)
exp = _unary("exp", math.exp)
log = _unary("log", math.log)
sqrt = _unary("sqrt", math.sqrt)

_ZERO = const(0.0)
_ONE = const(1.0)


# -- evaluation ----------------------------------------------------------------

def _compile(e):
    """Compile an expression to ``lambda p: value`` with one local per shared node."""
    lines = []
    names = {}
    counter = [0]

    def emit(node):
        key = id(node)
        if key in names:
            return names[key]
        k = node.kind
        if k == "const":
            src = repr(node.value)
        elif k == "coord":
            src = f"p[{node.index}]"
        elif k == "add":
            src = " + ".join(emit(a) for a in node.args)
        elif k == "mul":
            src = " * ".join(emit(a) for a in node.args)
        elif k == "div":
            src = f"{emit(node.args[0])} / {emit(node.args[1])}"
        elif k == "neg":
            src = f"-{emit(node.args[0])}"
        elif k == "pow":
            src = f"{emit(node.args[0])} ** {_exp_value(node.exponent)!r}"
        elif k in _FUNCS:
            src = f"math.{k}({emit(node.args[0])})"
        else:  # pragma: no cover
            raise ValueError(f"unknown node kind {k!r}")
        name = f"t{counter[0]}"
        counter[0] += 1
        lines.append(f"    {name} = {src}")
        names[key] = name
        return name

    out = emit(e)
    body = "def _f(p):\n" + "\n".join(lines) + f"\n    return {out}\n"
    ns = {"math": math}
    exec(body, ns)
    return ns["_f"]


def evaluate(e, p):
    """Evaluate an expression at a coordinate tuple.

    Raises ArityError when ``p`` is shorter than the coordinates referenced
    and DomainError when the point hits a singularity of the expression.
    """
    if e._maxc >= len(p):
        raise ArityError(
            f"expression references coordinate x{e._maxc + 1} but point has "
            f"length {len(p)}")
    fn = e._fn
    if fn is None:
        fn = e._fn = _compile(e)
    try:
        v = fn(p)
    except ZeroDivisionError as ex:
        raise DomainError(f"division by zero at {tuple(p)}") from ex
    except (ValueError, OverflowError) as ex:
        raise DomainError(f"singular evaluation at {tuple(p)}: {ex}") from ex
    if isinstance(v, complex):
        raise DomainError(f"complex value at {tuple(p)}")
    return v


# -- differentiation -----------------------------------------------------------

def differentiate(e, i):
    """Exact symbolic derivative with respect to coordinate ``i``."""
    memo = {}

    def d(node):
        key = id(node)
        got = memo.get(key)
        if got is not None:
            return got
        k = node.kind
        if k == "const":
            r = _ZERO
        elif k == "coord":
            r = _ONE if node.index == i else _ZERO
        elif k == "add":
            r = add(*[d(a) for a in node.args])
        elif k == "mul":
            terms = []
            args = node.args
            for j, a in enumerate(args):
                da = d(a)
                if da.is_const(0.0):
                    continue
                terms.append(mul(*args[:j], da, *args[j + 1:]))
            r = add(*terms) if terms else _ZERO
        elif k == "div":
            a, b = node.args
            da, db = d(a), d(b)
            r = div(add(mul(da, b), neg(mul(a, db))), mul(b, b))
        elif k == "neg":
            r = neg(d(node.args[0]))
        elif k == "pow":
            a = node.args[0]
            rexp = node.exponent
            r = mul(const(float(rexp)), power(a, rexp - 1), d(a))
        elif k == "sin":
            r = mul(cos(node.args[0]), d(node.args[0]))
        elif k == "cos":
            r = neg(mul(sin(node.args[0]), d(node.args[0])))
        elif k == "exp":
            r = mul(node, d(node.args[0]))
        elif k == "log":
            r = div(d(node.args[0]), node.args[0])
        elif k == "sqrt":
            r = div(d(node.args[0]), mul(const(2.0), node))
        else:  # pragma: no cover
            raise ValueError(f"unknown node kind {k!r}")
        memo[key] = r
        return r

    return d(e)


def simplify(e):
    """Rebuild bottom-up through the folding constructors (value preserving)."""
    k = e.kind
    if k in ("const", "coord"):
        return e
    args = [simplify(a) for a in e.args]
    if k == "add":
        return add(*args)
    if k == "mul":
        return mul(*args)
    if k == "div":
        return div(*args)
    if k == "neg":
        return neg(args[0])
    if k == "pow":
        return power(args[0], e.exponent)
    return globals()[k](args[0])


def substitute(e, mapping):
    """Replace coordinates by expressions: ``mapping`` maps index -> ScalarExpr/number."""
    memo = {}

    def s(node):
        key = id(node)
        got = memo.get(key)
        if got is not None:
            return got
        k = node.kind
        if k == "coord":
            r = as_expr(mapping[node.index]) if node.index in mapping else node
        elif k == "const":
            r = node
        else:
            args = [s(a) for a in node.args]
            if k == "add":
                r = add(*args)
            elif k == "mul":
                r = mul(*args)
            elif k == "div":
                r = div(*args)
            elif k == "neg":
                r = neg(args[0])
            elif k == "pow":
                r = power(args[0], node.exponent)
            else:
                r = globals()[k](args[0])
        memo[key] = r
        return r

    return s(e)


# -- text syntax -----------------------------------------------------------------

_TOKEN = re.compile(r"""
    (?P<num>\d+\.\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?|\d+(?:[eE][+-]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>[-+*/^()])
  | (?P<ws>\s+)
""", re.VERBOSE)


def _tokenize(text):
    pos = 0
    out = []
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            raise ParseError(f"unexpected character {text[pos]!r} at offset {pos}")
        pos = m.end()
        if m.lastgroup == "ws":
            continue
        out.append((m.lastgroup, m.group()))
    return out


class _Parser:
    def __init__(self, tokens, dim):
        self.toks = tokens
        self.i = 0
        self.dim = dim

    def peek(self):
        return self.toks[self.i] if self.i < len(self.toks) else (None, None)

    def take(self, expect=None):
        if self.i >= len(self.toks):
            raise ParseError("unexpected end of expression")
        tok = self.toks[self.i]
        if expect is not None and tok[1] != expect:
            raise ParseError(f"expected {expect!r}, found {tok[1]!r}")
        self.i += 1
        return tok

    def expr(self):
        node = self.term()
        while self.peek()[1] in ("+", "-"):
            op = self.take()[1]
            rhs = self.term()
            node = add(node, rhs) if op == "+" else add(node, neg(rhs))
        return node

    def term(self):
        node = self.unary()
        while self.peek()[1] in ("*", "/"):
            op = self.take()[1]
            rhs = self.unary()
            node = mul(node, rhs) if op == "*" else div(node, rhs)
        return node

    def unary(self):
        if self.peek()[1] == "-":
            self.take()
            return neg(self.unary())
        if self.peek()[1] == "+":
            self.take()
            return self.unary()
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek()[1] == "^":
            self.take()
            return power(base, self.exponent())
        return base

    def exponent(self):
        """Rational exponent: INT, decimal, or (p/q) with an optional sign."""
        sign = 1
        if self.peek()[1] == "-":
            self.take()
            sign = -1
        kind, val = self.peek()
        if kind == "num":
            self.take()
            return sign * Fraction(val)
        if val == "(":
            self.take()
            inner_sign = 1
            if self.peek()[1] == "-":
                self.take()
                inner_sign = -1
            num = self.take()
            if num[0] != "num":
                raise ParseError("exponent must be a rational literal")
            frac = Fraction(num[1])
            if self.peek()[1] == "/":
                self.take()
                den = self.take()
                if den[0] != "num":
                    raise ParseError("exponent denominator must be a number")
                frac = frac / Fraction(den[1])
            self.take(")")
            return sign * inner_sign * frac
        raise ParseError("exponent must be a rational literal")

    def atom(self):
        kind, val = self.peek()
        if kind == "num":
            self.take()
            return const(float(val))
        if kind == "name":
            self.take()
            if val in _FUNCS:
                self.take("(")
                arg = self.expr()
                self.take(")")
                return globals()[val](arg)
            m = re.fullmatch(r"x(\d+)", val)
            if not m:
                raise ParseError(f"unknown identifier {val!r}")
            idx = int(m.group(1)) - 1
            if self.dim is not None and not (0 <= idx < self.dim):
                raise ParseError(
                    f"coordinate {val} outside chart of dimension {self.dim}")
            return coord(idx)
        if val == "(":
            self.take()
            node = self.expr()
            self.take(")")
            return node
        raise ParseError(f"unexpected token {val!r}")


def parse_expression(text, dim=None):
    """Parse manifest text syntax into a ScalarExpr (bit-exact float literals)."""
    p = _Parser(_tokenize(text), dim)
    node = p.expr()
    if p.i != len(p.toks):
        raise ParseError(f"trailing input from token {p.toks[p.i][1]!r}")
    return node


_PREC = {"add": 1, "neg": 2, "mul": 3, "div": 3, "pow": 5, "const": 9,
         "coord": 9, "sin": 9, "cos": 9, "exp": 9, "log": 9, "sqrt": 9}


def to_text(e):
    """Serialize to the manifest syntax; parse(to_text(e)) == e structurally."""

    def wrap(node, parent_prec, tight=False):
        s = render(node)
        prec = _PREC[node.kind]
        if prec < parent_prec or (tight and prec == parent_prec):
            return f"({s})"
        return s

    def render(node):
        k = node.kind
        if k == "const":
            if node.value < 0:
                return f"-{-node.value!r}"
            return repr(node.value)
        if k == "coord":
            return f"x{node.index + 1}"
        if k == "add":
            parts = [wrap(node.args[0], 1)]
            for a in node.args[1:]:
                if a.kind == "neg":
                    parts.append(f" - {wrap(a.args[0], 2)}")
                elif a.kind == "const" and a.value < 0:
                    parts.append(f" - {-a.value!r}")
                else:
                    parts.append(f" + {wrap(a, 2)}")
            return "".join(parts)
        if k == "mul":
            return "*".join(wrap(a, 3, tight=(i > 0 and a.kind == "div"))
                            for i, a in enumerate(node.args))
        if k == "div":
            return f"{wrap(node.args[0], 3)}/{wrap(node.args[1], 4)}"
        if k == "neg":
            return f"-{wrap(node.args[0], 3)}"
        if k == "pow":
            r = node.exponent
            if r.denominator == 1 and r >= 0:
                etxt = str(int(r))
            else:
                etxt = f"({r.numerator}/{r.denominator})"
            return f"{wrap(node.args[0], 6)}^{etxt}"
        return f"{k}({render(node.args[0])})"

    root = render(e)
    # Constants rendered with a leading '-' at top level are fine; the parser
    # reads them back through the unary branch.
    return root
