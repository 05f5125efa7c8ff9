"""Immutable symbolic expressions over time, variable derivatives and parameters.

Every node is interned, so structurally equal expressions are the same
object and ``a is b`` (or ``a == b``) is a structural comparison.  Nodes are
only ever built through the smart constructors (:func:`add`, :func:`mul`,
:func:`power`, :func:`func`), which keep a light canonical form:

* constants folded exactly (``fractions.Fraction``),
* sums collect like terms, products collect powers of equal bases,
* ``0``/``1`` absorption,
* ``c*M*sin(u)**2 + c*M*cos(u)**2`` collapses to ``c*M``.

Products are not distributed over sums unless :func:`expand` is called.

A derivative ``x_j^(k)`` is a :class:`Var` with ``order = k``; the time
variable is the singleton :data:`T`.
"""

from __future__ import annotations

import math
import re
from fractions import Fraction
from functools import lru_cache
from typing import Iterable, Mapping, Union

Number = Union[int, float, Fraction]

FUNCTIONS = ("sin", "cos", "tan", "exp", "log", "tanh", "sqrt")

_INTERN: dict = {}


def _natural(name: str) -> tuple:
    parts = re.split(r"(\d+)", name)
    return tuple(int(p) if i % 2 else p for i, p in enumerate(parts))


class Expr:
    __slots__ = ("_args", "_sk", "_size", "_leaves")
    rank = -1

    def __new__(cls, *args):
        key = (cls, args)
        node = _INTERN.get(key)
        if node is None:
            node = object.__new__(cls)
            node._args = args
            node._sk = None
            node._size = None
            node._leaves = None
            node = _INTERN.setdefault(key, node)
        return node

    def __reduce__(self):
        return (_rebuild_from, (type(self).__name__, self._args))

    # structure -------------------------------------------------------
    @property
    def children(self) -> tuple:
        return ()

    @property
    def sort_key(self) -> tuple:
        if self._sk is None:
            self._sk = self._make_sort_key()
        return self._sk

    def _make_sort_key(self) -> tuple:
        raise NotImplementedError

    @property
    def size(self) -> int:
        if self._size is None:
            self._size = 1 + sum(c.size for c in self.children)
        return self._size

    @property
    def leaves(self) -> frozenset:
        """Time and variable nodes occurring in the expression."""
        if self._leaves is None:
            out = frozenset()
            for c in self.children:
                out |= c.leaves
            self._leaves = out
        return self._leaves

    # arithmetic ------------------------------------------------------
    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return add(self, neg(other))

    def __rsub__(self, other):
        return add(other, neg(self))

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __neg__(self):
        return neg(self)

    def __pow__(self, other):
        return power(self, other)

    def __str__(self):
        from .printer import to_text

        return to_text(self)

    def __repr__(self):
        return f"Expr({self})"


class Const(Expr):
    __slots__ = ()
    rank = 0

    @property
    def value(self) -> Fraction:
        return self._args[0]

    def _make_sort_key(self):
        return (0, self._args[0])

    @property
    def leaves(self):
        return frozenset()


class Param(Expr):
    __slots__ = ()
    rank = 1

    @property
    def name(self) -> str:
        return self._args[0]

    def _make_sort_key(self):
        return (1, _natural(self._args[0]))

    @property
    def leaves(self):
        return frozenset()


class Time(Expr):
    __slots__ = ()
    rank = 2

    def _make_sort_key(self):
        return (2,)

    @property
    def leaves(self):
        if self._leaves is None:
            self._leaves = frozenset((self,))
        return self._leaves


class Var(Expr):
    """``x_name`` differentiated ``order`` times."""

    __slots__ = ()
    rank = 3

    @property
    def name(self) -> str:
        return self._args[0]

    @property
    def order(self) -> int:
        return self._args[1]

    def _make_sort_key(self):
        return (3, _natural(self._args[0]), self._args[1])

    @property
    def leaves(self):
        if self._leaves is None:
            self._leaves = frozenset((self,))
        return self._leaves


class Func(Expr):
    __slots__ = ()
    rank = 4

    @property
    def name(self) -> str:
        return self._args[0]

    @property
    def arg(self) -> Expr:
        return self._args[1]

    @property
    def children(self):
        return (self._args[1],)

    def _make_sort_key(self):
        return (4, self._args[0], self._args[1].sort_key)


class Pow(Expr):
    __slots__ = ()
    rank = 5

    @property
    def base(self) -> Expr:
        return self._args[0]

    @property
    def exp(self) -> Fraction:
        return self._args[1]

    @property
    def children(self):
        return (self._args[0],)

    def _make_sort_key(self):
        return (5, self._args[0].sort_key, self._args[1])


class Mul(Expr):
    __slots__ = ()
    rank = 6

    @property
    def factors(self) -> tuple:
        return self._args

    @property
    def children(self):
        return self._args

    def _make_sort_key(self):
        return (6, tuple(f.sort_key for f in self._args))


class Add(Expr):
    __slots__ = ()
    rank = 7

    @property
    def terms(self) -> tuple:
        return self._args

    @property
    def children(self):
        return self._args

    def _make_sort_key(self):
        return (7, tuple(f.sort_key for f in self._args))


def _rebuild_from(clsname, args):
    return {"Const": Const, "Param": Param, "Time": Time, "Var": Var,
            "Func": Func, "Pow": Pow, "Mul": Mul, "Add": Add}[clsname](*args)


ZERO = Const(Fraction(0))
ONE = Const(Fraction(1))
MINUS_ONE = Const(Fraction(-1))
T = Time()


# ----------------------------------------------------------------------
# smart constructors


def to_fraction(v) -> Fraction:
    if isinstance(v, Fraction):
        return v
    if isinstance(v, bool):
        raise TypeError("booleans are not expressions")
    if isinstance(v, int):
        return Fraction(v)
    if isinstance(v, float):
        if not math.isfinite(v):
            raise ValueError(f"non-finite constant {v!r}")
        # shortest repr keeps user-visible decimals exact
        return Fraction(repr(v))
    if isinstance(v, str):
        return Fraction(v)
    raise TypeError(f"cannot convert {type(v).__name__} to a constant")


def const(v) -> Const:
    return Const(to_fraction(v))


def as_expr(v) -> Expr:
    if isinstance(v, Expr):
        return v
    return const(v)


def var(name: str, order: int = 0) -> Var:
    if order < 0:
        raise ValueError("derivative orders are nonnegative")
    return Var(name, int(order))


def param(name: str) -> Param:
    return Param(name)


def _split_coef(term: Expr):
    if type(term) is Mul and type(term._args[0]) is Const:
        rest = term._args[1:]
        return term._args[0]._args[0], (rest[0] if len(rest) == 1 else Mul(*rest))
    return Fraction(1), term


def _scale(rest: Expr, coef: Fraction) -> Expr:
    if coef == 1:
        return rest
    if type(rest) is Mul:
        return Mul(Const(coef), *rest._args)
    return Mul(Const(coef), rest)


def _trig_square(factor):
    if type(factor) is Pow and factor._args[1] == 2 and type(factor._args[0]) is Func:
        fn = factor._args[0]
        if fn._args[0] in ("sin", "cos"):
            return fn._args[0], fn._args[1]
    return None


def _without(rest: Expr, factor: Expr) -> Expr:
    if rest is factor:
        return ONE
    fs = list(rest._args)
    fs.remove(factor)
    if not fs:
        return ONE
    return fs[0] if len(fs) == 1 else Mul(*fs)


def _merge_trig(terms: dict) -> Fraction:
    """Collapse sin^2+cos^2 pairs in place; returns the constant produced."""
    produced = Fraction(0)
    changed = True
    while changed:
        changed = False
        for rest in list(terms):
            if rest not in terms:
                continue
            factors = rest._args if type(rest) is Mul else (rest,)
            for f in factors:
                ts = _trig_square(f)
                if ts is None or ts[0] != "sin":
                    continue
                others = _without(rest, f)
                partner = mul(others, power(func("cos", ts[1]), 2))
                partner_coef, partner_rest = _split_coef(partner)
                coef = terms[rest]
                if partner_rest in terms and terms[partner_rest] * partner_coef == coef:
                    del terms[rest]
                    del terms[partner_rest]
                    c2, r2 = _split_coef(others)
                    if type(r2) is Const:
                        produced += coef * c2 * r2._args[0]
                    else:
                        terms[r2] = terms.get(r2, Fraction(0)) + coef * c2
                        if terms[r2] == 0:
                            del terms[r2]
                    changed = True
                    break
    return produced


def add(*args) -> Expr:
    c = Fraction(0)
    terms: dict = {}
    for a in args:
        a = as_expr(a)
        for term in (a._args if type(a) is Add else (a,)):
            if type(term) is Const:
                c += term._args[0]
                continue
            coef, rest = _split_coef(term)
            terms[rest] = terms.get(rest, Fraction(0)) + coef
    terms = {r: k for r, k in terms.items() if k != 0}
    if len(terms) > 1:
        c += _merge_trig(terms)
    out = [_scale(r, k) for r, k in terms.items()]
    out.sort(key=lambda e: e.sort_key)
    if c != 0:
        out.insert(0, Const(c))
    if not out:
        return ZERO
    if len(out) == 1:
        return out[0]
    return Add(*out)


def mul(*args) -> Expr:
    c = Fraction(1)
    powers: dict = {}
    for a in args:
        a = as_expr(a)
        for f in (a._args if type(a) is Mul else (a,)):
            tf = type(f)
            if tf is Const:
                c *= f._args[0]
            elif tf is Pow:
                powers[f._args[0]] = powers.get(f._args[0], Fraction(0)) + f._args[1]
            else:
                powers[f] = powers.get(f, Fraction(0)) + 1
    if c == 0:
        return ZERO
    out = []
    for base, e in powers.items():
        if e == 0:
            continue
        if e == 1:
            out.append(base)
            continue
        p = power(base, e)
        if type(p) is Const:
            c *= p._args[0]
        elif type(p) is Mul:
            for f in p._args:
                if type(f) is Const:
                    c *= f._args[0]
                else:
                    out.append(f)
        else:
            out.append(p)
    out.sort(key=lambda e: e.sort_key)
    if not out:
        return Const(c)
    if c == 1:
        return out[0] if len(out) == 1 else Mul(*out)
    return Mul(Const(c), *out)


def _exact_root(v: Fraction, q: int):
    if v < 0 and q % 2 == 0:
        return None
    sign = -1 if v < 0 else 1
    out = []
    for part in (abs(v.numerator), v.denominator):
        r = round(part ** (1.0 / q))
        for cand in (r - 1, r, r + 1):
            if cand >= 0 and cand**q == part:
                out.append(cand)
                break
        else:
            return None
    return sign * Fraction(out[0], out[1])


def power(base, e) -> Expr:
    base = as_expr(base)
    if isinstance(e, Expr):
        if type(e) is not Const:
            raise ValueError("only constant exponents are supported")
        e = e._args[0]
    e = to_fraction(e)
    if e == 0:
        return ONE
    if e == 1:
        return base
    tb = type(base)
    if tb is Const:
        v = base._args[0]
        if e.denominator == 1:
            if v == 0 and e < 0:
                raise ZeroDivisionError("division by literal zero")
            return Const(v ** int(e))
        if v == 0:
            return ZERO
        root = _exact_root(v, e.denominator)
        if root is not None:
            return Const(root ** e.numerator)
        return Pow(base, e)
    if tb is Pow and e.denominator == 1:
        return power(base._args[0], base._args[1] * e)
    if tb is Mul and e.denominator == 1:
        return mul(*[power(f, e) for f in base._args])
    return Pow(base, e)


def neg(a) -> Expr:
    return mul(MINUS_ONE, a)


def sub(a, b) -> Expr:
    return add(a, neg(b))


def div(a, b) -> Expr:
    b = as_expr(b)
    if b is ZERO:
        raise ZeroDivisionError("division by literal zero")
    return mul(a, power(b, -1))


def func(name: str, arg) -> Expr:
    if name not in FUNCTIONS:
        raise ValueError(f"unknown function {name!r}")
    arg = as_expr(arg)
    if type(arg) is Const:
        v = arg._args[0]
        if v == 0 and name in ("sin", "tan", "tanh", "sqrt"):
            return ZERO
        if v == 0 and name in ("cos", "exp"):
            return ONE
        if v == 1 and name == "log":
            return ZERO
        if name == "sqrt":
            if v < 0:
                raise ValueError("sqrt of a negative constant")
            root = _exact_root(v, 2)
            if root is not None:
                return Const(root)
    return Func(name, arg)


def sin(a):
    return func("sin", a)


def cos(a):
    return func("cos", a)


def tan(a):
    return func("tan", a)


def exp(a):
    return func("exp", a)


def log(a):
    return func("log", a)


def tanh(a):
    return func("tanh", a)


def sqrt(a):
    return func("sqrt", a)


# ----------------------------------------------------------------------
# traversal


def rebuild(node: Expr, children) -> Expr:
    t = type(node)
    if t is Add:
        return add(*children)
    if t is Mul:
        return mul(*children)
    if t is Pow:
        return power(children[0], node._args[1])
    if t is Func:
        return func(node._args[0], children[0])
    return node


def variables(e: Expr) -> frozenset:
    return frozenset(v for v in e.leaves if type(v) is Var)


def derivative_orders(e: Expr, name: str) -> list:
    """Orders k such that x_name^(k) occurs syntactically, descending."""
    return sorted({v.order for v in e.leaves if type(v) is Var and v.name == name}, reverse=True)


def max_order(e: Expr) -> int:
    return max((v.order for v in e.leaves if type(v) is Var), default=0)


def params_of(e: Expr) -> set:
    out = set()
    stack = [e]
    seen = set()
    while stack:
        n = stack.pop()
        if n in seen:
            continue
        seen.add(n)
        if type(n) is Param:
            out.add(n._args[0])
        stack.extend(n.children)
    return out


def substitute(e: Expr, mapping: Mapping) -> Expr:
    """Simultaneously replace leaves (``Var``/``T``) by expressions.

    Keys may be ``Var`` nodes, ``(name, order)`` tuples or ``T``.  Inserted
    expressions are not substituted into again.
    """
    if not mapping:
        return e
    m = {}
    for k, v in mapping.items():
        if isinstance(k, tuple):
            k = var(*k)
        m[k] = as_expr(v)
    keys = frozenset(m)
    memo: dict = {}

    def rec(n):
        got = memo.get(n)
        if got is not None:
            return got
        if n in m:
            out = m[n]
        elif not (n.leaves & keys):
            out = n
        else:
            out = rebuild(n, [rec(c) for c in n.children])
        memo[n] = out
        return out

    return rec(e)


def substitute_params(e: Expr, values: Mapping[str, Number]) -> Expr:
    memo: dict = {}

    def rec(n):
        got = memo.get(n)
        if got is not None:
            return got
        if type(n) is Param and n._args[0] in values:
            out = const(values[n._args[0]])
        elif not n.children:
            out = n
        else:
            out = rebuild(n, [rec(c) for c in n.children])
        memo[n] = out
        return out

    return rec(e)


# ----------------------------------------------------------------------
# differentiation


def _fprime(name: str, u: Expr) -> Expr:
    if name == "sin":
        return cos(u)
    if name == "cos":
        return neg(sin(u))
    if name == "tan":
        return add(1, power(tan(u), 2))
    if name == "exp":
        return exp(u)
    if name == "log":
        return power(u, -1)
    if name == "tanh":
        return sub(1, power(tanh(u), 2))
    if name == "sqrt":
        return mul(Fraction(1, 2), power(sqrt(u), -1))
    raise ValueError(name)


def _chain(e: Expr, d) -> Expr:
    """Differentiate ``e`` given the derivative rule ``d`` for children."""
    t = type(e)
    if t is Add:
        return add(*[d(c) for c in e._args])
    if t is Mul:
        fs = e._args
        out = []
        for i, f in enumerate(fs):
            df = d(f)
            if df is ZERO:
                continue
            out.append(mul(df, *fs[:i], *fs[i + 1:]))
        return add(*out)
    if t is Pow:
        b, k = e._args
        db = d(b)
        if db is ZERO:
            return ZERO
        return mul(Const(k), power(b, k - 1), db)
    if t is Func:
        du = d(e._args[1])
        if du is ZERO:
            return ZERO
        return mul(_fprime(e._args[0], e._args[1]), du)
    return ZERO


@lru_cache(maxsize=None)
def _partial(e: Expr, v: Expr) -> Expr:
    if v not in e.leaves:
        return ZERO
    if e is v:
        return ONE
    return _chain(e, lambda c: _partial(c, v))


def partial(e: Expr, j, k: int | None = None) -> Expr:
    """Partial derivative treating every ``x_j^(k)`` as an independent coordinate.

    ``partial(e, "x1", 1)`` or ``partial(e, var("x1", 1))``; ``partial(e, T)``
    differentiates in the explicit time argument only.
    """
    if isinstance(j, Expr):
        v = j
    else:
        if k is None or k < 0:
            return ZERO
        v = Var(j, int(k))
    return _partial(e, v)


@lru_cache(maxsize=None)
def _dt(e: Expr) -> Expr:
    t = type(e)
    if t is Var:
        return Var(e._args[0], e._args[1] + 1)
    if t is Time:
        return ONE
    if not e.leaves:
        return ZERO
    return _chain(e, _dt)


def total_derivative(e: Expr, times: int = 1) -> Expr:
    """``e`` differentiated ``times`` times along trajectories (chain rule in t)."""
    if times < 0:
        raise ValueError("times must be nonnegative")
    for _ in range(times):
        e = _dt(e)
    return e


# ----------------------------------------------------------------------
# normalisation


@lru_cache(maxsize=None)
def expand(e: Expr) -> Expr:
    """Distribute products (and small positive integer powers) over sums."""
    t = type(e)
    if t is Add:
        return add(*[expand(c) for c in e._args])
    if t is Func:
        return func(e._args[0], expand(e._args[1]))
    if t is Pow:
        b = expand(e._args[0])
        k = e._args[1]
        if type(b) is Add and k.denominator == 1 and 1 < k <= 6:
            out = b
            for _ in range(int(k) - 1):
                out = _distribute([out, b])
            return out
        return power(b, k)
    if t is Mul:
        return _distribute([expand(c) for c in e._args])
    return e


def _distribute(factors) -> Expr:
    partial_terms = [ONE]
    for f in factors:
        opts = f._args if type(f) is Add else (f,)
        partial_terms = [mul(a, b) for a in partial_terms for b in opts]
    return add(*partial_terms)


def simplify(e: Expr, growth: int = 4) -> Expr:
    """Canonical rebuild plus expansion when expansion does not blow up.

    Idempotent: the expanded form is a fixed point of :func:`expand`, and an
    expression left unexpanded is rejected again for the same reason.
    """
    e = _rebuild_all(e)
    ex = expand(e)
    if ex.size <= max(growth * e.size, 64):
        return ex
    return e


def _rebuild_all(e: Expr) -> Expr:
    memo: dict = {}

    def rec(n):
        got = memo.get(n)
        if got is None:
            got = rebuild(n, [rec(c) for c in n.children]) if n.children else n
            memo[n] = got
        return got

    return rec(e)


def structurally_equal(a: Expr, b: Expr) -> bool:
    """Equality of expanded canonical forms (no identities beyond the rewrites)."""
    return expand(sub(a, b)) is ZERO


def is_zero_literal(e: Expr) -> bool:
    return e is ZERO


def iter_nodes(e: Expr) -> Iterable[Expr]:
    seen = set()
    stack = [e]
    while stack:
        n = stack.pop()
        if n in seen:
            continue
        seen.add(n)
        yield n
        stack.extend(n.children)
