"""Plain-text rendering of expressions in the DaeFile expression syntax."""

from __future__ import annotations

from decimal import Decimal
from fractions import Fraction

from .expr import Add, Const, Func, Mul, Param, Pow, Time, Var

_ADD, _MUL, _NEG, _POW, _ATOM = 1, 2, 2, 3, 4


def format_number(v: Fraction) -> str:
    """Exact text for a rational: a decimal when one exists, else ``(p/q)``."""
    q = v.denominator
    twos = fives = 0
    while q % 2 == 0:
        q //= 2
        twos += 1
    while q % 5 == 0:
        q //= 5
        fives += 1
    if q != 1:
        return f"({v.numerator}/{v.denominator})"
    k = max(twos, fives)
    d = (Decimal(v.numerator * 10**k // v.denominator).scaleb(-k)).normalize()
    a = abs(d)
    if d == 0:
        return "0"
    if Decimal("1e-4") <= a < Decimal("1e16"):
        return format(d, "f")
    return format(d, "e").replace("e+", "e")


def var_text(name: str, order: int) -> str:
    if order <= 3:
        return name + "'" * order
    return f"der({name}, {order})"


def _wrap(text: str, prec: int, need: int) -> str:
    return f"({text})" if prec < need else text


def _render(e) -> tuple:
    """Returns (text, precedence); negative leading constants are reported via _NEG."""
    t = type(e)
    if t is Const:
        v = e.value
        s = format_number(abs(v))
        if v < 0:
            return "-" + s, _NEG
        return s, _ATOM
    if t is Time:
        return "t", _ATOM
    if t is Param:
        return e.name, _ATOM
    if t is Var:
        return var_text(e.name, e.order), _ATOM
    if t is Func:
        return f"{e.name}({_render(e.arg)[0]})", _ATOM
    if t is Pow:
        if e.exp < 0:
            return _render_mul([], [e], Fraction(1))
        return _pow_text(e.base, e.exp), _POW
    if t is Mul:
        fs = list(e.factors)
        coef = Fraction(1)
        if type(fs[0]) is Const:
            coef = fs.pop(0).value
        return _render_mul(fs, [], coef)
    if t is Add:
        parts = []
        for i, term in enumerate(e.terms):
            s, p = _render(term)
            if s.startswith("-"):
                body = s[1:]
                parts.append(("-" if i == 0 else " - ") + body)
            else:
                parts.append(("" if i == 0 else " + ") + s)
        return "".join(parts), _ADD
    raise TypeError(type(e))


def _pow_text(base, k: Fraction) -> str:
    bs, bp = _render(base)
    bs = _wrap(bs, bp, _ATOM)
    ks = str(k.numerator) if k.denominator == 1 else f"({k.numerator}/{k.denominator})"
    return f"{bs}^{ks}"


def _render_mul(fs, extra_den, coef: Fraction) -> tuple:
    num, den = [], []
    for f in fs + extra_den:
        if type(f) is Pow and f.exp < 0:
            den.append(f.base if f.exp == -1 else _PowProxy(f.base, -f.exp))
        else:
            num.append(f)
    sign = "-" if coef < 0 else ""
    coef = abs(coef)
    num_txt = []
    if coef != 1 or not num:
        num_txt.append(format_number(coef))
    for f in num:
        s, p = _factor_text(f)
        num_txt.append(_wrap(s, p, _MUL + 1))
    text = "*".join(num_txt)
    if den:
        den_txt = []
        for f in den:
            s, p = _factor_text(f)
            den_txt.append(_wrap(s, p, _MUL + 1))
        d = "*".join(den_txt)
        text += "/" + (f"({d})" if len(den_txt) > 1 else d)
    if sign:
        return "-" + text, _NEG
    return text, _MUL


class _PowProxy:
    __slots__ = ("base", "exp")

    def __init__(self, base, exp):
        self.base = base
        self.exp = exp


def _factor_text(f) -> tuple:
    if isinstance(f, _PowProxy):
        return _pow_text(f.base, f.exp), _POW
    s, p = _render(f)
    if s.startswith("-"):
        return s, _NEG - 1
    return s, p


def to_text(e) -> str:
    return _render(e)[0]
