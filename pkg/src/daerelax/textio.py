"""Text formats: DAE files, trajectory fixtures and JSON reports.

DAE file statements (``#`` starts a comment)::

    param R0 = 1000;
    var x1, x2;
    aux y_1_1;                    # only in files written after augmentation
    let g2 = beta*(exp((x2 - x3)/UF) - 1);
    point { t = 0; x1 = 0; x1' = 51.3; der(x1, 4) = 0; }
    eq x1' - g2 = 0;

Derivatives are written with postfix primes or ``der(x, k)``; ``t`` is time
and ``pi`` is a builtin constant.
"""

from __future__ import annotations

import json
import math
import re
from fractions import Fraction
from typing import Mapping

import numpy as np

from .errors import DaeSyntaxError, NonSquareSystem, UnknownSymbol
from .expr import FUNCTIONS, T, Const, Expr, add, const, div, func, mul, neg, param, power, sub, var
from .model import DaeSystem, TrajectoryFixture
from .numeric import NEG_INF, Point
from .printer import to_text, var_text

SCHEMA_VERSION = "daerelax-report/1"

_TOKEN = re.compile(r"""
    (?P<ws>[ \t\r]+|\#[^\n]*|//[^\n]*)
  | (?P<nl>\n)
  | (?P<num>(\d+\.\d*|\.\d+|\d+)([eE][+-]?\d+)?)
  | (?P<id>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>[-+*/^(){}=;,':\[\]])
""", re.VERBOSE)


class _Tok:
    __slots__ = ("kind", "text", "line", "col")

    def __init__(self, kind, text, line, col):
        self.kind, self.text, self.line, self.col = kind, text, line, col

    def __repr__(self):
        return f"{self.kind}:{self.text}@{self.line}:{self.col}"


def tokenize(text: str) -> list:
    out = []
    line, start, pos = 1, 0, 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            raise DaeSyntaxError(f"unexpected character {text[pos]!r}", line, pos - start + 1)
        kind = m.lastgroup
        if kind == "nl":
            line += 1
            start = m.end()
        elif kind != "ws":
            out.append(_Tok(kind, m.group(), line, m.start() - start + 1))
        pos = m.end()
    out.append(_Tok("eof", "", line, pos - start + 1))
    return out


class _Parser:
    def __init__(self, text: str):
        self.toks = tokenize(text)
        self.i = 0
        self.params: dict = {}
        self.vars: list = []
        self.aux: list = []
        self.lets: dict = {}
        self.cf_names: set = set()

    # token helpers ---------------------------------------------------
    @property
    def tok(self) -> _Tok:
        return self.toks[self.i]

    def error(self, msg, tok=None, cls=DaeSyntaxError):
        tok = tok or self.tok
        raise cls(msg, tok.line, tok.col)

    def next(self) -> _Tok:
        t = self.tok
        self.i += 1
        return t

    def accept(self, text) -> bool:
        if self.tok.kind in ("op", "id") and self.tok.text == text:
            self.i += 1
            return True
        return False

    def expect(self, text) -> _Tok:
        if not (self.tok.kind in ("op", "id") and self.tok.text == text):
            self.error(f"expected {text!r}, found {self.tok.text or 'end of input'!r}")
        return self.next()

    def ident(self) -> _Tok:
        if self.tok.kind != "id":
            self.error(f"expected an identifier, found {self.tok.text or 'end of input'!r}")
        return self.next()

    # expressions -----------------------------------------------------
    def expr(self) -> Expr:
        e = self.term()
        while self.tok.kind == "op" and self.tok.text in "+-":
            op = self.next().text
            rhs = self.term()
            e = add(e, rhs) if op == "+" else sub(e, rhs)
        return e

    def term(self) -> Expr:
        e = self.unary()
        while self.tok.kind == "op" and self.tok.text in "*/":
            op = self.next()
            rhs = self.unary()
            if op.text == "*":
                e = mul(e, rhs)
            else:
                if rhs is const(0):
                    self.error("division by zero", op)
                e = div(e, rhs)
        return e

    def unary(self) -> Expr:
        if self.tok.kind == "op" and self.tok.text in "+-":
            op = self.next().text
            e = self.unary()
            return neg(e) if op == "-" else e
        return self.power()

    def power(self) -> Expr:
        base = self.postfix()
        if self.tok.kind == "op" and self.tok.text == "^":
            op = self.next()
            ex = self.unary()
            if not isinstance(ex, Const):
                self.error("exponents must be constant", op)
            try:
                return power(base, ex.value)
            except ZeroDivisionError:
                self.error("division by zero", op)
        return base

    def postfix(self) -> Expr:
        tok = self.tok
        e, is_var = self.primary()
        primes = 0
        while self.tok.kind == "op" and self.tok.text == "'":
            self.next()
            primes += 1
        if primes:
            if not is_var:
                self.error("primes apply to variables only", tok)
            e = var(e.name, e.order + primes)
        return e

    def primary(self):
        tok = self.tok
        if tok.kind == "num":
            self.next()
            return const(Fraction(tok.text)), False
        if tok.kind == "op" and tok.text == "(":
            self.next()
            e = self.expr()
            self.expect(")")
            return e, False
        if tok.kind != "id":
            self.error(f"unexpected {tok.text or 'end of input'!r}")
        name = self.next().text
        if name in FUNCTIONS:
            self.expect("(")
            a = self.expr()
            self.expect(")")
            try:
                return func(name, a), False
            except ValueError as exc:
                self.error(str(exc), tok)
        if name == "der":
            self.expect("(")
            vt = self.ident()
            self.expect(",")
            kt = self.tok
            if kt.kind != "num" or not kt.text.isdigit():
                self.error("derivative order must be a nonnegative integer")
            self.next()
            self.expect(")")
            if vt.text not in self.vars and vt.text not in self.aux and vt.text not in self.cf_names:
                self.error(f"unknown variable {vt.text!r}", vt, UnknownSymbol)
            return var(vt.text, int(kt.text)), True
        if name == "t":
            return T, False
        if name in self.vars or name in self.aux or name in self.cf_names:
            return var(name), True
        if name in self.params or name == "pi":
            return param(name), False
        if name in self.lets:
            return self.lets[name], False
        self.error(f"unknown identifier {name!r}", tok, UnknownSymbol)

    def number(self) -> float:
        e = self.expr()
        try:
            from .numeric import evaluate
            return float(evaluate(e, Point(0.0, {}), self.params))
        except Exception:
            self.error("expected a constant")

    # statements ------------------------------------------------------
    def declare(self, name_tok):
        name = name_tok.text
        if name in FUNCTIONS or name in ("t", "pi", "der") or name in self.params \
                or name in self.vars or name in self.aux or name in self.lets:
            self.error(f"{name!r} is already defined or reserved", name_tok)

    def point_block(self) -> Point:
        self.expect("{")
        t = 0.0
        values = {}
        while not self.accept("}"):
            tok = self.tok
            if self.accept("t"):
                self.expect("=")
                t = self.number()
            else:
                lhs = self.postfix()
                if lhs.rank != 3:
                    self.error("point entries must be variables or derivatives", tok)
                self.expect("=")
                values[(lhs.name, lhs.order)] = self.number()
            self.expect(";")
        return Point(t, values)


def parse_dae(text: str, require_square: bool = False) -> DaeSystem:
    ps = _Parser(text)
    eqs = []
    point = None
    while ps.tok.kind != "eof":
        kw = ps.ident()
        if kw.text == "param":
            name = ps.ident()
            ps.declare(name)
            ps.expect("=")
            ps.params[name.text] = ps.number()
        elif kw.text in ("var", "aux"):
            target = ps.vars if kw.text == "var" else ps.aux
            while True:
                name = ps.ident()
                ps.declare(name)
                target.append(name.text)
                if not ps.accept(","):
                    break
        elif kw.text == "let":
            name = ps.ident()
            ps.declare(name)
            ps.expect("=")
            ps.lets[name.text] = ps.expr()
        elif kw.text == "point":
            if point is not None:
                ps.error("only one point block is allowed", kw)
            point = ps.point_block()
            ps.accept(";")
            continue
        elif kw.text == "eq":
            lhs = ps.expr()
            ps.expect("=")
            rhs = ps.expr()
            eqs.append(sub(lhs, rhs))
        else:
            ps.error(f"unknown statement {kw.text!r}", kw)
        ps.expect(";")
    sys = DaeSystem(eqs, ps.vars, ps.params, point, ps.aux)
    if require_square and not sys.is_square:
        raise NonSquareSystem(f"{sys.n} equations for {len(sys.columns)} unknowns")
    return sys


def _num(v: float) -> str:
    return repr(float(v))


def serialize_dae(sys: DaeSystem) -> str:
    lines = []
    for name, v in sys.params.items():
        lines.append(f"param {name} = {_num(v)};")
    if sys.variables:
        lines.append("var " + ", ".join(sys.variables) + ";")
    if sys.aux_vars:
        lines.append("aux " + ", ".join(sys.aux_vars) + ";")
    if sys.base_point is not None:
        bp = sys.base_point
        lines.append("point {")
        lines.append(f"  t = {_num(bp.t)};")
        for (name, k), v in bp.values.items():
            lines.append(f"  {var_text(name, k)} = {_num(v)};")
        lines.append("}")
    for e in sys.equations:
        lines.append(f"eq {to_text(e)} = 0;")
    return "\n".join(lines) + "\n"


def load_dae(path) -> DaeSystem:
    with open(path, encoding="utf-8") as fh:
        return parse_dae(fh.read())


# ----------------------------------------------------------------------
# trajectory fixtures


def _grid(ps: _Parser) -> tuple:
    if ps.accept("["):
        vals = [ps.number()]
        while ps.accept(","):
            vals.append(ps.number())
        ps.expect("]")
        return tuple(vals)
    a = ps.number()
    ps.expect(":")
    h = ps.number()
    ps.expect(":")
    b = ps.number()
    if h <= 0 or b < a:
        ps.error("grid must be increasing with a positive step")
    count = int(math.floor((b - a) / h + 1e-9)) + 1
    return tuple(float(x) for x in a + h * np.arange(count))


def parse_fixture(text: str, params: Mapping | None = None) -> TrajectoryFixture:
    ps = _Parser(text)
    ps.params = dict(params or {})
    ps.expect("trajectory")
    ps.expect("{")
    closed = {}
    grid = None
    while not ps.accept("}"):
        name = ps.ident()
        ps.expect("=")
        if name.text == "grid":
            grid = _grid(ps)
        else:
            if name.text in closed:
                ps.error(f"duplicate closed form for {name.text!r}", name)
            closed[name.text] = ps.expr()
        ps.expect(";")
    ps.accept(";")
    if ps.tok.kind != "eof":
        ps.error("unexpected text after the trajectory block")
    if grid is None:
        raise DaeSyntaxError("trajectory has no grid")
    return TrajectoryFixture(closed, grid)


def load_fixture(path, params: Mapping | None = None) -> TrajectoryFixture:
    with open(path, encoding="utf-8") as fh:
        return parse_fixture(fh.read(), params)


# ----------------------------------------------------------------------
# JSON reports


def _sig(sig) -> list:
    return [[None if c == NEG_INF else int(c) for c in row] for row in sig.entries]


def _delta(d):
    return None if d == NEG_INF else int(d)


def report_to_dict(report, source: str | None = None, options: Mapping | None = None,
                   residual_check: Mapping | None = None) -> dict:
    its = []
    for it in report.iterations:
        d = {
            "iteration": it.index,
            "signature": _sig(it.signature),
            "p": list(it.dual.p),
            "q": list(it.dual.q),
            "delta_hat": _delta(it.dual.delta_hat),
            "verdict": it.verdict,
            "structural_rank": it.structural_rank,
            "term_rank": it.term_rank,
        }
        if it.pivot is not None:
            d["pivot"] = it.pivot.one_based()
        if it.step is not None:
            st = it.step
            d["method"] = it.method
            if it.fallback_reason:
                d["fallback_reason"] = it.fallback_reason
            d["delta_hat_after"] = _delta(st.delta_after)
            if it.method == "augmentation":
                d["xi"] = {var_text(n, k): v for (n, k), v in st.xi.items()}
                d["aux"] = list(st.new_aux)
                d["new_equations"] = [to_text(st.new_system.equations[i])
                                      for i in (st.pivot.r,) + st.copy_rows]
            else:
                d["new_equations"] = [to_text(st.new_fr)]
                if st.explicit_map:
                    d["explicit_map"] = {str(k): to_text(v) for k, v in st.explicit_map.items()}
        its.append(d)
    out = {
        "schema": SCHEMA_VERSION,
        "source": source,
        "options": dict(options or {}),
        "final_status": report.final_status,
        "error": report.error,
        "error_type": report.error_type,
        "iterations": its,
        "final_system": serialize_dae(report.final_system),
        "final_size": report.final_system.n,
        "final_structural_rank": report.final_structural_rank,
        "final_determinant_at_base_point": report.final_determinant,
    }
    if report.final_dual is not None:
        out["final_dual"] = {"p": list(report.final_dual.p), "q": list(report.final_dual.q),
                             "delta_hat": _delta(report.final_dual.delta_hat)}
    if residual_check is not None:
        out["residual_check"] = dict(residual_check)
    return out


def dump_report(data: Mapping, path=None) -> str:
    text = json.dumps(data, indent=2, sort_keys=False)
    if path is not None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    return text
