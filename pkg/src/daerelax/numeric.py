"""Floating-point evaluation and the probabilistic zero test.

Evaluation is vectorised over K sample points and runs twice, in float64
and in extended precision.  The gap between the two, measured in units of the
float64 roundoff, is the error scale of a value.  An expression is declared
identically zero unless its value clears ``tolerance * error_scale`` at a
majority of the samples: a true zero leaves only rounding noise, which the extended evaluation
shrinks by three orders of magnitude, while a nonzero value agrees in both to
many digits.  The test is insensitive to the physical scale of parameters
such as ``C1 = 1e-6`` or ``R = 25000`` and to symbolically cancelling terms
whose a-priori error bounds would be huge.

Sample coordinates are drawn per leaf from a generator seeded with the leaf's
label, so the same leaf receives the same sample in every expression tested
with the same configuration.  Elimination steps rely on this consistency.
"""

from __future__ import annotations

import math
import zlib
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import DaeError, SampleDomainError
from .expr import Add, Const, Expr, Func, Mul, Param, Pow, Time, Var, partial, derivative_orders, ZERO

NEG_INF = -math.inf
MAX_SAMPLE_ATTEMPTS = 60
# each redraw samples from a ball this much smaller around the centre
RADIUS_SHRINK = 0.5
# beyond this |argument| exp and tanh absorb every smaller term even in
# extended precision, so a sample is too badly scaled to judge zeros
SCALE_ARG_LIMIT = 15.0
BUILTIN_PARAMS = {"pi": math.pi}


@dataclass(frozen=True)
class ZeroTestConfig:
    samples: int = 8
    radius: float = 1.0
    tolerance: float = 1e-10
    seed: int = 0

    def __post_init__(self):
        if self.samples < 1:
            raise ValueError("samples must be at least 1")
        if not self.tolerance > 0:
            raise ValueError("tolerance must be positive")
        if not self.radius > 0:
            raise ValueError("radius must be positive")

    def reseeded(self, k: int) -> "ZeroTestConfig":
        return ZeroTestConfig(self.samples, self.radius, self.tolerance, self.seed + 7919 * k)


@dataclass(frozen=True)
class Point:
    """A value for ``t`` and for variables keyed by ``(name, order)``."""

    t: float = 0.0
    values: Mapping = field(default_factory=dict)

    def __post_init__(self):
        items = sorted(((str(k[0]), int(k[1])), float(v)) for k, v in dict(self.values).items())
        object.__setattr__(self, "values", dict(items))

    def get(self, leaf, default=None):
        if type(leaf) is Time:
            return self.t
        return self.values.get((leaf.name, leaf.order), default)

    def with_values(self, extra: Mapping) -> "Point":
        merged = dict(self.values)
        merged.update(extra)
        return Point(self.t, merged)

    def __hash__(self):
        return hash((self.t, tuple(self.values.items())))


def leaf_label(leaf) -> str:
    if type(leaf) is Time:
        return "t"
    return f"{leaf.name}#{leaf.order}"


def param_value(name: str, params: Mapping) -> float:
    if name in params:
        return float(params[name])
    if name in BUILTIN_PARAMS:
        return BUILTIN_PARAMS[name]
    raise DaeError(f"no value bound to parameter {name!r}")


# ----------------------------------------------------------------------
# vectorised evaluation


_FUNCS = {
    "sin": np.sin,
    "cos": np.cos,
    "tan": np.tan,
    "exp": np.exp,
    "log": np.log,
    "tanh": np.tanh,
    "sqrt": np.sqrt,
}

HI = np.longdouble
EPS = float(np.finfo(float).eps)
# a divisor (or log/sqrt argument) counts as degenerate at a sample when fewer
# than this many leading digits of its two evaluations agree
_DEGENERATE_REL = 1e-6


def error_scale(lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    """Observed float64 error of ``lo`` against ``hi``, in units of the roundoff."""
    with np.errstate(all="ignore"):
        return np.abs((lo - hi).astype(float)) / EPS


def _hi_const(x) -> np.longdouble:
    x = Fraction(x)
    return HI(x.numerator) / HI(x.denominator)


class Evaluator:
    """Evaluates many expressions over shared sample arrays with a common memo.

    Every node is computed twice, in float64 and in extended precision, from
    the same float64 inputs.  The two results share the exact function being
    evaluated, so their difference estimates the float64 rounding error.
    """

    def __init__(self, env: Mapping, params: Mapping, k: int, guard_scale: bool = False):
        self.env = env
        self.params = params
        self.k = k
        # flag samples whose exp/tanh arguments are too large to judge zeros
        self.guard_scale = guard_scale
        self.memo: dict = {}
        # samples where a divisor or log/sqrt argument is numerically degenerate
        self.bad = np.zeros(k, dtype=bool)

    def __call__(self, e: Expr):
        """``(value, error_scale)`` of ``e``."""
        lo, hi = self.pair(e)
        return lo, error_scale(lo, hi)

    def pair(self, e: Expr):
        got = self.memo.get(e)
        if got is not None:
            return got
        out = self._eval(e)
        self.memo[e] = out
        return out

    def _degenerate(self, lo, hi):
        with np.errstate(all="ignore"):
            return ~(np.abs(lo - hi) < _DEGENERATE_REL * np.abs(lo))

    def _eval(self, e):
        t = type(e)
        k = self.k
        if t is Const:
            return np.full(k, float(e.value)), np.full(k, _hi_const(e.value), dtype=HI)
        if t is Param:
            v = param_value(e.name, self.params)
            return np.full(k, v), np.full(k, v, dtype=HI)
        if t is Var or t is Time:
            try:
                v = self.env[e]
            except KeyError:
                raise DaeError(f"no value for {leaf_label(e)}") from None
            v = np.broadcast_to(np.asarray(v, dtype=float), (k,))
            return v, v.astype(HI)
        with np.errstate(all="ignore"):
            if t is Add:
                los, his = zip(*(self.pair(c) for c in e.terms))
                return np.sum(los, axis=0), np.sum(his, axis=0)
            if t is Mul:
                los, his = zip(*(self.pair(c) for c in e.factors))
                return np.prod(los, axis=0), np.prod(his, axis=0)
            if t is Pow:
                blo, bhi = self.pair(e.base)
                if e.exp.denominator == 1:
                    n = int(e.exp)
                    if n < 0:
                        self.bad |= self._degenerate(blo, bhi)
                    return np.power(blo, float(n)), np.power(bhi, HI(n))
                self.bad |= self._degenerate(blo, bhi) | (blo <= 0)
                return np.power(blo, float(e.exp)), np.power(bhi, _hi_const(e.exp))
            if t is Func:
                ulo, uhi = self.pair(e.arg)
                f = _FUNCS[e.name]
                if e.name in ("log", "sqrt"):
                    self.bad |= self._degenerate(ulo, uhi) | (ulo <= 0)
                if e.name == "tan":
                    self.bad |= np.abs(np.cos(ulo)) <= 1e-12
                if e.name in ("exp", "tanh") and self.guard_scale:
                    self.bad |= np.abs(ulo) > SCALE_ARG_LIMIT
                return f(ulo), f(uhi)
        raise TypeError(type(e))


def _collect_leaves(exprs: Iterable[Expr]) -> list:
    out = set()
    for e in exprs:
        out |= e.leaves
    return sorted(out, key=lambda n: n.sort_key)


def _draw(leaf, cfg: ZeroTestConfig, base: Point | None, attempt: int, shrink: int = 0) -> np.ndarray:
    radius = cfg.radius * RADIUS_SHRINK ** shrink
    rng = np.random.default_rng([cfg.seed & 0xFFFFFFFFFFFFFFFF, zlib.crc32(leaf_label(leaf).encode()), attempt])
    center = 0.0
    if base is not None:
        got = base.get(leaf)
        if got is not None:
            center = got
    return center + rng.uniform(-radius, radius, cfg.samples)


def sample_pairs(exprs: Sequence[Expr], cfg: ZeroTestConfig, params: Mapping | None = None,
                 base: Point | None = None):
    """Evaluate ``exprs`` at ``cfg.samples`` random points around ``base``.

    Returns ``(lo, hi)`` arrays of shape ``(len(exprs), samples)``: float64
    and extended-precision values.  Samples where any expression is undefined,
    or so badly scaled that small terms vanish in both precisions, are
    redrawn from a ball shrinking geometrically around the centre.  Ranks and
    zeros of analytic functions are the same on every ball.
    """
    params = params or {}
    exprs = list(exprs)
    leaves = _collect_leaves(exprs)
    k = cfg.samples
    lo = np.empty((len(exprs), 0))
    hi = np.empty((len(exprs), 0), dtype=HI)
    attempt = 0
    while lo.shape[1] < k:
        if attempt >= MAX_SAMPLE_ATTEMPTS:
            raise SampleDomainError(
                f"only {lo.shape[1]} of {k} samples inside the domain after {attempt} draws")
        # the first half of the draws also rejects badly scaled samples; if the
        # centre itself is badly scaled the second half starts over without
        guarded = attempt < MAX_SAMPLE_ATTEMPTS // 2
        shrink = attempt if guarded else attempt - MAX_SAMPLE_ATTEMPTS // 2
        env = {leaf: _draw(leaf, cfg, base, attempt, shrink) for leaf in leaves}
        attempt += 1
        ev = Evaluator(env, params, k, guard_scale=guarded)
        if exprs:
            rows = [ev.pair(e) for e in exprs]
            v = np.array([r[0] for r in rows])
            h = np.array([r[1] for r in rows], dtype=HI)
        else:
            v = np.empty((0, k))
            h = np.empty((0, k), dtype=HI)
        ok = ~ev.bad & np.all(np.isfinite(v), axis=0) & np.all(np.isfinite(h), axis=0)
        need = k - lo.shape[1]
        idx = np.flatnonzero(ok)[:need]
        lo = np.concatenate([lo, v[:, idx]], axis=1)
        hi = np.concatenate([hi, h[:, idx]], axis=1)
    return lo, hi


def sample_batch(exprs: Sequence[Expr], cfg: ZeroTestConfig, params: Mapping | None = None,
                 base: Point | None = None):
    """Like :func:`sample_pairs` but returns ``(values, error_scales)``."""
    lo, hi = sample_pairs(exprs, cfg, params, base)
    return lo, error_scale(lo, hi)


def evaluate(e: Expr, point: Point, params: Mapping | None = None) -> float:
    """Value of ``e`` at a full assignment; missing variables raise ``DaeError``."""
    return evaluate_many([e], point, params)[0]


def evaluate_many(exprs: Sequence[Expr], point: Point, params: Mapping | None = None) -> np.ndarray:
    params = params or {}
    env = {}
    for leaf in _collect_leaves(exprs):
        v = point.get(leaf)
        if v is None:
            raise DaeError(f"point has no value for {leaf_label(leaf)}")
        env[leaf] = v
    ev = Evaluator(env, params, 1)
    return np.array([float(ev.pair(e)[0][0]) for e in exprs])


def evaluate_on_grid(exprs: Sequence[Expr], env: Mapping, params: Mapping | None, k: int):
    """Evaluate with caller-provided leaf arrays of length ``k``; returns (values, error_scales)."""
    ev = Evaluator(env, params or {}, k)
    rows = [ev(e) for e in exprs]
    return np.array([r[0] for r in rows]), np.array([r[1] for r in rows])


def sample_votes(vals: np.ndarray, scales: np.ndarray, tol: float) -> np.ndarray:
    """Per-sample evidence: True where the value is certainly nonzero."""
    return np.abs(vals) > tol * scales


def majority_nonzero(votes: np.ndarray, live: np.ndarray | None = None) -> np.ndarray:
    """Nonzero verdict along the last axis: more than half of the live samples vote nonzero.

    A single badly conditioned sample can neither create nor destroy a
    nonzero on its own.
    """
    if live is None:
        return 2 * np.sum(votes, axis=-1) > votes.shape[-1]
    return 2 * np.sum(votes & live, axis=-1) > np.sum(live)


def zero_mask(vals: np.ndarray, scales: np.ndarray, cfg: ZeroTestConfig) -> np.ndarray:
    """Per-row verdict: True where the row is zero."""
    return ~majority_nonzero(sample_votes(vals, scales, cfg.tolerance))


# ----------------------------------------------------------------------
# zero testing and dependence orders


class ZeroTester:
    """Zero test bound to a configuration, parameter values and a sampling centre."""

    def __init__(self, cfg: ZeroTestConfig | None = None, params: Mapping | None = None,
                 base: Point | None = None):
        self.cfg = cfg or ZeroTestConfig()
        self.params = dict(params or {})
        self.base = base
        self._cache: dict = {}

    def is_zero(self, e: Expr) -> bool:
        if e is ZERO:
            return True
        if type(e) is Const:
            return False
        got = self._cache.get(e)
        if got is None:
            got = self.zeros([e])[0]
        return got

    def zeros(self, exprs: Sequence[Expr]) -> list:
        exprs = list(exprs)
        out = [None] * len(exprs)
        todo = []
        for i, e in enumerate(exprs):
            if e is ZERO:
                out[i] = True
            elif type(e) is Const:
                out[i] = False
            elif e in self._cache:
                out[i] = self._cache[e]
            else:
                todo.append(i)
        if todo:
            uniq = list(dict.fromkeys(exprs[i] for i in todo))
            vals, mags = sample_batch(uniq, self.cfg, self.params, self.base)
            verdict = zero_mask(vals, mags, self.cfg)
            for e, z in zip(uniq, verdict):
                self._cache[e] = bool(z)
            for i in todo:
                out[i] = self._cache[exprs[i]]
        return out

    def sample(self, exprs: Sequence[Expr]):
        """``(lo, hi)`` float64 and extended-precision samples of ``exprs``."""
        return sample_pairs(exprs, self.cfg, self.params, self.base)

    def sigma_order(self, e: Expr, j: str):
        for k in derivative_orders(e, j):
            if not self.is_zero(partial(e, j, k)):
                return k
        return NEG_INF

    def reseeded(self, k: int) -> "ZeroTester":
        return ZeroTester(self.cfg.reseeded(k), self.params, self.base)


def is_identically_zero(e: Expr, cfg: ZeroTestConfig | None = None, params: Mapping | None = None,
                        base: Point | None = None) -> bool:
    return ZeroTester(cfg, params, base).is_zero(e)


def sigma_order(e: Expr, j: str, cfg: ZeroTestConfig | None = None, params: Mapping | None = None,
                base: Point | None = None):
    """Highest k with a not-identically-zero partial in ``x_j^(k)``, or ``-inf``."""
    return ZeroTester(cfg, params, base).sigma_order(e, j)
