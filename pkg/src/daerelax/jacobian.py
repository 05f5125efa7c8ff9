"""System Jacobian, term rank, rank over the expression field and failure classes.

Ranks are computed by Gauss-Jordan column reduction carried out on K random
evaluations of the matrix at once, in float64 and in extended precision side
by side.  An entry counts as nonzero when its float64 value clears
``tolerance`` times its observed error scale at some sample.  With generic samples this equals
the rank over the field of analytic functions with probability one.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .assign import DualSolution, max_matching_size, tester_for
from .expr import ZERO, Expr, partial
from .numeric import (HI, NEG_INF, Evaluator, Point, ZeroTestConfig, ZeroTester, error_scale, leaf_label,
                      majority_nonzero, sample_votes)

OK, F1, F2_CANDIDATE, F3 = "OK", "F1", "F2-candidate", "F3"


@dataclass(frozen=True)
class SystemJacobian:
    entries: tuple
    pattern: tuple
    p: tuple
    q: tuple

    @property
    def shape(self):
        return len(self.entries), (len(self.entries[0]) if self.entries else 0)

    def sub(self, rows: Sequence[int], cols: Sequence[int]) -> list:
        return [[self.entries[i][j] for j in cols] for i in rows]


def jacobian_entries(equations, columns, p, q) -> list:
    """D_ij = dF_i / dx_j^(q_j - p_i), using Griewank's shortcut."""
    return [[partial(f, x, q[j] - p[i]) if q[j] - p[i] >= 0 else ZERO
             for j, x in enumerate(columns)] for i, f in enumerate(equations)]


def system_jacobian(sys, dual: DualSolution, cfg: ZeroTestConfig | ZeroTester | None = None) -> SystemJacobian:
    zt = tester_for(sys, cfg)
    entries = jacobian_entries(sys.equations, sys.columns, dual.p, dual.q)
    flat = [e for row in entries for e in row]
    zeros = zt.zeros(flat)
    m = len(sys.columns)
    pattern = [[not zeros[i * m + j] for j in range(m)] for i in range(len(entries))]
    return SystemJacobian(tuple(map(tuple, entries)), tuple(map(tuple, pattern)), tuple(dual.p), tuple(dual.q))


def term_rank(jac: SystemJacobian) -> int:
    return max_matching_size(jac.pattern)


# ----------------------------------------------------------------------
# sampled elimination


class SampledMatrix:
    """K simultaneous numeric instances of an expression matrix.

    ``vals`` holds float64 samples and ``hi`` the same samples in extended
    precision; every elimination step is applied to both so that their gap
    keeps tracking the float64 error.
    """

    def __init__(self, vals: np.ndarray, hi: np.ndarray, tol: float, live: np.ndarray | None = None):
        # shape (rows, cols, K); ``live`` marks samples still carrying information
        self.vals = vals
        self.hi = hi
        self.tol = tol
        self.live = np.ones(vals.shape[-1], dtype=bool) if live is None else live

    @property
    def scales(self) -> np.ndarray:
        return error_scale(self.vals, self.hi)

    @classmethod
    def from_entries(cls, entries: Sequence[Sequence[Expr]], zt: ZeroTester) -> "SampledMatrix":
        nr = len(entries)
        nc = len(entries[0]) if nr else 0
        flat = [e for row in entries for e in row]
        if not flat:
            k = zt.cfg.samples
            return cls(np.zeros((nr, nc, k)), np.zeros((nr, nc, k), dtype=HI), zt.cfg.tolerance)
        lo, hi = zt.sample(flat)
        k = lo.shape[1]
        return cls(lo.reshape(nr, nc, k), hi.reshape(nr, nc, k), zt.cfg.tolerance)

    @classmethod
    def at_point(cls, entries, point: Point, params, tol: float) -> "SampledMatrix | None":
        nr = len(entries)
        nc = len(entries[0]) if nr else 0
        flat = [e for row in entries for e in row]
        env = {}
        for e in flat:
            for leaf in e.leaves:
                val = point.get(leaf)
                if val is None:
                    return None
                env[leaf] = np.array([val])
        ev = Evaluator(env, params, 1)
        pairs = [ev.pair(e) for e in flat]
        lo = np.array([r[0] for r in pairs]).reshape(nr, nc, 1)
        hi = np.array([r[1] for r in pairs], dtype=HI).reshape(nr, nc, 1)
        if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
            return None
        return cls(lo, hi, tol)

    def take(self, rows: Sequence[int], cols: Sequence[int]) -> "SampledMatrix":
        ix = np.ix_(list(rows), list(cols))
        return SampledMatrix(self.vals[ix], self.hi[ix], self.tol, self.live)

    def nonzero(self) -> np.ndarray:
        return majority_nonzero(sample_votes(self.vals, self.scales, self.tol), self.live)

    def column_reduce(self):
        """Gauss-Jordan column reduction, rows visited in order.

        Returns ``(H, B, reduced)`` where ``H[k]`` is the row whose pivot sits
        in column ``B[k]`` and ``reduced`` is the reduced SampledMatrix
        (identity on H x B, zero in the non-pivot columns of H rows).
        """
        v = self.vals.copy()
        h = self.hi.copy()
        nr, nc = v.shape[:2]
        tol = self.tol
        H, B = [], []
        free = list(range(nc))
        live = self.live.copy()
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            for i in range(nr):
                if not free or not live.any():
                    break
                row = v[i, free]
                votes = sample_votes(row, error_scale(row, h[i, free]), tol) & live
                ok = majority_nonzero(votes, live)
                if not ok.any():
                    continue
                # most samples certain first, then the largest relative to its column
                colmax = np.maximum(np.max(np.abs(v[:, free][:, :, live]), axis=0), 1e-300)
                size = np.median(np.abs(row[:, live]) / colmax, axis=-1)
                score = [(int(np.sum(vt)), float(sz)) if good else (-1, 0.0)
                         for vt, sz, good in zip(votes, size, ok)]
                k = max(range(len(free)), key=lambda c: score[c])
                b = free[k]
                # samples where the pivot is not certainly nonzero carry no information from here on
                live &= votes[k]
                piv_v = np.where(live, v[i, b], 1.0)
                piv_h = np.where(live, h[i, b], 1.0)
                col_v = v[:, b] / piv_v
                col_h = h[:, b] / piv_h
                v[:, b] = col_v
                h[:, b] = col_h
                v[i, b] = 1.0
                h[i, b] = 1.0
                for j in range(nc):
                    if j == b:
                        continue
                    f = v[i, j].copy()
                    fh = h[i, j].copy()
                    if not (np.any(f != 0) or np.any(fh != 0)):
                        continue
                    v[:, j] = v[:, j] - f * col_v
                    h[:, j] = h[:, j] - fh * col_h
                    v[i, j] = 0.0
                    h[i, j] = 0.0
                v[:, :, ~live] = 0.0
                h[:, :, ~live] = 0.0
                H.append(i)
                B.append(b)
                free.remove(b)
        return H, B, SampledMatrix(v, h, tol, live)

    def rank(self) -> int:
        return len(self.column_reduce()[0])

    def abs_det(self) -> float:
        """|det| of the first sample (used for square blocks at a point)."""
        a = self.vals[:, :, 0]
        if a.size == 0:
            return 1.0
        return float(abs(np.linalg.det(a)))


def structural_rank(jac: SystemJacobian | Sequence[Sequence[Expr]], cfg: ZeroTestConfig | ZeroTester | None = None,
                    params=None, base: Point | None = None) -> int:
    entries = jac.entries if isinstance(jac, SystemJacobian) else jac
    zt = cfg if isinstance(cfg, ZeroTester) else ZeroTester(cfg, params, base)
    return SampledMatrix.from_entries(entries, zt).rank()


def rank_at_point(entries, point: Point, params, tol: float = 1e-10):
    """Numeric rank at a point, or ``None`` when the point does not cover the entries."""
    sm = SampledMatrix.at_point(entries, point, params, tol)
    if sm is None:
        return None
    return sm.rank()


def det_at_point(entries, point: Point, params):
    sm = SampledMatrix.at_point(entries, point, params, 1e-10)
    if sm is None:
        return None
    return float(np.linalg.det(sm.vals[:, :, 0])) if sm.vals.size else 1.0


def classify_failure(sys, dual: DualSolution, jac: SystemJacobian | None,
                     cfg: ZeroTestConfig | ZeroTester | None = None) -> str:
    if dual.delta_hat == NEG_INF:
        return F1
    zt = tester_for(sys, cfg)
    if jac is None:
        jac = system_jacobian(sys, dual, zt)
    n = sys.n
    if structural_rank(jac, zt) < n:
        return F3
    if sys.base_point is not None:
        r = rank_at_point(jac.entries, sys.base_point, sys.params, zt.cfg.tolerance)
        if r is not None and r < n:
            return F2_CANDIDATE
    return OK


def missing_point_values(entries, point: Point) -> list:
    out = set()
    for row in entries:
        for e in row:
            for leaf in e.leaves:
                if point.get(leaf) is None:
                    out.add(leaf_label(leaf))
    return sorted(out)
