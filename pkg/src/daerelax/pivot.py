"""Selection of the pivot triple (r, I, J) for one modification step.

The rows of an identically singular system Jacobian contain a minimal
dependent set Z.  It is read off a Gauss-Jordan column reduction: a row l
that received no pivot is a combination of the pivot rows h(b) whose
coefficient D'[l, b] is nonzero.  The row of Z with the smallest p becomes r,
the remaining rows form I, and J is any column set on which D[I, J] is
nonsingular.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from typing import Callable, Sequence

import numpy as np

from .errors import DaeError, DegenerateEliminationError
from .jacobian import SampledMatrix, SystemJacobian
from .numeric import Point, ZeroTestConfig, ZeroTester

MAX_REPIVOT_CANDIDATES = 5000


@dataclass(frozen=True)
class PivotChoice:
    r: int
    I: tuple
    J: tuple
    kappa: int
    n_cols: int

    @property
    def m(self) -> int:
        return len(self.I)

    @property
    def T(self) -> tuple:
        """Columns outside J."""
        js = set(self.J)
        return tuple(j for j in range(self.n_cols) if j not in js)

    def S(self, n_rows: int) -> tuple:
        """Rows outside I and r."""
        used = set(self.I) | {self.r}
        return tuple(i for i in range(n_rows) if i not in used)

    def one_based(self) -> dict:
        return {"r": self.r + 1, "I": [i + 1 for i in self.I], "J": [j + 1 for j in self.J],
                "kappa": self.kappa}


def _tester(cfg) -> ZeroTester:
    return cfg if isinstance(cfg, ZeroTester) else ZeroTester(cfg)


def _greedy_columns(sm: SampledMatrix, rows: Sequence[int], m: int):
    """Lexicographically smallest column set making sm[rows, J] nonsingular."""
    ncols = sm.vals.shape[1]
    chosen = []
    for j in range(ncols):
        trial = chosen + [j]
        if sm.take(rows, trial).rank() == len(trial):
            chosen = trial
            if len(chosen) == m:
                return tuple(chosen)
    return None


def check_conditions(sm: SampledMatrix, p: Sequence[int], r: int, I: Sequence[int], J: Sequence[int]) -> list:
    """Names of violated conditions among C1 (D[I,J] nonsingular), C2, C3."""
    bad = []
    m = len(I)
    if len(J) != m or sm.take(I, J).rank() != m:
        bad.append("C1")
    if sm.take(sorted(set(I) | {r}), range(sm.vals.shape[1])).rank() != m:
        bad.append("C2")
    if any(p[i] < p[r] for i in I):
        bad.append("C3")
    return bad


def minimal_dependent_rows(sm: SampledMatrix) -> list:
    """Z from the column reduction; empty when the matrix has full row rank."""
    H, B, red = sm.column_reduce()
    rest = [i for i in range(sm.vals.shape[0]) if i not in H]
    if not rest:
        return []
    ell = rest[0]
    nz = red.take([ell], B).nonzero()[0]
    return sorted({ell} | {H[k] for k in range(len(B)) if nz[k]})


def find_pivot(jac: SystemJacobian, p: Sequence[int], cfg: ZeroTestConfig | ZeroTester | None = None,
               prefer: Callable[[int, tuple, tuple], bool] | None = None, retries: int = 3) -> PivotChoice:
    """Pivot triple for an identically singular Jacobian.

    Among rows of Z attaining the minimum p, the first one for which
    ``prefer(r, I, J)`` holds is chosen; without a preference (or when no
    candidate is preferred) the smallest index wins.
    """
    zt = _tester(cfg)
    last = None
    for attempt in range(retries):
        z = zt if attempt == 0 else zt.reseeded(attempt)
        sm = SampledMatrix.from_entries(jac.entries, z)
        Z = minimal_dependent_rows(sm)
        if not Z:
            raise DaeError("the Jacobian has full rank; no pivot exists")
        pmin = min(p[i] for i in Z)
        candidates = []
        for r in [i for i in Z if p[i] == pmin]:
            I = tuple(i for i in Z if i != r)
            J = _greedy_columns(sm, I, len(I))
            if J is None or check_conditions(sm, p, r, I, J):
                candidates = None
                break
            candidates.append((r, I, J))
        if not candidates:
            last = Z
            continue
        pick = candidates[0]
        if prefer is not None:
            for cand in candidates:
                if prefer(*cand):
                    pick = cand
                    break
        r, I, J = pick
        kappa = max(p[i] for i in I) - p[r] if I else 0
        return PivotChoice(r, I, J, kappa, jac.shape[1])
    raise DegenerateEliminationError(f"zero tests disagreed while extracting a pivot (Z={last})")


def validate_pivot(jac: SystemJacobian, p: Sequence[int], r: int, I: Sequence[int], J: Sequence[int],
                   cfg: ZeroTestConfig | ZeroTester | None = None) -> PivotChoice:
    """Build a PivotChoice from a manual selection after checking C1-C3."""
    n, ncols = jac.shape
    I = tuple(I)
    J = tuple(J)
    if not (0 <= r < n) or any(not 0 <= i < n for i in I) or any(not 0 <= j < ncols for j in J):
        raise DaeError("pivot indices out of range")
    if r in I or len(set(I)) != len(I) or len(set(J)) != len(J):
        raise DaeError("I must be distinct rows not containing r; J must be distinct columns")
    sm = SampledMatrix.from_entries(jac.entries, _tester(cfg))
    bad = check_conditions(sm, p, r, I, J)
    if bad:
        raise DaeError(f"manual pivot violates {', '.join(bad)}")
    kappa = max(p[i] for i in I) - p[r] if I else 0
    return PivotChoice(r, I, J, kappa, ncols)


def alternative_columns(jac: SystemJacobian, p: Sequence[int], base: PivotChoice,
                        cfg: ZeroTestConfig | ZeroTester | None = None, point: Point | None = None,
                        params=None, limit: int = MAX_REPIVOT_CANDIDATES) -> list:
    """Other valid pivots with the same (r, I), best |det D[I, J]| at ``point`` first."""
    zt = _tester(cfg)
    I = list(base.I)
    sm = SampledMatrix.from_entries(jac.entries, zt)
    at = None
    if point is not None:
        rows = [[jac.entries[i][j] for j in range(jac.shape[1])] for i in I]
        at = SampledMatrix.at_point(rows, point, params if params is not None else zt.params, zt.cfg.tolerance)
    support = [j for j in range(jac.shape[1]) if any(jac.pattern[i][j] for i in I)]
    found = []
    for count, J in enumerate(combinations(support, len(I))):
        if count >= limit:
            break
        if J == base.J or check_conditions(sm, p, base.r, base.I, J):
            continue
        d = at.take(range(len(I)), J).abs_det() if at is not None else 0.0
        found.append((-d if np.isfinite(d) else 0.0, J))
    found.sort()
    return [PivotChoice(base.r, base.I, J, base.kappa, base.n_cols) for _, J in found]


def repivot_at_point(jac: SystemJacobian, p: Sequence[int], point: Point, params=None,
                     cfg: ZeroTestConfig | ZeroTester | None = None,
                     base: PivotChoice | None = None) -> PivotChoice:
    """Re-choose J to maximise |det D[I, J]| at ``point`` (dynamic pivoting)."""
    zt = _tester(cfg)
    if base is None:
        base = find_pivot(jac, p, zt)
    I = list(base.I)
    rows = [[jac.entries[i][j] for j in range(jac.shape[1])] for i in I]
    at = SampledMatrix.at_point(rows, point, params if params is not None else zt.params, zt.cfg.tolerance)
    if at is None:
        return base
    sm = SampledMatrix.from_entries(jac.entries, zt)
    support = [j for j in range(jac.shape[1]) if any(jac.pattern[i][j] for i in I)]
    local = range(len(I))
    best, best_det = base.J, at.take(local, base.J).abs_det()
    for count, J in enumerate(combinations(support, len(I))):
        if count >= MAX_REPIVOT_CANDIDATES:
            break
        d = at.take(local, J).abs_det()
        if np.isfinite(d) and d > best_det and not check_conditions(sm, p, base.r, base.I, J):
            best, best_det = J, d
    return PivotChoice(base.r, base.I, tuple(best), base.kappa, base.n_cols)
