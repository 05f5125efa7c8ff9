"""Signature matrix, maximum-weight perfect matching and the minimal dual (p, q)."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from .numeric import NEG_INF, ZeroTestConfig, ZeroTester


def tester_for(sys, cfg) -> ZeroTester:
    if isinstance(cfg, ZeroTester):
        return cfg
    return ZeroTester(cfg, sys.params, sys.base_point)


@dataclass(frozen=True)
class SignatureMatrix:
    entries: tuple

    def __post_init__(self):
        object.__setattr__(self, "entries", tuple(tuple(r) for r in self.entries))

    @property
    def shape(self):
        return len(self.entries), (len(self.entries[0]) if self.entries else 0)

    def __getitem__(self, ij):
        i, j = ij
        return self.entries[i][j]

    def edges(self):
        return [(i, j) for i, row in enumerate(self.entries) for j, c in enumerate(row) if c != NEG_INF]

    def as_lists(self):
        return [list(r) for r in self.entries]


@dataclass(frozen=True)
class DualSolution:
    p: tuple
    q: tuple
    matching: tuple | None
    delta_hat: float
    optimal: bool

    def feasible_for(self, sig: SignatureMatrix) -> bool:
        return all(self.q[j] - self.p[i] >= c for i, j in sig.edges() for c in [sig[i, j]])


def signature(sys, cfg: ZeroTestConfig | ZeroTester | None = None) -> SignatureMatrix:
    zt = tester_for(sys, cfg)
    return SignatureMatrix([[zt.sigma_order(e, j) for j in sys.columns] for e in sys.equations])


# ----------------------------------------------------------------------
# matching helpers


def _perfect_matching(allowed: Sequence[Sequence[bool]], fixed: dict | None = None):
    """Kuhn's algorithm; returns row->col dict for a perfect matching or None."""
    n = len(allowed)
    fixed = fixed or {}
    match_col = {j: i for i, j in fixed.items()}
    rows = [i for i in range(n) if i not in fixed]

    def try_row(i, seen):
        for j in range(n):
            if allowed[i][j] and j not in seen and (j not in match_col or match_col[j] not in fixed):
                seen.add(j)
                if j not in match_col or try_row(match_col[j], seen):
                    match_col[j] = i
                    return True
        return False

    for i in rows:
        if not try_row(i, set()):
            return None
    return {i: j for j, i in match_col.items()}


def max_matching_size(pattern: Sequence[Sequence[bool]]) -> int:
    """Maximum bipartite matching on a boolean (possibly rectangular) pattern."""
    nr = len(pattern)
    nc = len(pattern[0]) if nr else 0
    match_col = [-1] * nc

    def try_row(i, seen):
        for j in range(nc):
            if pattern[i][j] and not seen[j]:
                seen[j] = True
                if match_col[j] < 0 or try_row(match_col[j], seen):
                    match_col[j] = i
                    return True
        return False

    return sum(1 for i in range(nr) if try_row(i, [False] * nc))


def _hungarian_max(c) -> list:
    """Maximum-weight perfect matching (shortest augmenting paths with potentials).

    ``c`` must admit a perfect matching on its finite entries.  Returns the
    column assigned to each row.
    """
    n = len(c)
    finite = [x for row in c for x in row if x != NEG_INF]
    big = (max(finite) - min(finite) + 1) * (n + 1) + 1 if finite else 1
    cost = [[(-x if x != NEG_INF else big) for x in row] for row in c]
    inf = math.inf
    u = [0.0] * (n + 1)
    v = [0.0] * (n + 1)
    way = [0] * (n + 1)
    pcol = [0] * (n + 1)  # pcol[j] = row (1-based) matched to column j
    for i in range(1, n + 1):
        pcol[0] = i
        j0 = 0
        minv = [inf] * (n + 1)
        used = [False] * (n + 1)
        while True:
            used[j0] = True
            i0 = pcol[j0]
            delta = inf
            j1 = 0
            for j in range(1, n + 1):
                if not used[j]:
                    cur = cost[i0 - 1][j - 1] - u[i0] - v[j]
                    if cur < minv[j]:
                        minv[j] = cur
                        way[j] = j0
                    if minv[j] < delta:
                        delta = minv[j]
                        j1 = j
            for j in range(n + 1):
                if used[j]:
                    u[pcol[j]] += delta
                    v[j] -= delta
                else:
                    minv[j] -= delta
            j0 = j1
            if pcol[j0] == 0:
                break
        while True:
            j1 = way[j0]
            pcol[j0] = pcol[j1]
            j0 = j1
            if j0 == 0:
                break
    assign = [0] * n
    for j in range(1, n + 1):
        assign[pcol[j] - 1] = j - 1
    return assign


def minimal_dual(c, assign: Sequence[int]):
    """Componentwise-least nonnegative dual that is tight on the matching ``assign``.

    Longest-path relaxation of ``p_i >= p_k + c[k][M(i)] - c[i][M(i)]``;
    returns ``(p, q)`` or ``None`` when a positive cycle shows ``assign`` is
    not maximum.
    """
    n = len(c)
    p = [0] * n
    for _ in range(n + 1):
        changed = False
        for i in range(n):
            j = assign[i]
            for k in range(n):
                if k != i and c[k][j] != NEG_INF:
                    need = p[k] + c[k][j] - c[i][j]
                    if need > p[i]:
                        p[i] = need
                        changed = True
        if not changed:
            break
    else:
        return None
    q = [max(c[i][j] + p[i] for i in range(n) if c[i][j] != NEG_INF) for j in range(n)]
    return p, q


def solve_assignment(sig: SignatureMatrix) -> DualSolution:
    c = sig.as_lists()
    n = len(c)
    allowed = [[x != NEG_INF for x in row] for row in c]
    if n == 0:
        return DualSolution((), (), (), 0, True)
    if any(len(row) != n for row in c) or _perfect_matching(allowed) is None:
        return DualSolution(tuple([0] * len(c)), tuple([0] * (len(c[0]) if c else 0)), None,
                            NEG_INF, False)
    assign = _hungarian_max(c)
    p, q = minimal_dual(c, assign)
    tight = [[allowed[i][j] and q[j] - p[i] == c[i][j] for j in range(n)] for i in range(n)]
    # lexicographically smallest maximum matching: every one lies on tight edges
    fixed: dict = {}
    for i in range(n):
        for j in range(n):
            if tight[i][j] and j not in fixed.values():
                trial = dict(fixed)
                trial[i] = j
                if _perfect_matching(tight, trial) is not None:
                    fixed = trial
                    break
    matching = tuple(sorted(fixed.items()))
    weight = sum(c[i][j] for i, j in matching)
    dh = sum(q) - sum(p)
    assert weight == dh, "strong duality violated"
    lmax = max((x for row in c for x in row if x != NEG_INF), default=0)
    assert max(p + q) <= n * max(lmax, 1), "dual exceeds the n*l bound"
    return DualSolution(tuple(p), tuple(q), matching, dh, True)


def delta_hat(sys, cfg: ZeroTestConfig | ZeroTester | None = None):
    sys.require_square()
    return solve_assignment(signature(sys, cfg)).delta_hat
