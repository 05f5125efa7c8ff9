"""Augmentation method.

Instead of solving for the target derivatives, each one is renamed to a
fresh algebraic unknown y, the remaining highest derivatives of the pivot
block are frozen at constants Xi, and the (renamed, frozen) derivatives of
the equations in I are appended as new equations.  No symbolic solving is
needed and every new equation touches no more unknowns than its source.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np
from scipy.optimize import root

from .assign import DualSolution, max_matching_size, signature, solve_assignment, tester_for
from .errors import (MissingXiValue, NonlinearTargetsError, PostconditionViolation, SampleDomainError,
                     SingularAtConstructionError, XiSingularError)
from .expr import T, Var, const, partial, simplify, substitute, total_derivative, var
from .jacobian import SampledMatrix, jacobian_entries, rank_at_point
from .model import DaeSystem, TrajectoryFixture, trajectory_env
from .numeric import NEG_INF, Point, ZeroTester, evaluate_on_grid
from .pivot import PivotChoice
from .substitution import solve_targets


@dataclass(frozen=True)
class AugmentationStep:
    pivot: PivotChoice
    xi: Mapping
    new_aux: tuple
    replaced: Mapping
    new_system: DaeSystem
    new_dual: DualSolution
    optimal_dual: DualSolution
    delta_before: float
    delta_after: float
    copy_rows: tuple

    @property
    def method(self) -> str:
        return "augmentation"


def aux_name(col: int, iteration: int) -> str:
    return f"y_{col + 1}_{iteration}"


def _key(k):
    if isinstance(k, Var):
        return (k.name, k.order)
    return (str(k[0]), int(k[1]))


def frozen_keys(sys: DaeSystem, dual: DualSolution, pivot: PivotChoice, sources) -> list:
    """(name, order) pairs of non-target highest derivatives present in the pivot block."""
    pr = dual.p[pivot.r]
    cols = sys.columns
    present = set()
    for e in sources:
        present |= e.leaves
    out = []
    for j in pivot.T:
        k = dual.q[j] - pr
        if k >= 0 and var(cols[j], k) in present:
            out.append((cols[j], k))
    return out


def _xi_attempts(keys, xi_source, base: Point | None):
    if isinstance(xi_source, Point):
        base, xi_source = xi_source, None
    if xi_source is not None:
        given = {_key(k): float(v) for k, v in dict(xi_source).items()}
        missing = [k for k in keys if k not in given]
        if missing:
            raise MissingXiValue("no value for " + ", ".join(f"{n} (order {k})" for n, k in missing))
        return [{k: given[k] for k in keys}]
    attempts = []
    for fill in (0.0, 1.0):
        xi = {}
        for k in keys:
            got = base.values.get(k) if base is not None else None
            xi[k] = got if got is not None else fill
        if xi not in attempts:
            attempts.append(xi)
    return attempts


def augment_step(sys: DaeSystem, dual: DualSolution, pivot: PivotChoice, xi_source=None, cfg=None,
                 iteration: int = 1) -> AugmentationStep:
    """One augmentation step; ``xi_source`` is a Point, a {(name, order): value} map or None."""
    zt = tester_for(sys, cfg)
    cols = sys.columns
    pr = dual.p[pivot.r]
    if not pivot.I:
        raise ValueError("augmentation needs a nonempty I")
    sources = [sys.equations[pivot.r]] + [total_derivative(sys.equations[i], dual.p[i] - pr) for i in pivot.I]
    ys = [aux_name(j, iteration) for j in pivot.J]
    clash = set(ys) & set(cols)
    if clash:
        raise ValueError(f"aux names already in use: {sorted(clash)}")
    rename = {var(cols[j], dual.q[j] - pr): var(y) for j, y in zip(pivot.J, ys)}
    keys = frozen_keys(sys, dual, pivot, sources)
    attempts = _xi_attempts(keys, xi_source, sys.base_point)

    D = jacobian_entries(sys.equations, cols, dual.p, dual.q)
    block = [[D[i][j] for j in pivot.J] for i in pivot.I]
    last_err = None
    for xi in attempts:
        psi = dict(rename)
        psi.update({var(n, k): const(v) for (n, k), v in xi.items()})
        try:
            frozen_block = [[simplify(substitute(e, psi)) for e in row] for row in block]
        except ZeroDivisionError as exc:
            last_err = str(exc)
            continue
        eta = {}
        if sys.base_point is not None:
            for (j, y) in zip(pivot.J, ys):
                got = sys.base_point.values.get((cols[j], dual.q[j] - pr))
                eta[(y, 0)] = got if got is not None else 0.0
        new_base = sys.base_point.with_values(eta) if sys.base_point is not None else None
        try:
            sm = SampledMatrix.from_entries(frozen_block, zt)
            ok = sm.rank() == pivot.m
        except SampleDomainError as exc:
            ok, last_err = False, str(exc)
        if ok and new_base is not None:
            rk = rank_at_point(frozen_block, new_base, sys.params, zt.cfg.tolerance)
            ok = rk is None or rk == pivot.m
        if not ok:
            last_err = last_err or f"pivot block singular with Xi={xi}"
            continue
        return _build(sys, dual, pivot, sources, psi, xi, ys, new_base, zt, iteration)
    raise XiSingularError(last_err or "every Xi candidate makes the pivot block singular")


def _build(sys, dual, pivot, sources, psi, xi, ys, new_base, zt, iteration):
    cols = sys.columns
    pr = dual.p[pivot.r]
    n = sys.n
    images = [simplify(substitute(e, psi)) for e in sources]
    eqs = list(sys.equations)
    eqs[pivot.r] = images[0]
    copies = images[1:]
    eqs.extend(copies)
    new_sys = DaeSystem(eqs, sys.variables, sys.params, new_base, sys.aux_vars + tuple(ys))
    ext = DualSolution(tuple(dual.p) + (pr,) * pivot.m, tuple(dual.q) + (pr,) * pivot.m, None,
                       sum(dual.q) - sum(dual.p), False)
    copy_rows = tuple(range(n, n + pivot.m))
    nzt = ZeroTester(zt.cfg, new_sys.params, new_base)

    for y in ys:
        for e in [images[0]] + copies:
            if any(type(v) is Var and v.name == y and v.order > 0 for v in e.leaves):
                raise PostconditionViolation(f"aux variable {y} appears differentiated")
    sig = signature(new_sys, nzt)
    if not ext.feasible_for(sig):
        raise PostconditionViolation("extended dual is infeasible on the augmented system")
    for row in (pivot.r,) + copy_rows:
        for j in range(len(cols)):
            if sig[row, j] != NEG_INF and sig[row, j] >= dual.q[j] - pr:
                raise PostconditionViolation(
                    f"row {row + 1} keeps {cols[j]} at order {sig[row, j]} >= {dual.q[j] - pr}")
    Dbar = jacobian_entries(new_sys.equations, new_sys.columns, ext.p, ext.q)
    pattern = [[not z for z in nzt.zeros(row)] for row in Dbar]
    S = pivot.S(n)
    new_cols = range(len(cols), len(cols) + pivot.m)
    for i in list(pivot.I) + list(S):
        if any(pattern[i][j] for j in new_cols):
            raise PostconditionViolation("augmented Jacobian has a nonzero in rows I or S of the new columns")
    for i in (pivot.r,) + copy_rows:
        if any(pattern[i][j] for j in range(len(cols))):
            raise PostconditionViolation("augmented Jacobian has a nonzero in the old columns of a replaced row")
    if max_matching_size(pattern) > n + pivot.m - 1:
        raise PostconditionViolation("augmented Jacobian term rank is not deficient")
    opt = solve_assignment(sig)
    if not (opt.delta_hat == NEG_INF or opt.delta_hat < dual.delta_hat):
        raise PostconditionViolation(f"delta-hat did not decrease ({dual.delta_hat} -> {opt.delta_hat})")
    replaced = {(v.name, v.order): str(e) for v, e in psi.items()}
    return AugmentationStep(pivot, dict(xi), tuple(ys), replaced, new_sys, ext, opt, dual.delta_hat,
                            opt.delta_hat, copy_rows)


def recover_aux_trajectory(step: AugmentationStep, fix: TrajectoryFixture, allow_numeric: bool = True,
                           tol: float = 1e-12) -> TrajectoryFixture:
    """Extend ``fix`` with values of this step's aux variables.

    Copies affine in the new aux variables are solved symbolically and give
    closed forms; otherwise the copies are solved numerically per grid point.
    """
    sys = step.new_system
    copies = [sys.equations[i] for i in step.copy_rows]
    ys = [var(y) for y in step.new_aux]
    zt = ZeroTester(params=sys.params, base=sys.base_point)
    try:
        explicit = solve_targets(copies, ys, zt)
    except (NonlinearTargetsError, SingularAtConstructionError):
        if not allow_numeric:
            raise
        return fix.extended(tabulated=_numeric_aux(copies, ys, fix, sys.params, tol))
    closed = {}
    for y, e in explicit.items():
        leaves = {v: total_derivative(fix.closed_form[v.name], v.order)
                  for v in e.leaves if type(v) is Var and v.name in fix.closed_form}
        other = [v for v in e.leaves if type(v) is Var and v.name not in fix.closed_form]
        if other:
            return fix.extended(tabulated=_numeric_aux(copies, ys, fix, sys.params, tol))
        closed[y.name] = simplify(substitute(e, leaves))
    return fix.extended(closed_form=closed)


def _numeric_aux(copies, ys, fix, params, tol):
    env = trajectory_env(copies, fix, params, skip=set(ys))
    jac = [[partial(c, y) for y in ys] for c in copies]
    grid = np.asarray(fix.grid)
    out = np.zeros((len(ys), len(grid)))
    for g in range(len(grid)):
        base_env = {leaf: np.array([vals[g]]) for leaf, vals in env.items()}
        base_env[T] = np.array([grid[g]])

        def fun(yv):
            e2 = dict(base_env)
            e2.update({y: np.array([v]) for y, v in zip(ys, yv)})
            vals, _ = evaluate_on_grid(copies, e2, params, 1)
            return vals[:, 0]

        def jfun(yv):
            e2 = dict(base_env)
            e2.update({y: np.array([v]) for y, v in zip(ys, yv)})
            vals, _ = evaluate_on_grid([e for row in jac for e in row], e2, params, 1)
            return vals[:, 0].reshape(len(ys), len(ys))

        guess = out[:, g - 1] if g else np.ones(len(ys))
        sol = root(fun, guess, jac=jfun, tol=tol)
        if not sol.success or np.max(np.abs(fun(sol.x))) > 1e-8:
            raise NonlinearTargetsError(f"numeric aux recovery failed at t={grid[g]}: {sol.message}")
        out[:, g] = sol.x
    return {y.name: out[k] for k, y in enumerate(ys)}
