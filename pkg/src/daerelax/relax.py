"""The combinatorial relaxation loop.

Each iteration solves the assignment dual (phase 1), tests the system
Jacobian for identical singularity (phase 2) and, if it is singular,
modifies the DAE by one step of the selected method (phase 3).  Every step
strictly lowers delta-hat, so the loop stops after at most delta-hat(F)
modifications.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy.optimize import least_squares

from .assign import DualSolution, SignatureMatrix, signature, solve_assignment
from .augmentation import AugmentationStep, augment_step, recover_aux_trajectory
from .errors import (DaeError, IterationBudgetExceeded, MethodFailure, NonlinearTargetsError,
                     SingularAtConstructionError, XiSingularError)
from .expr import T, Var, partial, var
from .jacobian import (F1, F2_CANDIDATE, F3, OK, SampledMatrix, det_at_point, rank_at_point,
                       system_jacobian, term_rank)
from .model import DaeSystem, TrajectoryFixture, residuals, trajectory_env
from .numeric import NEG_INF, Point, ZeroTestConfig, ZeroTester, evaluate_on_grid
from .pivot import PivotChoice, alternative_columns, find_pivot, repivot_at_point, validate_pivot
from .substitution import affine_coefficients, lc_step, reduced_system, substitute_step, target_vars

METHODS = ("substitution", "augmentation", "lc", "auto")
METHOD_FAILURE = "MethodFailure"
_ALIASES = {"sub": "substitution", "aug": "augmentation"}


@dataclass
class RelaxationOptions:
    method: str = "auto"
    max_iterations: int | None = None
    zero_test: ZeroTestConfig = field(default_factory=ZeroTestConfig)
    base_point: Point | None = None
    dynamic_pivoting: bool = False
    # iteration (1-based) -> {"p", "q", "r", "I", "J"} with 0-based indices
    overrides: Mapping = field(default_factory=dict)
    xi: Mapping | None = None
    raise_on_failure: bool = False

    def __post_init__(self):
        self.method = _ALIASES.get(self.method, self.method)
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}")
        if self.max_iterations is not None and self.max_iterations < 1:
            raise ValueError("max_iterations must be at least 1")


@dataclass
class IterationRecord:
    index: int
    signature: SignatureMatrix
    dual: DualSolution
    verdict: str
    structural_rank: int | None = None
    term_rank: int | None = None
    pivot: PivotChoice | None = None
    step: object = None
    method: str | None = None
    fallback_reason: str | None = None


@dataclass
class ModificationReport:
    initial_system: DaeSystem
    iterations: list
    final_system: DaeSystem
    final_status: str
    final_dual: DualSolution | None = None
    final_structural_rank: int | None = None
    final_determinant: float | None = None
    error: str | None = None
    error_type: str | None = None

    @property
    def steps(self) -> list:
        return [it.step for it in self.iterations if it.step is not None]

    @property
    def pivots(self) -> list:
        return [it.pivot for it in self.iterations if it.step is not None]

    @property
    def delta_hats(self) -> list:
        return [it.dual.delta_hat for it in self.iterations]


def _dual_from_override(sig: SignatureMatrix, ov: Mapping) -> DualSolution:
    best = solve_assignment(sig)
    p = tuple(int(v) for v in ov["p"])
    q = tuple(int(v) for v in ov["q"])
    cand = DualSolution(p, q, best.matching, sum(q) - sum(p), True)
    if len(p) != len(sig.entries) or len(q) != len(sig.entries[0]):
        raise DaeError("override dual has the wrong length")
    if not cand.feasible_for(sig):
        raise DaeError("override dual is infeasible")
    if cand.delta_hat != best.delta_hat:
        raise DaeError(f"override dual is not optimal ({cand.delta_hat} != {best.delta_hat})")
    return cand


def _affine_preference(sys: DaeSystem, dual: DualSolution, zt: ZeroTester):
    def prefer(r, I, J):
        pc = PivotChoice(r, I, J, 0, len(sys.columns))
        try:
            affine_coefficients(reduced_system(sys, dual, pc), target_vars(sys, dual, pc), zt)
        except NonlinearTargetsError:
            return False
        return True

    return prefer


def _xi_source(sys: DaeSystem, opts: RelaxationOptions):
    if opts.xi is None:
        return None
    if sys.base_point is not None:
        return sys.base_point.with_values(opts.xi)
    return Point(0.0, dict(opts.xi))


def relax(sys: DaeSystem, opts: RelaxationOptions | None = None) -> ModificationReport:
    opts = opts or RelaxationOptions()
    sys.require_square()
    if opts.base_point is not None:
        sys = sys.with_equations(sys.equations, base_point=opts.base_point)
    initial = sys
    iterations: list = []
    budget = opts.max_iterations
    status = None
    error = None
    error_type = None
    final_dual = None
    final_rank = None
    k = 0
    while True:
        k += 1
        zt = ZeroTester(opts.zero_test, sys.params, sys.base_point)
        sig = signature(sys, zt)
        ov = dict(opts.overrides.get(k, {}))
        dual = _dual_from_override(sig, ov) if "p" in ov else solve_assignment(sig)
        if budget is None:
            budget = (dual.delta_hat if dual.delta_hat != NEG_INF else 0) + 1
        rec = IterationRecord(k, sig, dual, F1)
        iterations.append(rec)
        if dual.delta_hat == NEG_INF:
            status = F1
            break
        jac = system_jacobian(sys, dual, zt)
        rec.term_rank = term_rank(jac)
        rec.structural_rank = SampledMatrix.from_entries(jac.entries, zt).rank()
        final_dual, final_rank = dual, rec.structural_rank
        if rec.structural_rank == sys.n:
            rec.verdict = OK
            status = OK
            if sys.base_point is not None:
                rk = rank_at_point(jac.entries, sys.base_point, sys.params, opts.zero_test.tolerance)
                if rk is not None and rk < sys.n:
                    rec.verdict = status = F2_CANDIDATE
            break
        rec.verdict = F3
        if k > budget:
            raise IterationBudgetExceeded(
                f"still singular after {budget} modifications; delta-hat must have stalled")
        try:
            if "r" in ov:
                pivot = validate_pivot(jac, dual.p, ov["r"], ov["I"], ov["J"], zt)
            else:
                pivot = find_pivot(jac, dual.p, zt, prefer=_affine_preference(sys, dual, zt))
                if opts.dynamic_pivoting and sys.base_point is not None:
                    pivot = repivot_at_point(jac, dual.p, sys.base_point, sys.params, zt, base=pivot)
            rec.pivot = pivot
            step, used, why = _phase3(sys, dual, jac, pivot, zt, opts, k, manual="r" in ov)
            rec.pivot = step.pivot
        except DaeError as exc:
            status = METHOD_FAILURE
            error = f"{type(exc).__name__}: {exc}"
            error_type = type(exc).__name__
            if opts.raise_on_failure:
                raise MethodFailure(error, cause=exc) from exc
            break
        rec.step, rec.method, rec.fallback_reason = step, used, why
        sys = step.new_system
    det = None
    if status in (OK, F2_CANDIDATE) and sys.base_point is not None:
        jac = system_jacobian(sys, final_dual, ZeroTester(opts.zero_test, sys.params, sys.base_point))
        det = det_at_point(jac.entries, sys.base_point, sys.params)
    return ModificationReport(initial, iterations, sys, status, final_dual, final_rank, det, error, error_type)


def _augment(sys, dual, jac, pivot, zt, opts: RelaxationOptions, k: int, manual: bool):
    """Augmentation, trying other column sets J when Xi makes the block singular."""
    xi = _xi_source(sys, opts)
    try:
        return augment_step(sys, dual, pivot, xi, zt, iteration=k)
    except XiSingularError:
        if manual:
            raise
        alts = alternative_columns(jac, dual.p, pivot, zt, sys.base_point, sys.params)
    for alt in alts:
        try:
            return augment_step(sys, dual, alt, xi, zt, iteration=k)
        except XiSingularError:
            continue
    raise XiSingularError(f"no column set J for r={pivot.r + 1}, I={[i + 1 for i in pivot.I]} "
                          "keeps the frozen pivot block nonsingular")


def _phase3(sys, dual, jac, pivot, zt, opts: RelaxationOptions, k: int, manual: bool = False):
    method = opts.method
    if method == "substitution":
        return substitute_step(sys, dual, pivot, zt), "substitution", None
    if method == "lc":
        return lc_step(sys, dual, pivot, zt), "lc", None
    if method == "augmentation":
        return _augment(sys, dual, jac, pivot, zt, opts, k, manual), "augmentation", None
    try:
        return substitute_step(sys, dual, pivot, zt), "substitution", None
    except (NonlinearTargetsError, SingularAtConstructionError) as exc:
        why = f"{type(exc).__name__}: {exc}"
        return _augment(sys, dual, jac, pivot, zt, opts, k, manual), "augmentation", why


# ----------------------------------------------------------------------
# solution equivalence on fixtures


@dataclass(frozen=True)
class EquivalenceReport:
    before_max: float
    after_max: float
    threshold: float
    extended: TrajectoryFixture

    @property
    def passed(self) -> bool:
        return self.before_max <= self.threshold and self.after_max <= self.threshold


def _max_abs(mat) -> float:
    return float(abs(mat).max()) if mat.size else 0.0


def verify_equivalence(before: DaeSystem, after: DaeSystem, fix: TrajectoryFixture,
                       steps: Sequence = (), threshold: float = 1e-8) -> EquivalenceReport:
    """Max residuals of both systems along ``fix``; aux values come from the augmentation steps."""
    b = residuals(before, fix)
    ext = fix
    for st in steps:
        if isinstance(st, AugmentationStep):
            ext = recover_aux_trajectory(st, ext)
    a = residuals(after, ext)
    return EquivalenceReport(_max_abs(b), _max_abs(a), threshold, ext)


def fill_unknown_aux(sys: DaeSystem, fix: TrajectoryFixture, tol: float = 1e-12) -> TrajectoryFixture:
    """Tabulate aux variables the fixture does not cover.

    At every grid point the missing aux values are fitted by nonlinear least
    squares to all equations that mention them, continuing from the previous
    grid point.  Only order-0 occurrences can be recovered this way.
    """
    known = set(fix.closed_form) | set(fix.tabulated)
    missing = [a for a in sys.aux_vars if a not in known]
    if not missing:
        return fix
    ys = [var(a) for a in missing]
    miss = set(missing)
    eqs = [e for e in sys.equations if any(type(v) is Var and v.name in miss for v in e.leaves)]
    env = trajectory_env(eqs, fix, sys.params, skip=set(ys))
    jac = [[partial(e, y) for y in ys] for e in eqs]
    grid = np.asarray(fix.grid)
    out = np.zeros((len(ys), len(grid)))
    guess = np.zeros(len(ys))
    for g in range(len(grid)):
        here = {leaf: np.array([vals[g]]) for leaf, vals in env.items()}
        here[T] = np.array([grid[g]])

        def at(yv, exprs):
            e2 = dict(here)
            e2.update({y: np.array([v]) for y, v in zip(ys, yv)})
            return evaluate_on_grid(exprs, e2, sys.params, 1)[0][:, 0]

        sol = least_squares(lambda yv: at(yv, eqs), guess,
                            jac=lambda yv: at(yv, [e for row in jac for e in row]).reshape(len(eqs), len(ys)),
                            xtol=tol, ftol=tol, gtol=tol)
        out[:, g] = guess = sol.x
    return fix.extended(tabulated={y.name: out[k] for k, y in enumerate(ys)})
