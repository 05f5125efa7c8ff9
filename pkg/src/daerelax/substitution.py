"""Substitution method and LC-method.

Substitution differentiates the equations of I, solves them for the target
derivatives x_J^(q_J - p_r) and substitutes the solution into F_r.  Only
systems affine in the targets are solved; anything else is reported as
:class:`NonlinearTargetsError` so the caller can fall back to augmentation.

The LC-method replaces F_r by ``F_r + sum_i u_i F_i^(p_i - p_r)`` for the
cokernel vector ``u_I = -D[r, J] D[I, J]^-1``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

from .assign import DualSolution, solve_assignment, signature, tester_for
from .errors import (LCConditionError, NonlinearTargetsError, PostconditionViolation,
                     SampleDomainError, SingularAtConstructionError)
from .expr import (ZERO, Expr, add, as_expr, div, mul, neg, partial, simplify, sub, substitute,
                   total_derivative, var)
from .jacobian import jacobian_entries
from .model import DaeSystem
from .numeric import NEG_INF, ZeroTester
from .pivot import PivotChoice


@dataclass(frozen=True)
class SubstitutionStep:
    method: str
    pivot: PivotChoice
    targets: tuple
    reduced: tuple
    explicit_map: Mapping
    new_fr: Expr
    new_system: DaeSystem
    delta_before: float
    delta_after: float
    new_dual: DualSolution
    cokernel: tuple = field(default=())


def reduced_system(sys: DaeSystem, dual: DualSolution, pivot: PivotChoice) -> list:
    """F_i differentiated p_i - p_r times for every i in I."""
    pr = dual.p[pivot.r]
    return [total_derivative(sys.equations[i], dual.p[i] - pr) for i in pivot.I]


def target_vars(sys: DaeSystem, dual: DualSolution, pivot: PivotChoice) -> list:
    pr = dual.p[pivot.r]
    cols = sys.columns
    return [var(cols[j], dual.q[j] - pr) for j in pivot.J]


# ----------------------------------------------------------------------
# symbolic linear algebra


def _clean(e: Expr, zt: ZeroTester) -> Expr:
    e = simplify(e)
    return ZERO if zt.is_zero(e) else e


def solve_linear(A: Sequence[Sequence[Expr]], b: Sequence[Expr], zt: ZeroTester) -> list:
    """Solve ``A x = b`` over expressions by Gaussian elimination.

    Pivots are the smallest entries (by node count) that fail the zero test.
    """
    n = len(A)
    M = [list(map(as_expr, row)) + [as_expr(bi)] for row, bi in zip(A, b)]
    order = []
    for k in range(n):
        cands = [i for i in range(k, n) if M[i][k] is not ZERO and not zt.is_zero(M[i][k])]
        if not cands:
            raise SingularAtConstructionError(f"no nonzero pivot in column {k} of the target block")
        piv = min(cands, key=lambda i: (M[i][k].size, i))
        M[k], M[piv] = M[piv], M[k]
        for i in range(k + 1, n):
            if M[i][k] is ZERO:
                continue
            f = div(M[i][k], M[k][k])
            M[i][k] = ZERO
            for j in range(k + 1, n + 1):
                if M[k][j] is not ZERO:
                    M[i][j] = _clean(sub(M[i][j], mul(f, M[k][j])), zt)
        order.append(k)
    x = [ZERO] * n
    for k in reversed(range(n)):
        acc = M[k][n]
        for j in range(k + 1, n):
            if M[k][j] is not ZERO:
                acc = sub(acc, mul(M[k][j], x[j]))
        x[k] = simplify(div(acc, M[k][k]))
    return x


def affine_coefficients(eqs: Sequence[Expr], targets: Sequence[Expr], zt: ZeroTester):
    """``(A, b)`` with ``eqs = A targets + b``; raises when not affine."""
    for g in eqs:
        for a_i, a in enumerate(targets):
            da = partial(g, a)
            if da is ZERO:
                continue
            for b_ in targets[a_i:]:
                if not zt.is_zero(partial(da, b_)):
                    raise NonlinearTargetsError(
                        "the reduced system is not affine in the target derivatives")
    zero_map = {t: ZERO for t in targets}
    A = [[partial(g, t) for t in targets] for g in eqs]
    b = [substitute(g, zero_map) for g in eqs]
    return A, b


def solve_targets(reduced: Sequence[Expr], targets: Sequence[Expr], zt: ZeroTester) -> dict:
    """Explicit map target -> expression free of targets, solving the affine system."""
    if len(reduced) != len(targets):
        raise ValueError("need as many equations as targets")
    A, b = affine_coefficients(reduced, targets, zt)
    try:
        x = solve_linear(A, [neg(bi) for bi in b], zt)
    except SampleDomainError as exc:
        raise SingularAtConstructionError(str(exc)) from exc
    return dict(zip(targets, x))


# ----------------------------------------------------------------------
# postconditions shared with the LC-method


def prune_independent(e: Expr, zt: ZeroTester) -> Expr:
    """Drop syntactic occurrences of variables that ``e`` does not depend on."""
    base = zt.base
    for leaf in sorted(e.leaves, key=lambda n: n.sort_key, reverse=True):
        if leaf not in e.leaves or not hasattr(leaf, "order"):
            continue
        if not zt.is_zero(partial(e, leaf)):
            continue
        values = []
        if base is not None and base.get(leaf) is not None:
            values.append(base.get(leaf))
        values += [0, 1]
        for v in values:
            try:
                cand = simplify(substitute(e, {leaf: v}))
                if zt.is_zero(sub(cand, e)):
                    e = cand
                    break
            except (ZeroDivisionError, SampleDomainError, ValueError):
                continue
    return e


def check_lemma45(new_fr: Expr, sys: DaeSystem, dual: DualSolution, pivot: PivotChoice, zt: ZeroTester):
    pr = dual.p[pivot.r]
    for j, x in enumerate(sys.columns):
        k = dual.q[j] - pr
        if k >= 0 and not zt.is_zero(partial(new_fr, x, k)):
            raise PostconditionViolation(
                f"modified equation still depends on {x} of order {k}")


def _finish(method, sys, dual, pivot, targets, reduced, explicit, new_fr, zt, cokernel=()):
    new_fr = prune_independent(new_fr, zt)
    check_lemma45(new_fr, sys, dual, pivot, zt)
    eqs = list(sys.equations)
    eqs[pivot.r] = new_fr
    new_sys = sys.with_equations(eqs)
    new_dual = solve_assignment(signature(new_sys, zt))
    if not (new_dual.delta_hat == NEG_INF or new_dual.delta_hat < dual.delta_hat):
        raise PostconditionViolation(
            f"delta-hat did not decrease ({dual.delta_hat} -> {new_dual.delta_hat})")
    return SubstitutionStep(method, pivot, tuple(targets), tuple(reduced), explicit, new_fr, new_sys,
                            dual.delta_hat, new_dual.delta_hat, new_dual, tuple(cokernel))


def substitute_step(sys: DaeSystem, dual: DualSolution, pivot: PivotChoice, cfg=None) -> SubstitutionStep:
    zt = tester_for(sys, cfg)
    reduced = reduced_system(sys, dual, pivot)
    targets = target_vars(sys, dual, pivot)
    explicit = solve_targets(reduced, targets, zt)
    new_fr = simplify(substitute(sys.equations[pivot.r], explicit))
    return _finish("substitution", sys, dual, pivot, targets, reduced, explicit, new_fr, zt)


def cokernel_vector(sys: DaeSystem, dual: DualSolution, pivot: PivotChoice, zt: ZeroTester) -> list:
    """u_I = -D[r, J] D[I, J]^-1, via the transposed solve D[I, J]^T w = D[r, J]^T."""
    D = jacobian_entries(sys.equations, sys.columns, dual.p, dual.q)
    I, J, r = pivot.I, pivot.J, pivot.r
    At = [[D[i][j] for i in I] for j in J]
    rhs = [D[r][j] for j in J]
    w = solve_linear(At, rhs, zt)
    return [simplify(neg(wi)) for wi in w]


def lc_step(sys: DaeSystem, dual: DualSolution, pivot: PivotChoice, cfg=None) -> SubstitutionStep:
    zt = tester_for(sys, cfg)
    u = cokernel_vector(sys, dual, pivot, zt)
    pr = dual.p[pivot.r]
    for ui, i in zip(u, pivot.I):
        for j, x in enumerate(sys.columns):
            limit = dual.q[j] - pr
            if zt.sigma_order(ui, x) >= limit:
                raise LCConditionError(
                    f"cokernel entry for row {i + 1} depends on {x} of order >= {limit}")
    reduced = reduced_system(sys, dual, pivot)
    new_fr = simplify(add(sys.equations[pivot.r], *[mul(ui, g) for ui, g in zip(u, reduced)]))
    targets = target_vars(sys, dual, pivot)
    return _finish("lc", sys, dual, pivot, targets, reduced, {}, new_fr, zt, cokernel=u)
