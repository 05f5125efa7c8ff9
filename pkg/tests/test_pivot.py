import itertools

import pytest

from daerelax import expr as E
from daerelax.assign import signature, solve_assignment
from daerelax.errors import DaeError
from daerelax.jacobian import SampledMatrix, system_jacobian
from daerelax.numeric import Point, ZeroTester
from daerelax.relax import _affine_preference
from daerelax.pivot import (PivotChoice, alternative_columns, check_conditions, find_pivot, repivot_at_point,
                            validate_pivot)

from helpers import load


def _setup(name):
    sys = load(name)
    zt = ZeroTester(params=sys.params, base=sys.base_point)
    dual = solve_assignment(signature(sys, zt))
    return sys, dual, system_jacobian(sys, dual, zt), zt


def _all_valid_triples(jac, p, zt):
    sm = SampledMatrix.from_entries(jac.entries, zt)
    n, m = jac.shape
    out = []
    for r in range(n):
        rest = [i for i in range(n) if i != r]
        for k in range(1, n):
            for I in itertools.combinations(rest, k):
                for J in itertools.combinations(range(m), k):
                    if not check_conditions(sm, p, r, I, J):
                        out.append((r, I, J))
    return out


def test_intro_pivot_is_smallest_valid_triple():
    sys, dual, jac, zt = _setup("intro")
    piv = find_pivot(jac, dual.p, zt)
    assert (piv.r, piv.I, piv.J) == (0, (1,), (0,))
    assert (piv.r, piv.I, piv.J) in _all_valid_triples(jac, dual.p, zt)
    assert piv.kappa == 0 and piv.m == 1
    assert piv.T == (1, 2) and piv.S(3) == (2,)


def test_lcfail_pivot_smallest_index_and_affine_preference():
    sys, dual, jac, zt = _setup("lcfail")
    plain = find_pivot(jac, dual.p, zt)
    assert plain.one_based() == {"r": 1, "I": [2], "J": [1], "kappa": 0}
    # preferring a row set whose reduced system is affine in the targets picks F1 as source
    piv = find_pivot(jac, dual.p, zt, prefer=_affine_preference(sys, dual, zt))
    assert piv.one_based() == {"r": 2, "I": [1], "J": [1], "kappa": 0}


def test_transistor_first_pivot():
    sys, dual, jac, zt = _setup("transistor")
    piv = find_pivot(jac, dual.p, zt)
    assert (piv.r, piv.I, piv.J) == (0, (1,), (0,))


def test_full_rank_has_no_pivot():
    sys, dual, jac, zt = _setup("singular_point")
    with pytest.raises(DaeError):
        find_pivot(jac, dual.p, zt)


def test_manual_pivot_validation():
    sys, dual, jac, zt = _setup("intro")
    assert validate_pivot(jac, dual.p, 0, (1,), (1,), zt).J == (1,)
    with pytest.raises(DaeError, match="C1"):
        validate_pivot(jac, dual.p, 0, (1,), (2,), zt)
    with pytest.raises(DaeError, match="C2"):
        validate_pivot(jac, dual.p, 0, (2,), (2,), zt)
    with pytest.raises(DaeError):
        validate_pivot(jac, dual.p, 0, (0,), (0,), zt)
    with pytest.raises(DaeError, match="C3"):
        validate_pivot(jac, (1, 0, 0), 0, (1,), (0,), zt)


def test_dynamic_pivoting_prefers_better_conditioned_column():
    sys, dual, jac, zt = _setup("lcfail")
    pt = Point(0.0, {("x1", 1): 1.0, ("x2", 1): 1e-9})
    base = find_pivot(jac, dual.p, zt)
    # D[I, J] for I = {1}: |x2'| = 1e-9 for J = {1}, |x1'| = 1 for J = {2}
    assert repivot_at_point(jac, dual.p, pt, cfg=zt, base=base).J == (1,)


def test_dynamic_pivoting_keeps_the_best_choice():
    sys, dual, jac, zt = _setup("lcfail")
    pt = Point(0.0, {("x1", 1): 1e-9, ("x2", 1): 1.0})
    base = find_pivot(jac, dual.p, zt)
    assert repivot_at_point(jac, dual.p, pt, cfg=zt, base=base) == base


def test_alternative_columns_orders_by_determinant_at_point():
    x = E.var("x1")
    from daerelax.model import DaeSystem
    # rows 1, 2 both depend on x1' and x2'; D[{2}, {1}] vanishes at x1 = 0
    sys = DaeSystem([E.add(E.mul(x, E.var("x1", 1)), E.var("x2", 1)),
                     E.add(E.mul(2, x, E.var("x1", 1)), E.mul(2, E.var("x2", 1)))], ["x1", "x2"])
    zt = ZeroTester()
    dual = solve_assignment(signature(sys, zt))
    jac = system_jacobian(sys, dual, zt)
    base = PivotChoice(1, (0,), (0,), 0, 2)
    alts = alternative_columns(jac, dual.p, base, zt, Point(0.0, {("x1", 0): 0.0}))
    assert [a.J for a in alts] == [(1,)]
    assert repivot_at_point(jac, dual.p, Point(0.0, {("x1", 0): 0.0}), cfg=zt, base=base).J == (1,)
