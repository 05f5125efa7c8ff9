import math

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, strategies as st

from daerelax import expr as E
from daerelax.numeric import Point, evaluate
from daerelax.printer import to_text

from helpers import ex
from oracles import functions_to_symbols, sympy_equal, sympy_partial, sympy_total_derivative, to_sympy
from strategies import NAMES, expressions


def _value(e, leaf_values, tval=0.4):
    pt = Point(tval, leaf_values)
    return evaluate(e, pt)


def _random_point(rng):
    return {(n, k): float(rng.uniform(0.2, 1.2)) for n in ("x1", "x2", "x3", "x4") for k in range(5)}


# -- total derivative ---------------------------------------------------------------------------


def test_total_derivative_of_product_with_time_term():
    e = ex("x1'*x2' - 2*cos(t)^2")
    got = E.total_derivative(e, 1)
    want = ex("x1''*x2' + x1'*x2'' + 4*cos(t)*sin(t)")
    assert E.simplify(E.sub(got, want)) == E.ZERO


def test_total_derivative_matches_finite_differences_along_trajectories():
    # x_j(t) = a_j sin(b_j t) + c_j; compare d/dt F(t, x(t), x'(t)) with a central difference
    e = ex("x1'*x2' - 2*cos(t)^2")
    de = E.total_derivative(e, 1)
    rng = np.random.default_rng(3)
    for _ in range(10):
        a, b, c = rng.uniform(0.5, 2, 3), rng.uniform(0.5, 2, 3), rng.uniform(-1, 1, 3)

        def leaf_vals(tv):
            out = {}
            for j, name in enumerate(("x1", "x2", "x3")):
                for k in range(4):
                    amp = a[j] * b[j] ** k
                    ph = math.sin(b[j] * tv + k * math.pi / 2)
                    out[(name, k)] = amp * ph + (c[j] if k == 0 else 0.0)
            return out

        tv, h = float(rng.uniform(0, 3)), 1e-5
        fd = (_value(e, leaf_vals(tv + h), tv + h) - _value(e, leaf_vals(tv - h), tv - h)) / (2 * h)
        assert _value(de, leaf_vals(tv), tv) == pytest.approx(fd, rel=1e-6, abs=1e-8)


def test_total_derivative_of_constant_vanishes():
    assert E.total_derivative(E.const(7), 1) == E.ZERO
    assert E.total_derivative(E.param("C1"), 2) == E.ZERO


def test_total_derivative_linear_sum():
    got = E.total_derivative(ex("x2 + x3'"), 1)
    assert got == ex("x2' + x3''")


def test_total_derivative_zero_times_is_identity():
    e = ex("sin(x1)*x2'")
    assert E.total_derivative(e, 0) is e


@given(expressions, st.integers(1, 2))
def test_total_derivative_agrees_with_sympy(e, d):
    ours = to_sympy(E.total_derivative(e, d))
    theirs = sympy_total_derivative(e, d)
    assert sympy_equal(functions_to_symbols(ours), functions_to_symbols(theirs))


# -- partial derivatives ------------------------------------------------------------------------


def test_partial_of_product():
    e = ex("x1'*x2'")
    assert E.partial(e, "x1", 1) == E.var("x2", 1)
    assert E.partial(e, "x1", 0) == E.ZERO


def test_partial_with_tanh_matches_sech_squared_and_finite_differences():
    e = ex("2*x1*x2' + tanh(x1' - x4)")
    got = E.partial(e, "x1", 1)
    want = ex("1 - tanh(x1' - x4)^2")
    rng = np.random.default_rng(5)
    for _ in range(10):
        vals = _random_point(rng)
        h = 1e-6
        up, dn = dict(vals), dict(vals)
        up[("x1", 1)] += h
        dn[("x1", 1)] -= h
        fd = (_value(e, up) - _value(e, dn)) / (2 * h)
        assert _value(got, vals) == pytest.approx(fd, rel=1e-7)
        assert _value(got, vals) == pytest.approx(_value(want, vals), rel=1e-12)


@given(expressions, st.sampled_from(NAMES), st.integers(0, 2))
def test_partial_agrees_with_sympy(e, name, k):
    ours = to_sympy(E.partial(e, name, k), as_functions=False)
    assert sympy_equal(ours, sympy_partial(e, name, k))


def test_partial_accepts_a_variable_node():
    e = ex("x1'^3")
    assert E.partial(e, E.var("x1", 1)) == E.partial(e, "x1", 1)


# -- substitution -------------------------------------------------------------------------------


def test_substitute_cancels_terms():
    e = ex("x1' + x2' + x3")
    got = E.substitute(e, {E.var("x1", 1): E.neg(E.var("x2", 1))})
    assert got == E.var("x3")
    rng = np.random.default_rng(1)
    for _ in range(10):
        vals = _random_point(rng)
        lhs = _value(got, vals)
        vals[("x1", 1)] = -vals[("x2", 1)]
        assert lhs == pytest.approx(_value(e, vals), abs=1e-14)


def test_substitute_empty_map_is_identity():
    e = ex("x1*sin(x2') + t")
    assert E.substitute(e, {}) == e


def test_substitute_aux_solution_simplifies_to_zero():
    y, xi = E.var("y"), E.param("xi")
    e = E.sub(E.mul(y, xi), E.mul(2, E.power(E.cos(E.T), 2)))
    sol = E.div(E.mul(2, E.power(E.cos(E.T), 2)), xi)
    got = E.simplify(E.substitute(e, {y: sol}))
    assert got == E.ZERO
    assert sp.simplify(to_sympy(E.substitute(e, {y: sol}))) == 0


# -- simplification and identities --------------------------------------------------------------


def test_pythagorean_identity_simplifies():
    assert E.simplify(ex("sin(t)^2 + cos(t)^2 - 1")) == E.ZERO


def test_commutativity_cancels():
    assert ex("x1'*x2' - x2'*x1'") == E.ZERO


def test_sum_is_not_zero():
    assert E.simplify(ex("x1' + x2'")) != E.ZERO


@given(expressions)
def test_simplify_preserves_value(e):
    s = E.simplify(e)
    assert sympy_equal(to_sympy(s, as_functions=False), to_sympy(e, as_functions=False))


@given(expressions)
def test_printer_round_trips_through_parser(e):
    text = to_text(e)
    back = ex(text)
    assert sympy_equal(to_sympy(back, as_functions=False), to_sympy(e, as_functions=False))


def test_hash_consing_gives_structural_equality():
    assert ex("x1*x2 + 3") == ex("3 + x2*x1")
    assert hash(ex("x1*x2 + 3")) == hash(ex("3 + x2*x1"))


def test_exact_rational_constants():
    e = E.add(E.const("1/3"), E.const("1/6"))
    assert e == E.const("1/2")
    assert to_text(e) == "0.5"
    assert to_text(E.const("1/3")) == "(1/3)"


def test_orders_and_variables():
    e = ex("x1''*x2 + sin(x1) + x3'")
    assert sorted(E.derivative_orders(e, "x1")) == [0, 2]
    assert E.max_order(e) == 2
    assert {v.name for v in E.variables(e)} == {"x1", "x2", "x3"}
