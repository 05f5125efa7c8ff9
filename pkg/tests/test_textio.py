import json

import pytest
from hypothesis import given

from daerelax import expr as E, instances
from daerelax.errors import DaeSyntaxError, UnknownSymbol
from daerelax.model import DaeSystem
from daerelax.relax import RelaxationOptions, relax
from daerelax.textio import (SCHEMA_VERSION, dump_report, parse_dae, parse_fixture, report_to_dict,
                             serialize_dae)

from helpers import load
from strategies import expressions


def test_intro_file_matches_hand_built_system():
    x1, x2, x3 = (E.var(n) for n in ("x1", "x2", "x3"))
    hand = DaeSystem([E.add(E.var("x1", 1), E.var("x2", 1), x3),
                      E.add(E.var("x1", 1), E.var("x2", 1)),
                      E.add(x2, E.var("x3", 1))], ["x1", "x2", "x3"])
    assert load("intro").structurally_equal(hand)


def test_primes_and_der_syntax_agree():
    a = parse_dae("var x1; eq x1'' = 0;")
    b = parse_dae("var x1; eq der(x1, 2) = 0;")
    assert a.equations[0] == b.equations[0] == E.var("x1", 2)


def test_unknown_identifier_is_located():
    with pytest.raises(UnknownSymbol) as info:
        parse_dae("var x1;\neq x1 + z = 0;")
    assert (info.value.line, info.value.col) == (2, 9)


def test_syntax_errors():
    with pytest.raises(DaeSyntaxError):
        parse_dae("var x1; eq x1 + = 0;")
    with pytest.raises(DaeSyntaxError):
        parse_dae("var x1; eq x1 = 0")


def test_equation_with_right_hand_side_and_lets():
    sys = parse_dae("param a = 2; var x1; let u = a*t; eq x1' = u;")
    assert sys.equations[0] == E.sub(E.var("x1", 1), E.mul(E.param("a"), E.T))


@pytest.mark.parametrize("name", instances.NAMES)
def test_round_trip_is_structural_identity(name):
    sys = load(name)
    again = parse_dae(serialize_dae(sys))
    assert again.structurally_equal(sys)
    assert serialize_dae(again) == serialize_dae(sys)


@given(expressions)
def test_round_trip_for_generated_equations(e):
    sys = DaeSystem([e], ["x1", "x2", "x3"])
    assert parse_dae(serialize_dae(sys)).structurally_equal(sys)


def test_ring_modulator_parameters_are_exact():
    p = load("ring_modulator").params
    want = {"C": 1.6e-8, "Cp": 1e-8, "Lh": 4.45, "Ls1": 2e-3, "Ls2": 5e-4, "Ls3": 5e-4,
            "gamma": 40.67286402e-9, "delta": 17.7493332, "R": 25000, "Rp": 50, "Rg1": 36.3,
            "Rg2": 17.3, "Rg3": 17.3, "Ri": 50, "Rc": 600}
    assert {k: p[k] for k in want} == want


def test_ring_modulator_initial_values_are_exact():
    bp = load("ring_modulator").base_point
    assert bp.t == 0.0
    for j in range(1, 16):
        assert bp.values[(f"x{j}", 0)] == 0.0
    slopes = {3: 6.2831853071796e4, 4: -6.2831853071796e4, 5: -6.2831853071796e4, 6: 6.2831853071796e4}
    for j in range(1, 16):
        assert bp.values.get((f"x{j}", 1), 0.0) == slopes.get(j, 0.0)


def test_transistor_parameters_and_initial_values_are_exact():
    sys = load("transistor")
    p = sys.params
    assert (p["Ub"], p["UF"], p["alpha"], p["beta"], p["R0"]) == (6, 0.026, 0.99, 1e-6, 1000)
    assert all(p[f"R{k}"] == 9000 for k in range(1, 10))
    assert [p[f"C{k}"] for k in range(1, 6)] == [float(f"{k}e-6") for k in range(1, 6)]
    x0 = [0, 3, 3, 6, 3, 3, 6, 0]
    dx0 = [51.3392765171807, 51.3392765171807, -166.666666666667, -24.9703285154063,
           -24.9703285154063, -83.3333333333333, -10.0002764024563, -10.0002764024563]
    bp = sys.base_point
    assert [bp.values[(f"x{j}", 0)] for j in range(1, 9)] == x0
    assert [bp.values[(f"x{j}", 1)] for j in range(1, 9)] == dx0


def test_pendulum_and_robot_arm_initial_values_are_exact():
    bp = load("pendulum").base_point
    assert [bp.values[(f"x{j}", 0)] for j in range(1, 6)] == [0.5, 8.5311195044981, 3.2432815053528, 0, 0]
    assert [bp.values[(f"x{j}", 1)] for j in range(1, 6)] == [0, 0, 0, -4.2435244785437, -2.45]
    bp = load("robot_arm").base_point
    assert [bp.values[(f"x{j}", 0)] for j in range(1, 6)] == \
        [0, 0.9537503511807, 1, -4.2781254864526, -0.7437526892114]
    assert [bp.values[(f"x{j}", 1)] for j in range(1, 6)] == \
        [-1, -2.5319168790105, 0, 10.7800085515996, 15.9886113811556]
    assert [bp.values[(f"x{j}", 2)] for j in range(1, 6)] == \
        [-1, -1.147631091390737, 1, 56.1923974325182, 62.7105238752326]


def test_fixture_parsing():
    fix = parse_fixture("trajectory { x1 = sin(t) + 1; x2 = 2*sin(t) + 1; grid = 0:0.1:1; }")
    assert len(fix.grid) == 11 and fix.grid[-1] == pytest.approx(1.0)
    assert set(fix.closed_form) == {"x1", "x2"}
    assert parse_fixture("trajectory { x1 = 1; grid = [0, 2]; }").grid == (0.0, 2.0)
    with pytest.raises(DaeSyntaxError):
        parse_fixture("trajectory { x1 = 1; }")


def test_report_is_versioned_json():
    rep = relax(load("lcfail"), RelaxationOptions(method="augmentation"))
    data = json.loads(dump_report(report_to_dict(rep, "lcfail.dae")))
    assert data["schema"] == SCHEMA_VERSION
    assert data["final_status"] == "OK"
    it = data["iterations"][0]
    assert it["pivot"] == {"r": 2, "I": [1], "J": [1], "kappa": 0}
    assert it["aux"] == ["y_1_1"] and it["xi"] == {"x2'": 1.0}
    assert parse_dae(data["final_system"]).n == 3
