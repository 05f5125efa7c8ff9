import itertools
import math

from hypothesis import given

from daerelax.assign import SignatureMatrix, delta_hat, max_matching_size, signature, solve_assignment

from helpers import load
from oracles import brute_force_assignment, max_matching_brute
from strategies import signature_matrices

NEG_INF = -math.inf


def test_intro_signature_and_dual():
    sys = load("intro")
    sig = signature(sys)
    assert sig.as_lists() == [[1, 1, 0], [1, 1, NEG_INF], [NEG_INF, 0, 1]]
    d = solve_assignment(sig)
    assert (d.p, d.q, d.delta_hat) == ((0, 0, 0), (1, 1, 1), 3)
    assert d.optimal


def test_lcfail_dual():
    d = solve_assignment(signature(load("lcfail")))
    assert (d.p, d.q, d.delta_hat) == ((0, 0), (1, 1), 2)


def test_empty_equation_has_no_matching():
    sig = signature(load("no_matching"))
    assert sig.entries[1] == (NEG_INF, NEG_INF)
    d = solve_assignment(sig)
    assert d.delta_hat == NEG_INF and not d.optimal and d.matching is None


def test_transistor_delta_hat():
    sys = load("transistor")
    d = solve_assignment(signature(sys))
    assert d.p == (0,) * 8 and d.q == (1,) * 8
    assert delta_hat(sys) == 8


def test_singular_point_example_has_zero_offsets():
    d = solve_assignment(signature(load("singular_point")))
    assert (d.p, d.q, d.delta_hat) == ((0, 0), (0, 0), 0)


def test_intro_after_substitution_delta_hat_agrees_with_enumeration():
    from daerelax.textio import parse_dae
    sys = parse_dae("var x1, x2, x3; eq x3 = 0; eq x1' + x2' = 0; eq x2 + x3' = 0;")
    c = signature(sys).as_lists()
    assert delta_hat(sys) == brute_force_assignment(c) == 1


def test_matching_is_tight_and_lexicographically_smallest():
    c = [[1, 1, 0], [1, 1, NEG_INF], [NEG_INF, 0, 1]]
    d = solve_assignment(SignatureMatrix(c))
    assert d.matching == ((0, 0), (1, 1), (2, 2))
    assert all(d.q[j] - d.p[i] == c[i][j] for i, j in d.matching)


@given(signature_matrices(n_max=3, l_max=2))
def test_returned_dual_is_componentwise_least(c):
    d = solve_assignment(SignatureMatrix(c))
    if d.delta_hat == NEG_INF:
        return
    n = len(c)
    bound = n * 2 + 2
    for p in itertools.product(range(bound + 1), repeat=n):
        q = [max(c[i][j] + p[i] for i in range(n) if c[i][j] != NEG_INF) for j in range(n)]
        if sum(q) - sum(p) == d.delta_hat:
            assert all(a <= b for a, b in zip(d.p, p))
            assert all(a <= b for a, b in zip(d.q, q))


@given(signature_matrices(n_max=4))
def test_max_matching_size_against_enumeration(c):
    pattern = [[x != NEG_INF for x in row] for row in c]
    assert max_matching_size(pattern) == max_matching_brute(pattern)
