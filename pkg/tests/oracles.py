"""Independent reference implementations used by the tests.

Nothing here calls into the package's algorithms: expressions are handed
to sympy, assignment problems are brute-forced or given to an LP solver,
and ranks are computed in exact rational arithmetic.
"""

from __future__ import annotations

import itertools
import math
from fractions import Fraction

import numpy as np
import sympy as sp
from scipy.optimize import linprog

from daerelax.expr import Add, Const, Func, Mul, Param, Pow, Time, Var

NEG_INF = -math.inf
t = sp.Symbol("t", real=True)


def _fn(name):
    return sp.Function(name)(t)


def to_sympy(e, params=None, as_functions=True):
    """Expr -> sympy.  Unknowns become functions of t (or plain symbols)."""
    params = params or {}
    tp = type(e)
    if tp is Const:
        return sp.Rational(e.value.numerator, e.value.denominator)
    if tp is Param:
        if e.name in params:
            return sp.nsimplify(params[e.name]) if isinstance(params[e.name], Fraction) else sp.Float(params[e.name])
        return sp.pi if e.name == "pi" else sp.Symbol(e.name)
    if tp is Time:
        return t
    if tp is Var:
        if as_functions:
            f = _fn(e.name)
            return f if e.order == 0 else sp.diff(f, t, e.order)
        return sp.Symbol(f"{e.name}__{e.order}")
    if tp is Func:
        return getattr(sp, e.name)(to_sympy(e.arg, params, as_functions))
    if tp is Pow:
        k = e.exp
        return to_sympy(e.base, params, as_functions) ** sp.Rational(k.numerator, k.denominator)
    if tp is Mul:
        return sp.Mul(*[to_sympy(f, params, as_functions) for f in e.factors])
    if tp is Add:
        return sp.Add(*[to_sympy(f, params, as_functions) for f in e.terms])
    raise TypeError(tp)


def leaf_symbol(name, order):
    return sp.Symbol(f"{name}__{order}")


def sympy_total_derivative(e, d):
    return sp.diff(to_sympy(e), t, d)


def sympy_partial(e, name, order):
    return sp.diff(to_sympy(e, as_functions=False), leaf_symbol(name, order))


def sympy_equal(a, b, points=6, seed=0, tol=1e-9):
    """Compare two sympy expressions in symbols at random points (relative)."""
    syms = sorted((a - b).free_symbols | a.free_symbols | b.free_symbols, key=str)
    fa = sp.lambdify(syms, a, "mpmath")
    fb = sp.lambdify(syms, b, "mpmath")
    rng = np.random.default_rng(seed)
    for _ in range(points):
        xs = [float(v) for v in rng.uniform(0.3, 1.3, len(syms))]
        va, vb = complex(fa(*xs)), complex(fb(*xs))
        if abs(va - vb) > tol * max(1.0, abs(va), abs(vb)):
            return False
    return True


def functions_to_symbols(e):
    """Replace x(t) and its t-derivatives by plain symbols x__k."""
    derivs = sorted(e.atoms(sp.Derivative), key=lambda d: -d.derivative_count)
    e = e.subs({d: leaf_symbol(d.expr.func.__name__, d.derivative_count) for d in derivs})
    funcs = [f for f in e.atoms(sp.Function) if f.args == (t,) and not hasattr(sp, f.func.__name__)]
    return e.subs({f: leaf_symbol(f.func.__name__, 0) for f in funcs})


# ----------------------------------------------------------------------
# assignment problems


def brute_force_assignment(c):
    """Max total weight of a perfect matching, or -inf."""
    n = len(c)
    best = NEG_INF
    for perm in itertools.permutations(range(n)):
        w = 0
        for i, j in enumerate(perm):
            if c[i][j] == NEG_INF:
                break
            w += c[i][j]
        else:
            best = max(best, w)
    return best


def lp_dual_value(c):
    """Optimal value of min sum q - sum p s.t. q_j - p_i >= c_ij, p >= 0 (LP relaxation)."""
    n = len(c)
    cost = np.concatenate([-np.ones(n), np.ones(n)])
    A, b = [], []
    for i in range(n):
        for j in range(n):
            if c[i][j] != NEG_INF:
                row = np.zeros(2 * n)
                row[i], row[n + j] = 1.0, -1.0
                A.append(row)
                b.append(-c[i][j])
    res = linprog(cost, A_ub=np.array(A), b_ub=np.array(b), bounds=[(0, None)] * (2 * n), method="highs")
    return res.fun if res.status == 0 else None


def max_matching_brute(pattern):
    n, m = len(pattern), len(pattern[0]) if pattern else 0
    best = 0
    for k in range(min(n, m), 0, -1):
        for rows in itertools.combinations(range(n), k):
            for cols in itertools.permutations(range(m), k):
                if all(pattern[r][c] for r, c in zip(rows, cols)):
                    return k
    return best


def exact_rank(rows):
    """Rank of a matrix of Fractions/ints by exact elimination."""
    return sp.Matrix([[sp.Rational(Fraction(x).numerator, Fraction(x).denominator) for x in r] for r in rows]).rank()


def mp_is_zero(expr, points=4, seed=0, dps=40, tol=1e-25):
    """Zero test by evaluating a sympy expression at random points in high precision."""
    import mpmath
    if expr == 0:
        return True
    syms = sorted(expr.free_symbols, key=str)
    f = sp.lambdify(syms, expr, "mpmath")
    rng = np.random.default_rng(seed)
    with mpmath.workdps(dps):
        for _ in range(points):
            xs = [mpmath.mpf(float(v)) for v in rng.uniform(0.3, 1.3, len(syms))]
            if abs(f(*xs)) > tol:
                return False
    return True


def jacobian_pattern_sympy(equations, columns, p, q, params=None):
    """Nonzero pattern of dF_i/dx_j^(q_j - p_i) computed with sympy."""
    rows = []
    for i, e in enumerate(equations):
        se = to_sympy(e, params, as_functions=False)
        row = []
        for j, name in enumerate(columns):
            k = q[j] - p[i]
            row.append(k >= 0 and not mp_is_zero(sp.diff(se, leaf_symbol(name, k))))
        rows.append(row)
    return rows


def term_rank_scipy(pattern):
    from scipy.sparse import csr_matrix
    from scipy.sparse.csgraph import maximum_bipartite_matching
    if not pattern:
        return 0
    m = maximum_bipartite_matching(csr_matrix(np.array(pattern, dtype=int)), perm_type="column")
    return int(np.sum(m >= 0))


def depends_on(expr_sym, name, k):
    return not mp_is_zero(sp.diff(expr_sym, leaf_symbol(name, k)))
