"""DAE systems, closed-form trajectories and residual evaluation.

Equations are stored as expressions implicitly equated to zero.  Row and
column indices are 0-based throughout the Python API; the text formats and
the CLI use 1-based numbering.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Mapping, Sequence

import numpy as np

from .errors import DaeError, IndexOutOfRange, MissingClosedForm, NonSquareSystem
from .expr import Expr, T, Time, Var, as_expr, max_order, total_derivative, variables
from .numeric import Point, evaluate_on_grid


@dataclass(frozen=True)
class DaeSystem:
    equations: tuple
    variables: tuple
    params: Mapping = field(default_factory=dict)
    base_point: Point | None = None
    aux_vars: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "equations", tuple(as_expr(e) for e in self.equations))
        object.__setattr__(self, "variables", tuple(self.variables))
        object.__setattr__(self, "aux_vars", tuple(self.aux_vars))
        object.__setattr__(self, "params", dict(self.params))
        cols = self.columns
        if len(set(cols)) != len(cols):
            raise DaeError("duplicate variable names")
        known = set(cols)
        for i, e in enumerate(self.equations):
            for v in variables(e):
                if v.name not in known:
                    raise DaeError(f"equation {i + 1} uses undeclared variable {v.name!r}")

    @property
    def columns(self) -> tuple:
        """Unknown functions in column order: original variables then aux variables."""
        return self.variables + self.aux_vars

    @property
    def n(self) -> int:
        return len(self.equations)

    @property
    def order(self) -> int:
        """l: the highest derivative order occurring anywhere."""
        return max((max_order(e) for e in self.equations), default=0)

    @property
    def is_square(self) -> bool:
        return len(self.equations) == len(self.columns)

    def require_square(self):
        if not self.is_square:
            raise NonSquareSystem(
                f"{len(self.equations)} equations for {len(self.columns)} unknowns")

    def with_equations(self, equations: Sequence[Expr], aux_vars: Sequence[str] | None = None,
                       base_point: Point | None | str = "keep") -> "DaeSystem":
        kw = {"equations": tuple(equations)}
        if aux_vars is not None:
            kw["aux_vars"] = tuple(aux_vars)
        if base_point != "keep":
            kw["base_point"] = base_point
        return replace(self, **kw)

    def structurally_equal(self, other: "DaeSystem") -> bool:
        return (self.equations == other.equations and self.variables == other.variables
                and self.aux_vars == other.aux_vars and self.params == other.params
                and self.base_point == other.base_point)


def subsystem(sys: DaeSystem, rows: Sequence[int]) -> list:
    """Equations restricted to ``rows`` in increasing index order."""
    out = []
    for i in sorted(set(rows)):
        if not 0 <= i < sys.n:
            raise IndexOutOfRange(f"row {i} outside 0..{sys.n - 1}")
        out.append(sys.equations[i])
    return out


@dataclass(frozen=True)
class TrajectoryFixture:
    """Closed-form solution candidates on a time grid.

    ``tabulated`` carries grid values for unknowns that have no closed form
    (aux variables recovered numerically); only their order-0 values exist.
    """

    closed_form: Mapping
    grid: tuple
    tabulated: Mapping = field(default_factory=dict)

    def __post_init__(self):
        cf = {k: as_expr(v) for k, v in dict(self.closed_form).items()}
        for name, e in cf.items():
            if any(type(leaf) is Var for leaf in e.leaves):
                raise DaeError(f"closed form for {name!r} depends on unknowns")
        object.__setattr__(self, "closed_form", cf)
        object.__setattr__(self, "grid", tuple(float(g) for g in self.grid))
        object.__setattr__(self, "tabulated",
                           {k: np.asarray(v, dtype=float) for k, v in dict(self.tabulated).items()})

    def extended(self, closed_form: Mapping | None = None, tabulated: Mapping | None = None):
        cf = dict(self.closed_form)
        cf.update(closed_form or {})
        tb = dict(self.tabulated)
        tb.update(tabulated or {})
        return TrajectoryFixture(cf, self.grid, tb)


def trajectory_env(exprs: Sequence[Expr], fix: TrajectoryFixture, params: Mapping | None = None,
                   skip=frozenset()) -> dict:
    """Leaf values along the trajectory at every grid point (leaves in ``skip`` are left out)."""
    grid = np.asarray(fix.grid)
    env = {}
    leaves = set()
    for e in exprs:
        leaves |= e.leaves
    derived: dict = {}
    for leaf in leaves - set(skip):
        if type(leaf) is Time:
            env[leaf] = grid
            continue
        name, k = leaf.name, leaf.order
        if name in fix.closed_form:
            key = (name, k)
            if key not in derived:
                derived[key] = total_derivative(fix.closed_form[name], k)
            env[leaf] = derived[key]
        elif name in fix.tabulated and k == 0:
            env[leaf] = fix.tabulated[name]
        else:
            raise MissingClosedForm(f"no closed form for {name} (order {k})")
    symbolic = [(leaf, e) for leaf, e in env.items() if isinstance(e, Expr)]
    if symbolic:
        vals, _ = evaluate_on_grid([e for _, e in symbolic], {T: grid}, params, len(grid))
        for (leaf, _), row in zip(symbolic, vals):
            env[leaf] = row
    return env


def residuals(sys: DaeSystem, fix: TrajectoryFixture) -> np.ndarray:
    """Matrix of F_i evaluated along the trajectory, shape ``(len(grid), n)``."""
    if not fix.grid:
        return np.zeros((0, sys.n))
    env = trajectory_env(sys.equations, fix, sys.params)
    env.setdefault(T, np.asarray(fix.grid))
    vals, _ = evaluate_on_grid(sys.equations, env, sys.params, len(fix.grid))
    return vals.T
