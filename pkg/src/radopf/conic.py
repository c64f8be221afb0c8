"""Second-order cone programs with convex-quadratic objectives.

A :class:`ConicProgram` collects variables with box bounds, linear equalities
and inequalities, rotated-cone couplings ``|z|^2 <= u*w`` and an objective
``c'x + sum_i q_i x_i^2 + const``.  :func:`solve` compiles the program to the
standard conic form and runs the in-repo interior-point method; the diagonal
quadratic terms are lifted into a single rotated-cone epigraph.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _ipm

INF = float("inf")

OPTIMAL = _ipm.OPTIMAL
INFEASIBLE = _ipm.INFEASIBLE
UNBOUNDED = _ipm.UNBOUNDED
FAILED = _ipm.FAILED


class ProgramError(ValueError):
    """Malformed program (inconsistent dimensions or coefficients)."""


def _as_term(term):
    """Normalize a linear expression to (idx array, coef array, const)."""
    if isinstance(term, (int, np.integer)):
        return np.array([term]), np.array([1.0]), 0.0
    if isinstance(term, (float, np.floating)):
        return np.empty(0, dtype=int), np.empty(0), float(term)
    idx, coef = term[0], term[1]
    const = float(term[2]) if len(term) > 2 else 0.0
    return (np.atleast_1d(np.asarray(idx, dtype=int)),
            np.atleast_1d(np.asarray(coef, dtype=float)), const)


@dataclass
class _Row:
    idx: np.ndarray
    coef: np.ndarray
    rhs: float


@dataclass
class _Cone:
    u: tuple
    w: tuple
    zs: list


class ConicProgram:
    """Builder for a conic program over named scalar variables."""

    def __init__(self):
        self.names: list[str] = []
        self.lb: list[float] = []
        self.ub: list[float] = []
        self.cost: list[float] = []
        self.qcost: list[float] = []
        self.cost_const = 0.0
        self.eqs: list[_Row] = []
        self.ineqs: list[_Row] = []
        self.cones: list[_Cone] = []

    # ------------------------------------------------------------------ build
    @property
    def num_vars(self) -> int:
        return len(self.names)

    def add_var(self, name: str, lb: float = -INF, ub: float = INF,
                cost: float = 0.0, qcost: float = 0.0) -> int:
        if lb > ub:
            raise ProgramError(f"variable {name}: lb {lb} > ub {ub}")
        if qcost < 0:
            raise ProgramError(f"variable {name}: negative quadratic cost")
        self.names.append(name)
        self.lb.append(float(lb))
        self.ub.append(float(ub))
        self.cost.append(float(cost))
        self.qcost.append(float(qcost))
        return len(self.names) - 1

    def set_bounds(self, i: int, lb: float, ub: float):
        if lb > ub:
            raise ProgramError(f"variable {self.names[i]}: lb {lb} > ub {ub}")
        self.lb[i] = float(lb)
        self.ub[i] = float(ub)

    def add_eq(self, idx, coef, rhs: float):
        idx, coef, const = _as_term((idx, coef))
        self.eqs.append(_Row(idx, coef, float(rhs) - const))

    def add_ineq(self, idx, coef, rhs: float):
        """a'x <= rhs."""
        idx, coef, const = _as_term((idx, coef))
        self.ineqs.append(_Row(idx, coef, float(rhs) - const))

    def add_rotated_cone(self, u, w, zs):
        """|z|^2 <= u * w with u, w >= 0; each argument is a variable index,
        a constant, or a tuple (idx, coef[, const])."""
        self.cones.append(_Cone(_as_term(u), _as_term(w), [_as_term(t) for t in zs]))

    # ------------------------------------------------------------- inspection
    def objective_value(self, x: np.ndarray) -> float:
        c = np.asarray(self.cost)
        q = np.asarray(self.qcost)
        return float(c @ x + q @ (x * x) + self.cost_const)

    def max_violation(self, x: np.ndarray) -> float:
        """Worst constraint violation at x, computed from the raw data."""
        worst = 0.0
        lb = np.asarray(self.lb)
        ub = np.asarray(self.ub)
        finite_l = lb > -INF
        finite_u = ub < INF
        if np.any(finite_l):
            worst = max(worst, float(np.max(lb[finite_l] - x[finite_l], initial=0.0)))
        if np.any(finite_u):
            worst = max(worst, float(np.max(x[finite_u] - ub[finite_u], initial=0.0)))
        for row in self.eqs:
            worst = max(worst, abs(float(row.coef @ x[row.idx]) - row.rhs))
        for row in self.ineqs:
            worst = max(worst, float(row.coef @ x[row.idx]) - row.rhs)
        for cone in self.cones:
            u = self._term_value(cone.u, x)
            w = self._term_value(cone.w, x)
            z2 = sum(self._term_value(t, x) ** 2 for t in cone.zs)
            worst = max(worst, -u, -w, z2 - u * w)
        return worst

    @staticmethod
    def _term_value(term, x):
        idx, coef, const = term
        return float(coef @ x[idx]) + const

    def dump(self) -> str:
        """Human-readable text form of the program (see README)."""
        out = [f"vars {self.num_vars}"]
        for i, name in enumerate(self.names):
            out.append(f"  {name}: in [{self.lb[i]}, {self.ub[i]}]"
                       f" cost {self.cost[i]} qcost {self.qcost[i]}")

        def expr(idx, coef):
            return " + ".join(f"{c:g}*{self.names[i]}" for i, c in zip(idx, coef))

        for row in self.eqs:
            out.append(f"eq: {expr(row.idx, row.coef)} == {row.rhs:g}")
        for row in self.ineqs:
            out.append(f"le: {expr(row.idx, row.coef)} <= {row.rhs:g}")

        def term(t):
            idx, coef, const = t
            body = expr(idx, coef)
            if const or not body:
                return f"({body} + {const:g})" if body else f"{const:g}"
            return body

        for cone in self.cones:
            zs = ", ".join(term(t) for t in cone.zs)
            out.append(f"rsoc: |({zs})|^2 <= {term(cone.u)} * {term(cone.w)}")
        return "\n".join(out)

    # ---------------------------------------------------------------- compile
    def _compile(self, objective_override=None):
        n = self.num_vars
        lift = objective_override is None and any(q > 0 for q in self.qcost)
        ncols = n + 1 if lift else n

        c = np.zeros(ncols)
        if objective_override is None:
            c[:n] = self.cost
            if lift:
                c[n] = 1.0
        else:
            c[:n] = objective_override

        A_rows, b_vals = [], []
        G_rows, h_vals = [], []

        def row_of(idx, coef):
            r = np.zeros(ncols)
            r[idx] = coef
            return r

        for row in self.eqs:
            A_rows.append(row_of(row.idx, row.coef))
            b_vals.append(row.rhs)
        for i in range(n):
            if self.lb[i] == self.ub[i] and np.isfinite(self.lb[i]):
                A_rows.append(row_of([i], [1.0]))
                b_vals.append(self.lb[i])
        for row in self.ineqs:
            G_rows.append(row_of(row.idx, row.coef))
            h_vals.append(row.rhs)
        for i in range(n):
            if self.lb[i] == self.ub[i]:
                continue
            if np.isfinite(self.ub[i]):
                G_rows.append(row_of([i], [1.0]))
                h_vals.append(self.ub[i])
            if np.isfinite(self.lb[i]):
                G_rows.append(row_of([i], [-1.0]))
                h_vals.append(-self.lb[i])
        l = len(G_rows)

        q_sizes = []
        cones = list(self.cones)
        if lift:
            roots = [(np.array([i]), np.array([np.sqrt(qi)]), 0.0)
                     for i, qi in enumerate(self.qcost) if qi > 0]
            cones.append(_Cone((np.array([n]), np.array([1.0]), 0.0),
                               (np.empty(0, dtype=int), np.empty(0), 1.0),
                               roots))
        for cone in cones:
            iu, cu, du = cone.u
            iw, cw, dw = cone.w
            # (u+w)/2 >= |((u-w)/2, z...)| is the SOC form of |z|^2 <= u*w
            top = np.zeros(ncols)
            top[iu] += 0.5 * cu
            top[iw] += 0.5 * cw
            mid = np.zeros(ncols)
            mid[iu] += 0.5 * cu
            mid[iw] -= 0.5 * cw
            G_rows.append(-top)
            h_vals.append(0.5 * (du + dw))
            G_rows.append(-mid)
            h_vals.append(0.5 * (du - dw))
            # rows enter as s = h - Gx, so cone entries are negated
            for iz, cz, dz in cone.zs:
                r = np.zeros(ncols)
                r[iz] = cz
                G_rows.append(-r)
                h_vals.append(dz)
            q_sizes.append(2 + len(cone.zs))

        A = np.array(A_rows).reshape(-1, ncols) if A_rows else np.zeros((0, ncols))
        G = np.array(G_rows).reshape(-1, ncols) if G_rows else np.zeros((0, ncols))
        return (c, G, np.array(h_vals, dtype=float), _ipm.make_dims(l, q_sizes),
                A, np.array(b_vals, dtype=float), n)


@dataclass
class ConicSolution:
    status: str
    x: np.ndarray | None = None
    objective: float | None = None
    dual_objective: float | None = None
    primal_residual: float = np.inf
    dual_residual: float = np.inf
    duality_gap: float = np.inf
    iterations: int = 0
    certificate: dict | None = None

    @property
    def optimal(self) -> bool:
        return self.status == OPTIMAL

    def value(self, i: int) -> float:
        return float(self.x[i])


def solve(prog: ConicProgram, *, feastol: float = 1e-8, gaptol: float = 1e-8,
          maxiter: int = 200, objective_override=None) -> ConicSolution:
    """Solve the program; on `optimal` the returned point satisfies all
    constraints to `feastol` and closes the relative duality gap to `gaptol`."""
    c, G, h, dims, A, b, n = prog._compile(objective_override)
    res = _ipm.conelp(c, G, h, dims, A, b,
                      feastol=feastol, gaptol=gaptol, maxiter=maxiter)
    x = res["x"][:n] if res["x"] is not None else None
    offset = prog.cost_const if objective_override is None else 0.0
    if res["status"] == OPTIMAL and x is not None:
        if objective_override is None:
            obj = prog.objective_value(x)
        else:
            obj = float(np.asarray(objective_override) @ x)
    else:
        obj = res["pobj"] + offset if res["pobj"] is not None else None
    dobj = res["dobj"] + offset if res["dobj"] is not None else None
    return ConicSolution(
        status=res["status"], x=x, objective=obj, dual_objective=dobj,
        primal_residual=res["pres"], dual_residual=res["dres"],
        duality_gap=res["relgap"], iterations=res["iterations"],
        certificate=res["certificate"])


def solve_lp(prog: ConicProgram, **opts) -> ConicSolution:
    """Solve a program that must contain no cones or quadratic costs."""
    if prog.cones:
        raise ProgramError("solve_lp: program has cone constraints")
    if any(q > 0 for q in prog.qcost):
        raise ProgramError("solve_lp: program has quadratic costs")
    return solve(prog, **opts)
