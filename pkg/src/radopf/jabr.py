"""Cosine/sine lifting of AC OPF on radial networks.

The lifting replaces rectangular voltage products with per-bus variables
``c_ii = |V_i|^2`` and per-line pairs ``c_ij = |V_i||V_j|cos(t_i - t_j)``,
``s_ij = |V_i||V_j|sin(t_i - t_j)``; power balance becomes linear and all
nonconvexity collapses into the coupling ``c_ij^2 + s_ij^2 = c_ii c_jj``.
Relaxing the coupling to ``<=`` yields the SOCP solved here.  On trees an
exact (surface) solution can be mapped back to bus voltages and angles.

One directed variable pair is created per line; the mirrored orientation is
implied by ``c_ji = c_ij`` and ``s_ji = -s_ij`` at model-build time.
"""

from __future__ import annotations

import io
import csv
import math
from dataclasses import dataclass

import numpy as np

from . import conic
from .network import Network, admittance


@dataclass
class JabrModel:
    """Variable layout of the lifted program for one network."""
    net: Network
    program: conic.ConicProgram
    pg: list[int]          # per generator
    qg: list[int]
    cii: dict[int, int]    # bus id -> variable
    c: list[int]           # per line, oriented from->to
    s: list[int]
    include_cone: bool = True

    def line_vars(self, k: int) -> tuple[int, int, int, int]:
        ln = self.net.lines[k]
        return self.cii[ln.from_bus], self.cii[ln.to_bus], self.c[k], self.s[k]

    def coupling_residuals(self, x: np.ndarray) -> np.ndarray:
        """Relative slack of c^2 + s^2 = cii*cjj per line (>=0 inside cone)."""
        out = np.empty(len(self.net.lines))
        for k in range(len(self.net.lines)):
            vi, vj, vc, vs = self.line_vars(k)
            prod = x[vi] * x[vj]
            out[k] = (prod - x[vc] ** 2 - x[vs] ** 2) / max(prod, 1e-12)
        return out

    def point(self, x: np.ndarray) -> dict:
        return {
            "pg": x[self.pg].copy(),
            "qg": x[self.qg].copy(),
            "cii": {b: x[v] for b, v in self.cii.items()},
            "c": x[self.c].copy(),
            "s": x[self.s].copy(),
        }


def build_relaxation(net: Network, *, fixed_voltage: dict[int, float] | None = None,
                     angle_bound_deg: float | None = None,
                     include_cone: bool = True) -> JabrModel:
    """SOCP relaxation of the lifted OPF for a radial network.

    fixed_voltage pins squared voltage magnitudes {bus id: c_ii}.
    angle_bound_deg adds |t_i - t_j| <= bound as the linear pair
    s <= tan(bound) c, -s <= tan(bound) c (exact on the cone surface).
    """
    net.require_radial()
    G, B = admittance(net)
    idx = net.bus_index
    prog = conic.ConicProgram()

    pg, qg = [], []
    for k, gen in enumerate(net.generators):
        pg.append(prog.add_var(f"pg{k}", gen.pmin, gen.pmax,
                               cost=gen.cost.c1, qcost=gen.cost.c2))
        qg.append(prog.add_var(f"qg{k}", gen.qmin, gen.qmax))
        prog.cost_const += gen.cost.c0

    cii = {}
    for bus in net.buses:
        lo, hi = bus.vmin ** 2, bus.vmax ** 2
        if fixed_voltage and bus.id in fixed_voltage:
            lo = hi = float(fixed_voltage[bus.id])
        cii[bus.id] = prog.add_var(f"c[{bus.id}]", lo, hi)

    c, s = [], []
    for k, ln in enumerate(net.lines):
        rmax = net.bus(ln.from_bus).vmax * net.bus(ln.to_bus).vmax
        c.append(prog.add_var(f"c[{ln.from_bus},{ln.to_bus}]", -rmax, rmax))
        s.append(prog.add_var(f"s[{ln.from_bus},{ln.to_bus}]", -rmax, rmax))

    # flow balance; the j==i admittance term sits on c_ii
    for bi, bus in enumerate(net.buses):
        p_idx, p_coef = [cii[bus.id]], [-G[bi, bi]]
        q_idx, q_coef = [cii[bus.id]], [B[bi, bi]]
        for k, ln in enumerate(net.lines):
            if bus.id == ln.from_bus:
                sign = 1.0
            elif bus.id == ln.to_bus:
                sign = -1.0
            else:
                continue
            p_idx += [c[k], s[k]]
            p_coef += [-ln.g, sign * ln.b]
            q_idx += [c[k], s[k]]
            q_coef += [ln.b, sign * ln.g]
        for gk in net.generators_at(bus.id):
            p_idx.append(pg[gk])
            p_coef.append(1.0)
            q_idx.append(qg[gk])
            q_coef.append(1.0)
        prog.add_eq(p_idx, p_coef, bus.pd)
        prog.add_eq(q_idx, q_coef, bus.qd)

    if include_cone:
        for k, ln in enumerate(net.lines):
            prog.add_rotated_cone(cii[ln.from_bus], cii[ln.to_bus], [c[k], s[k]])

    if angle_bound_deg is not None:
        t = math.tan(math.radians(angle_bound_deg))
        for k in range(len(net.lines)):
            prog.add_ineq([s[k], c[k]], [1.0, -t], 0.0)
            prog.add_ineq([s[k], c[k]], [-1.0, -t], 0.0)

    return JabrModel(net=net, program=prog, pg=pg, qg=qg, cii=cii, c=c, s=s,
                     include_cone=include_cone)


# ------------------------------------------------------------------ exactness

@dataclass
class Exactness:
    exact: bool
    max_residual: float
    residuals: np.ndarray

    def __str__(self):
        tag = "exact" if self.exact else "inexact"
        return f"{tag}(max residual {self.max_residual:.3e})"


def check_exactness(model: JabrModel, sol: conic.ConicSolution,
                    tol: float = 1e-6) -> Exactness:
    """Exact iff every line sits on the cone surface to relative `tol`."""
    if not sol.optimal:
        raise ValueError(f"exactness undefined for status {sol.status}")
    res = model.coupling_residuals(sol.x)
    worst = float(np.max(res, initial=0.0))
    return Exactness(exact=worst <= tol, max_residual=worst, residuals=res)


# -------------------------------------------------------------- opf solutions

@dataclass
class OpfSolution:
    """Feasible rectangular operating point with its lifted image."""
    bus_ids: list[int]
    vm: np.ndarray
    theta: np.ndarray
    pg: np.ndarray
    qg: np.ndarray
    objective: float
    max_coupling_residual: float = 0.0

    @property
    def e(self) -> np.ndarray:
        return self.vm * np.cos(self.theta)

    @property
    def f(self) -> np.ndarray:
        return self.vm * np.sin(self.theta)

    def angle(self, bus_ids: list[int] | None = None) -> dict[int, float]:
        return dict(zip(self.bus_ids, self.theta))


def _slack_bus(net: Network) -> int:
    gen_buses = sorted({g.bus for g in net.generators})
    return gen_buses[0] if gen_buses else net.buses[0].id


def recover_angles(net: Network, model: JabrModel, sol: conic.ConicSolution,
                   tol: float = 1e-6) -> OpfSolution:
    """Map an exact (surface) relaxation solution back to voltages/angles.

    Angles are assigned by walking the tree from the slack bus (lowest
    generator bus id, angle 0).  Inexact solutions are refused: off the cone
    surface the lifted point has no consistent voltage phasor.
    """
    ex = check_exactness(model, sol, tol)
    if not ex.exact:
        raise ValueError(f"cannot recover angles from inexact solution ({ex})")
    x = sol.x
    ids = [b.id for b in net.buses]
    pos = {b: k for k, b in enumerate(ids)}
    vm = np.array([math.sqrt(max(x[model.cii[b]], 0.0)) for b in ids])

    theta = np.full(len(ids), np.nan)
    theta[pos[_slack_bus(net)]] = 0.0
    incident: dict[int, list[int]] = {b: [] for b in ids}
    for k, ln in enumerate(net.lines):
        incident[ln.from_bus].append(k)
        incident[ln.to_bus].append(k)
    stack = [_slack_bus(net)]
    seen = {_slack_bus(net)}
    while stack:
        i = stack.pop()
        for k in incident[i]:
            ln = net.lines[k]
            j = ln.to_bus if ln.from_bus == i else ln.from_bus
            if j in seen:
                continue
            # flow-balance rows imply s = v_f v_t sin(t_to - t_from)
            delta = math.atan2(x[model.s[k]], x[model.c[k]])
            theta[pos[j]] = theta[pos[i]] + delta if ln.from_bus == i else theta[pos[i]] - delta
            seen.add(j)
            stack.append(j)

    pg = x[model.pg].copy()
    qg = x[model.qg].copy()
    obj = sum(g.cost.value(p) for g, p in zip(net.generators, pg))
    return OpfSolution(bus_ids=ids, vm=vm, theta=theta, pg=pg, qg=qg,
                       objective=obj, max_coupling_residual=ex.max_residual)


@dataclass
class OpfResiduals:
    """Constraint-family violations of a rectangular candidate point."""
    flow_p: np.ndarray
    flow_q: np.ndarray
    voltage: np.ndarray
    gen_bounds: np.ndarray
    objective: float

    @property
    def max_violation(self) -> float:
        parts = [np.max(np.abs(self.flow_p), initial=0.0),
                 np.max(np.abs(self.flow_q), initial=0.0),
                 np.max(self.voltage, initial=0.0),
                 np.max(self.gen_bounds, initial=0.0)]
        return float(max(parts))

    def feasible(self, tol: float = 1e-6) -> bool:
        return self.max_violation <= tol


def evaluate_opf_point(net: Network, e: np.ndarray, f: np.ndarray,
                       pg: np.ndarray, qg: np.ndarray) -> OpfResiduals:
    """Independent feasibility oracle on the rectangular formulation.

    Computes bus injections from the complex nodal equations and reports the
    violation of every constraint family; used to vet every claimed feasible
    point in the repo, independently of any solver.
    """
    G, B = admittance(net)
    V = np.asarray(e, dtype=float) + 1j * np.asarray(f, dtype=float)
    S = V * np.conj((G + 1j * B) @ V)
    pg = np.asarray(pg, dtype=float)
    qg = np.asarray(qg, dtype=float)

    flow_p = np.empty(net.num_buses)
    flow_q = np.empty(net.num_buses)
    volt = np.empty(net.num_buses)
    for k, bus in enumerate(net.buses):
        gidx = net.generators_at(bus.id)
        flow_p[k] = pg[gidx].sum() - bus.pd - S[k].real
        flow_q[k] = qg[gidx].sum() - bus.qd - S[k].imag
        v2 = abs(V[k]) ** 2
        volt[k] = max(bus.vmin ** 2 - v2, v2 - bus.vmax ** 2, 0.0)

    gb = np.zeros(max(len(net.generators), 1))
    for k, g in enumerate(net.generators):
        gb[k] = max(g.pmin - pg[k], pg[k] - g.pmax,
                    g.qmin - qg[k], qg[k] - g.qmax, 0.0)
    obj = sum(g.cost.value(p) for g, p in zip(net.generators, pg))
    return OpfResiduals(flow_p=flow_p, flow_q=flow_q, voltage=volt,
                        gen_bounds=gb[:len(net.generators)], objective=obj)


# ----------------------------------------------------------- full solve suite

@dataclass
class RelaxationResult:
    model: JabrModel
    solution: conic.ConicSolution
    exactness: Exactness | None = None
    opf: OpfSolution | None = None
    refined: conic.ConicSolution | None = None

    @property
    def status(self) -> str:
        return self.solution.status

    @property
    def objective(self) -> float | None:
        return self.solution.objective

    @property
    def verdict(self) -> str:
        if not self.solution.optimal:
            return self.solution.status
        return "exact" if (self.opf is not None) else "inexact"


def add_cost_cap(model: JabrModel, cap: float):
    """Constrain generation cost <= cap inside the model's program
    (quadratic terms go through a rotated-cone epigraph)."""
    prog = model.program
    net = model.net
    lin_idx = list(model.pg)
    lin_coef = [g.cost.c1 for g in net.generators]
    rhs = cap - sum(g.cost.c0 for g in net.generators)
    quads = [(v, g.cost.c2) for v, g in zip(model.pg, net.generators) if g.cost.c2 > 0]
    if quads:
        t = prog.add_var("cost_epi", 0.0)
        prog.add_rotated_cone(
            t, (np.empty(0, dtype=int), np.empty(0), 1.0),
            [(np.array([v]), np.array([math.sqrt(q)]), 0.0) for v, q in quads])
        lin_idx.append(t)
        lin_coef.append(1.0)
    prog.add_ineq(lin_idx, lin_coef, rhs)


def solve_relaxation(net: Network, *, refine: bool = True, tol: float = 1e-6,
                     feastol: float = 1e-8, gaptol: float = 1e-8,
                     **build_kwargs) -> RelaxationResult:
    """Solve the SOCP relaxation, then try to certify it exact.

    The relaxation optimum can sit on a face whose interior points are off
    the cone surface even when an exact optimum exists.  When the first solve
    is inexact we re-solve lexicographically - cost capped at the optimum,
    total squared voltage minimized - which slides along the optimal face
    toward the surface; exactness is then re-checked on that point.  The
    verdict is `exact` only when a recovered point actually exists.
    """
    model = build_relaxation(net, **build_kwargs)
    sol = conic.solve(model.program, feastol=feastol, gaptol=gaptol)
    res = RelaxationResult(model=model, solution=sol)
    if not sol.optimal:
        return res
    res.exactness = check_exactness(model, sol, tol)
    use = sol
    if not res.exactness.exact and refine:
        model2 = build_relaxation(net, **build_kwargs)
        cap = sol.objective + 1e-7 * (1.0 + abs(sol.objective))
        add_cost_cap(model2, cap)
        override = np.zeros(model2.program.num_vars)
        for v in model2.cii.values():
            override[v] = 1.0
        sol2 = conic.solve(model2.program, feastol=feastol, gaptol=gaptol,
                           objective_override=override)
        if sol2.optimal:
            ex2 = check_exactness(model2, sol2, tol)
            if ex2.exact:
                res.refined = sol2
                res.exactness = ex2
                model, use = model2, sol2
    if res.exactness.exact:
        try:
            res.opf = recover_angles(net, model, use, tol)
        except ValueError:
            res.opf = None
    return res


def lines_csv(model: JabrModel, sol: conic.ConicSolution) -> str:
    """Per-line (c_ii, c_jj, c_ij, s_ij, residual) table for plotting."""
    x = sol.x
    res = model.coupling_residuals(x)
    buf = io.StringIO()
    w = csv.writer(buf)
    w.writerow(["from", "to", "cii", "cjj", "c", "s", "residual"])
    for k, ln in enumerate(model.net.lines):
        vi, vj, vc, vs = model.line_vars(k)
        w.writerow([ln.from_bus, ln.to_bus, f"{x[vi]:.12g}", f"{x[vj]:.12g}",
                    f"{x[vc]:.12g}", f"{x[vs]:.12g}", f"{res[k]:.6e}"])
    return buf.getvalue()
