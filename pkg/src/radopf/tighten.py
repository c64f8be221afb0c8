"""SOCP-based variable bound tightening and secant valid inequalities.

The lifted pair (c_ij, s_ij) of every line is confined to the annulus between
radii R_lo = Vi_min*Vj_min and R_hi = Vi_max*Vj_max, but carries only the very
loose implied box |c|, |s| <= R_hi.  Minimizing/maximizing each coordinate
over the relaxation produces a much tighter box; where that box pokes inside
the inner circle, the chord of the circle across the intrusion is a valid
linear cut, because every cut-off point has norm below R_lo and is therefore
infeasible.  Boxes and cuts accumulate line by line, each tightening the
relaxation used for the next.
"""

from __future__ import annotations

import io
import csv
import math
import warnings
from dataclasses import dataclass

import numpy as np

from . import conic, jabr
from .network import Network


class RelaxationInfeasible(RuntimeError):
    """The SOCP relaxation is infeasible, so the OPF itself is infeasible."""

    def __init__(self, message, certificate=None):
        super().__init__(message)
        self.certificate = certificate


@dataclass
class Ring:
    """Annulus radii for one line's (c, s) pair."""
    r_lo: float
    r_hi: float

    def __post_init__(self):
        if not (0.0 < self.r_lo <= self.r_hi):
            raise ValueError("need 0 < r_lo <= r_hi")


def ring_for(net: Network, k: int) -> Ring:
    ln = net.lines[k]
    bi, bj = net.bus(ln.from_bus), net.bus(ln.to_bus)
    return Ring(r_lo=bi.vmin * bj.vmin, r_hi=bi.vmax * bj.vmax)


@dataclass
class VarBounds:
    """Per-line boxes [c_lo, c_hi] x [s_lo, s_hi]."""
    c_lo: np.ndarray
    c_hi: np.ndarray
    s_lo: np.ndarray
    s_hi: np.ndarray

    @classmethod
    def implied(cls, net: Network) -> "VarBounds":
        r = np.array([ring_for(net, k).r_hi for k in range(len(net.lines))])
        return cls(c_lo=-r.copy(), c_hi=r.copy(), s_lo=-r.copy(), s_hi=r.copy())

    def box(self, k: int) -> tuple[float, float, float, float]:
        return (float(self.c_lo[k]), float(self.c_hi[k]),
                float(self.s_lo[k]), float(self.s_hi[k]))

    def copy(self) -> "VarBounds":
        return VarBounds(self.c_lo.copy(), self.c_hi.copy(),
                         self.s_lo.copy(), self.s_hi.copy())


@dataclass
class Cut:
    """Valid inequality a_c*c + a_s*s >= rhs for one line's (c, s) pair."""
    line: int
    a_c: float
    a_s: float
    rhs: float
    case: int
    p1: tuple[float, float]
    p2: tuple[float, float]

    def satisfied(self, c, s, tol: float = 1e-9):
        return self.a_c * np.asarray(c) + self.a_s * np.asarray(s) >= self.rhs - tol

    def violation(self, c, s):
        return self.rhs - (self.a_c * np.asarray(c) + self.a_s * np.asarray(s))


def generate_cut(c_lo: float, c_hi: float, s_lo: float, s_hi: float,
                 r_lo: float, line: int = 0) -> Cut | None:
    """Secant cut for one line's box against the inner circle of radius r_lo.

    The chord endpoints (x1, y1), (x2, y2) depend on which of the two left
    corners of the box fall inside the circle; the cut
    (y1-y2) c - (x1-x2) s >= x2 y1 - x1 y2 keeps everything on the outer side
    of the chord.  Returns None when the box clears the circle (no cut needed)
    and skips with a warning when c_lo <= 0 (construction assumes the box
    sits right of the s-axis).
    """
    if c_lo <= 0.0:
        warnings.warn(f"line {line}: c lower bound {c_lo:.4g} <= 0, cut skipped",
                      stacklevel=2)
        return None
    if c_lo >= r_lo:
        return None
    norm_lo = math.hypot(c_lo, s_lo)
    norm_hi = math.hypot(c_lo, s_hi)
    if norm_lo < r_lo and norm_hi < r_lo:
        case = 1
        y1, y2 = s_hi, s_lo
        x1 = math.sqrt(r_lo ** 2 - s_hi ** 2)
        x2 = math.sqrt(r_lo ** 2 - s_lo ** 2)
    elif norm_lo < r_lo:
        case = 2
        x1, y2 = c_lo, s_lo
        y1 = math.sqrt(r_lo ** 2 - c_lo ** 2)
        x2 = math.sqrt(r_lo ** 2 - s_lo ** 2)
    elif norm_hi < r_lo:
        case = 3
        y1, x2 = s_hi, c_lo
        x1 = math.sqrt(r_lo ** 2 - s_hi ** 2)
        y2 = -math.sqrt(r_lo ** 2 - c_lo ** 2)
    else:
        # both corners already outside: the chord degenerates to c >= c_lo
        return None
    return Cut(line=line, a_c=y1 - y2, a_s=-(x1 - x2), rhs=x2 * y1 - x1 * y2,
               case=case, p1=(x1, y1), p2=(x2, y2))


@dataclass
class TightenResult:
    bounds: VarBounds
    cuts: list[Cut]
    solves: int = 0


def apply_to_model(model: jabr.JabrModel, bounds: VarBounds | None = None,
                   cuts=()):
    """Install boxes and cuts into a freshly built lifted model."""
    prog = model.program
    if bounds is not None:
        for k in range(len(model.net.lines)):
            prog.set_bounds(model.c[k], bounds.c_lo[k], bounds.c_hi[k])
            prog.set_bounds(model.s[k], bounds.s_lo[k], bounds.s_hi[k])
    for cut in cuts:
        prog.add_ineq([model.c[cut.line], model.s[cut.line]],
                      [-cut.a_c, -cut.a_s], -cut.rhs)


# bound solves are exact only to solver tolerance; pad outward before use
_PAD = 1e-7


def _tighten_loop(net: Network, with_cuts: bool, feastol: float,
                  gaptol: float, **build_kwargs) -> TightenResult:
    bounds = VarBounds.implied(net)
    cuts: list[Cut] = []
    solves = 0
    for k in range(len(net.lines)):
        vals = {}
        for what, sense in (("c", +1), ("c", -1), ("s", +1), ("s", -1)):
            model = jabr.build_relaxation(net, **build_kwargs)
            apply_to_model(model, bounds, cuts)
            var = model.c[k] if what == "c" else model.s[k]
            override = np.zeros(model.program.num_vars)
            override[var] = sense  # +1 minimizes, -1 maximizes
            sol = conic.solve(model.program, feastol=feastol, gaptol=gaptol,
                              objective_override=override)
            solves += 1
            if sol.status == conic.INFEASIBLE:
                raise RelaxationInfeasible(
                    f"relaxation infeasible while bounding line {k}",
                    certificate=sol.certificate)
            if not sol.optimal:
                vals[(what, sense)] = None
                continue
            vals[(what, sense)] = sense * sol.objective
        if vals[("c", 1)] is not None:
            bounds.c_lo[k] = max(bounds.c_lo[k], vals[("c", 1)] - _PAD)
        if vals[("c", -1)] is not None:
            bounds.c_hi[k] = min(bounds.c_hi[k], vals[("c", -1)] + _PAD)
        if vals[("s", 1)] is not None:
            bounds.s_lo[k] = max(bounds.s_lo[k], vals[("s", 1)] - _PAD)
        if vals[("s", -1)] is not None:
            bounds.s_hi[k] = min(bounds.s_hi[k], vals[("s", -1)] + _PAD)
        if with_cuts:
            cut = generate_cut(*bounds.box(k), ring_for(net, k).r_lo, line=k)
            if cut is not None:
                cuts.append(cut)
    return TightenResult(bounds=bounds, cuts=cuts, solves=solves)


def compute_bounds(net: Network, *, feastol: float = 1e-8, gaptol: float = 1e-8,
                   **build_kwargs) -> VarBounds:
    """Tightened per-line boxes from four relaxation solves per line, boxes
    accumulating in input-file line order."""
    net.require_radial()
    return _tighten_loop(net, False, feastol, gaptol, **build_kwargs).bounds


def run_algorithm1(net: Network, *, feastol: float = 1e-8, gaptol: float = 1e-8,
                   **build_kwargs) -> tuple[VarBounds, list[Cut]]:
    """Full sequential pass: per line, tighten the box, then add the secant
    cut (when the box pokes inside the inner circle) before moving on."""
    net.require_radial()
    out = _tighten_loop(net, True, feastol, gaptol, **build_kwargs)
    return out.bounds, out.cuts


def cuts_csv(cuts: list[Cut]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf)
    w.writerow(["line", "a_c", "a_s", "rhs", "case", "x1", "y1", "x2", "y2"])
    for c in cuts:
        w.writerow([c.line, f"{c.a_c:.12g}", f"{c.a_s:.12g}", f"{c.rhs:.12g}",
                    c.case, f"{c.p1[0]:.12g}", f"{c.p1[1]:.12g}",
                    f"{c.p2[0]:.12g}", f"{c.p2[1]:.12g}"])
    return buf.getvalue()
