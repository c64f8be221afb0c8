"""Independent brute-force oracles for the small systems.

Everything here works on the rectangular formulation only (voltages and
angles), never through the lifted variables or the conic machinery, so these
values are an independent check of the solvers.
"""

import itertools
import warnings

import numpy as np
import scipy.optimize as sopt

from radopf import jabr
from radopf.network import admittance

warnings.filterwarnings("ignore", category=RuntimeWarning)


def _injections(net, Y, vm, th):
    pd = np.array([b.pd for b in net.buses])
    qd = np.array([b.qd for b in net.buses])
    V = vm * np.exp(1j * th)
    S = V * np.conj(Y @ V)
    return S.real + pd, S.imag + qd


def two_gen_global(net, tol=1e-8):
    """Global optimum of a 2-bus network with a generator at each bus.

    Three degrees of freedom (vm1, vm2, angle difference), so the optimum is
    pinned by active constraint sets: enumerate all 3-subsets (isolated
    points, via root finding) and all 2-subsets (curves, scanned along vm1),
    keeping the best point that satisfies everything.  Returns (value, point)
    or (None, None) when no feasible point exists.
    """
    G, B = admittance(net)
    Y = G + 1j * B
    g1, g2 = net.generators
    b1, b2 = net.buses

    def pq(z):
        return _injections(net, Y, np.array([z[0], z[1]]), np.array([0.0, z[2]]))

    def cost(z):
        p, _ = pq(z)
        return (g1.cost.value(p[0]) + g2.cost.value(p[1]))

    cons = {
        "p1": lambda z: pq(z)[0][0] - g1.pmin,
        "p1h": lambda z: pq(z)[0][0] - g1.pmax,
        "p2": lambda z: pq(z)[0][1] - g2.pmin,
        "p2h": lambda z: pq(z)[0][1] - g2.pmax,
        "q1": lambda z: pq(z)[1][0] - g1.qmin,
        "q1h": lambda z: pq(z)[1][0] - g1.qmax,
        "q2": lambda z: pq(z)[1][1] - g2.qmin,
        "q2h": lambda z: pq(z)[1][1] - g2.qmax,
        "v1lo": lambda z: z[0] - b1.vmin, "v1hi": lambda z: z[0] - b1.vmax,
        "v2lo": lambda z: z[1] - b2.vmin, "v2hi": lambda z: z[1] - b2.vmax,
    }

    def feasible(z):
        p, q = pq(z)
        checks = [p[0] - g1.pmin, g1.pmax - p[0], p[1] - g2.pmin, g2.pmax - p[1],
                  q[0] - g1.qmin, g1.qmax - q[0], q[1] - g2.qmin, g2.qmax - q[1],
                  z[0] - b1.vmin, b1.vmax - z[0], z[1] - b2.vmin, b2.vmax - z[1]]
        return min(checks) > -tol

    best = (np.inf, None)
    starts3 = list(itertools.product((0.92, 1.0, 1.08), (0.92, 1.0, 1.08),
                                     (-0.05, 0.0, 0.05)))
    for names in itertools.combinations(cons, 3):
        fns = [cons[n] for n in names]
        for st in starts3:
            z, _, ier, _ = sopt.fsolve(lambda z: [f(z) for f in fns], st,
                                       full_output=True)
            if ier == 1 and feasible(z) and cost(z) < best[0]:
                best = (cost(z), z.copy())
    for names in itertools.combinations(cons, 2):
        if "v1lo" in names or "v1hi" in names:
            continue  # vm1 is the scan parameter below
        fns = [cons[n] for n in names]
        prev = None
        for vm1 in np.linspace(b1.vmin, b1.vmax, 801):
            st = prev if prev is not None else (1.0, 0.0)
            y, _, ier, _ = sopt.fsolve(
                lambda y: [f((vm1, y[0], y[1])) for f in fns], st,
                full_output=True)
            if ier != 1:
                prev = None
                continue
            prev = y
            z = np.array([vm1, y[0], y[1]])
            if feasible(z) and cost(z) < best[0]:
                best = (cost(z), z.copy())
    if best[1] is None:
        return None, None
    return best[0], best[1]


def chain_global(net, n_v1=241, refine=9):
    """Global optimum of a radial chain with one generator at the head bus.

    Load-bus balances pin (v_2..v_n, th_2..th_n) once v_1 is chosen; scan v_1
    with solution continuation (plus fresh multistarts to catch other power
    flow branches), filter by voltage/generation bounds, and refine around the
    best head voltage.  Returns (value, (vm, th)) or (None, None).
    """
    G, B = admittance(net)
    Y = G + 1j * B
    nb = net.num_buses
    gen_bus = net.generators[0].bus
    pos = net.bus_index
    islack = pos[gen_bus]
    others = [k for k in range(nb) if k != islack]
    g = net.generators[0]
    vmin = np.array([b.vmin for b in net.buses])
    vmax = np.array([b.vmax for b in net.buses])

    def assemble(v1, y):
        vm = np.empty(nb)
        th = np.zeros(nb)
        vm[islack] = v1
        vm[others] = y[:nb - 1]
        th[others] = y[nb - 1:]
        return vm, th

    def residual(y, v1):
        vm, th = assemble(v1, y)
        p, q = _injections(net, Y, vm, th)
        return np.concatenate([p[others], q[others]])

    def evaluate(v1, y):
        vm, th = assemble(v1, y)
        if np.any(vm < vmin - 1e-9) or np.any(vm > vmax + 1e-9):
            return None
        p, q = _injections(net, Y, vm, th)
        if not (g.pmin - 1e-9 <= p[islack] <= g.pmax + 1e-9
                and g.qmin - 1e-9 <= q[islack] <= g.qmax + 1e-9):
            return None
        return g.cost.value(p[islack]), (vm, th)

    def scan(grid, seeds):
        best = (np.inf, None, None)
        tracks = list(seeds)
        for v1 in grid:
            next_tracks = []
            for y0 in tracks:
                y, _, ier, _ = sopt.fsolve(residual, y0, args=(v1,),
                                           full_output=True)
                if ier != 1 or np.max(np.abs(residual(y, v1))) > 1e-9:
                    continue
                if not any(np.allclose(y, t, atol=1e-6) for t in next_tracks):
                    next_tracks.append(y)
                got = evaluate(v1, y)
                if got is not None and got[0] < best[0]:
                    best = (got[0], v1, y)
            tracks = next_tracks if next_tracks else list(seeds)
        return best

    seeds = []
    for v_level in (1.05, 1.0, 0.95, 0.91):
        seeds.append(np.concatenate([np.full(nb - 1, v_level),
                                     np.zeros(nb - 1)]))
    best = scan(np.linspace(vmin[islack], vmax[islack], n_v1), seeds)
    if best[1] is None:
        return None, None
    # refine around the winning head voltage
    width = (vmax[islack] - vmin[islack]) / (n_v1 - 1)
    lo = max(best[1] - 2 * width, vmin[islack])
    hi = min(best[1] + 2 * width, vmax[islack])
    for _ in range(refine):
        fine = scan(np.linspace(lo, hi, 41), [best[2]])
        if fine[1] is not None and fine[0] <= best[0]:
            best = fine
        width = (hi - lo) / 40
        lo = max(best[1] - 2 * width, vmin[islack])
        hi = min(best[1] + 2 * width, vmax[islack])
    value, v1, y = best
    G, B = admittance(net)
    vm = np.empty(nb)
    th = np.zeros(nb)
    vm[islack] = v1
    vm[others] = y[:nb - 1]
    th[others] = y[nb - 1:]
    return value, (vm, th)


def verify_point(net, vm, th):
    """Max rectangular-constraint violation with generation allocated."""
    G, B = admittance(net)
    Y = G + 1j * B
    p, q = _injections(net, Y, vm, th)
    pg = np.zeros(len(net.generators))
    qg = np.zeros(len(net.generators))
    for k, gen in enumerate(net.generators):
        i = net.bus_index[gen.bus]
        pg[k] = p[i]
        qg[k] = q[i]
    res = jabr.evaluate_opf_point(net, vm * np.cos(th), vm * np.sin(th), pg, qg)
    return res
