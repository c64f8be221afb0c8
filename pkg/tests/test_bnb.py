"""Spatial branch-and-bound: envelopes, branching, polish, global solves."""

import math

import numpy as np
import pytest

from radopf import bnb, cases, conic, jabr, network, tighten


@pytest.fixture(scope="module")
def net2():
    return cases.load_case("case2_two_gen")


@pytest.fixture(scope="module")
def net3():
    return cases.load_case("case3_one_gen")


# ------------------------------------------------------------ node relaxation

def test_secant_overestimates_square():
    """Secant of x^2 over [l,u] at the midpoint equals (l+u)^2/2 - lu, which
    dominates the true midpoint square."""
    l, u = 0.3, 1.1
    mid = 0.5 * (l + u)
    secant = (l + u) * mid - l * u
    assert secant == pytest.approx((l + u) ** 2 / 2 - l * u)
    assert secant >= mid ** 2


def test_point_box_relaxation_is_exact(net2):
    """Collapsing the box onto a feasible surface point leaves exactly that
    point, and the relaxation reproduces its objective."""
    scaled = network.scale_load(net2, 0.95)
    res = jabr.solve_relaxation(scaled)
    opf = res.opf
    box = bnb.NodeBox.root(scaled)
    pos = scaled.bus_index
    for k, b in enumerate(scaled.buses):
        v = opf.vm[pos[b.id]] ** 2
        box.cii_lo[k] = v - 1e-9
        box.cii_hi[k] = v + 1e-9
    vi, vj = opf.vm[0], opf.vm[1]
    d = opf.theta[1] - opf.theta[0]
    box.c_lo[0] = vi * vj * math.cos(d) - 1e-9
    box.c_hi[0] = vi * vj * math.cos(d) + 1e-9
    box.s_lo[0] = vi * vj * math.sin(d) - 1e-9
    box.s_hi[0] = vi * vj * math.sin(d) + 1e-9
    model = bnb.node_relaxation(scaled, box)
    sol = conic.solve(model.program)
    assert sol.optimal
    assert sol.objective == pytest.approx(opf.objective, rel=1e-5)


def test_root_relaxation_sandwiched(net2):
    """Root node bound lies between the plain relaxation value and the
    global value."""
    scaled = network.scale_load(net2, 1.00)
    socp = jabr.solve_relaxation(scaled).objective
    box = bnb.NodeBox.root(scaled)
    model = bnb.node_relaxation(scaled, box)
    sol = conic.solve(model.program)
    assert socp - 1e-4 <= sol.objective <= 563.56 * 1.01


def test_node_relaxation_lp_variant_bounded(net2):
    """Dropping the cone leaves a finite-valued box LP under the global
    optimum (any valid relaxation bounds it)."""
    scaled = network.scale_load(net2, 1.00)
    box = bnb.NodeBox.root(scaled, tighten.compute_bounds(scaled))
    model = bnb.node_relaxation(scaled, box, include_cone=False)
    sol = conic.solve_lp(model.program)
    assert sol.optimal
    assert sol.objective <= 563.56 * 1.005


# ---------------------------------------------------------------- propagation

def test_propagation_sound_and_contracting(net3):
    scaled = network.scale_load(net3, 0.95, scale_p=False)
    res = jabr.solve_relaxation(scaled)
    opf = res.opf
    prop = bnb._Propagator(scaled)
    box = bnb.NodeBox.root(scaled)
    out = prop.run(box)
    assert out is not None
    pos = scaled.bus_index
    for k, ln in enumerate(scaled.lines):
        i, j = pos[ln.from_bus], pos[ln.to_bus]
        c = opf.vm[i] * opf.vm[j] * math.cos(opf.theta[j] - opf.theta[i])
        s = opf.vm[i] * opf.vm[j] * math.sin(opf.theta[j] - opf.theta[i])
        assert out.c_lo[k] - 1e-7 <= c <= out.c_hi[k] + 1e-7
        assert out.s_lo[k] - 1e-7 <= s <= out.s_hi[k] + 1e-7
        assert out.c_hi[k] - out.c_lo[k] <= box.c_hi[k] - box.c_lo[k] + 1e-12


def test_propagation_handles_lossless_lines():
    base = cases.load_case("case9", drop_charging=True)
    tree = network.spanning_tree(base, 0)
    prop = bnb._Propagator(tree)
    out = prop.run(bnb.NodeBox.root(tree))
    assert out is not None
    assert np.all(out.c_lo <= out.c_hi) and np.all(out.s_lo <= out.s_hi)


# ------------------------------------------------------------------- branching

def test_branch_partitions_parent(net2):
    box = bnb.NodeBox.root(net2)
    point = bnb._mid_point(net2, box)
    kids, info = bnb.branch(net2, box, point, np.ones(1))
    assert len(kids) == 2
    kind, idx, split = info
    lo, hi = box.interval(kind, idx)
    assert lo < split < hi
    assert kids[0].interval(kind, idx) == (lo, split)
    assert kids[1].interval(kind, idx) == (split, hi)


def test_branch_clamps_to_middle_band(net2):
    box = bnb.NodeBox.root(net2)
    point = bnb._mid_point(net2, box)
    point["cii"] = {1: box.cii_lo[0], 2: box.cii_hi[1]}  # values at the edges
    kids, info = bnb.branch(net2, box, point, np.ones(1))
    kind, idx, split = info
    lo, hi = box.interval(kind, idx)
    w = hi - lo
    assert lo + 0.2 * w - 1e-12 <= split <= hi - 0.2 * w + 1e-12


def test_branch_none_when_residual_free(net2):
    box = bnb.NodeBox.root(net2)
    kids, info = bnb.branch(net2, box, bnb._mid_point(net2, box), np.zeros(1))
    assert kids == [] and info is None


def test_branch_falls_to_cs_when_cii_pinned(net2):
    """With squared voltages pinned, branching must pick c or s."""
    box = bnb.NodeBox.root(net2, fixed_voltage={1: 0.874, 2: 0.816})
    point = bnb._mid_point(net2, box)
    kids, info = bnb.branch(net2, box, point, np.ones(1))
    assert info is not None and info[0] in ("c", "s")


# ----------------------------------------------------------------- local polish

def test_polish_returns_verified_point(net2):
    scaled = network.scale_load(net2, 1.00)
    res = jabr.solve_relaxation(scaled, refine=False)
    cand = bnb.local_polish(scaled, res.model.point(res.solution.x))
    assert cand is not None
    check = jabr.evaluate_opf_point(scaled, cand.e, cand.f, cand.pg, cand.qg)
    assert check.max_violation < 1e-6
    assert cand.objective >= 563.56 * 0.995  # not below the global optimum


def test_polish_keeps_exact_point(net3):
    """Feeding an already-exact relaxation point returns (essentially) it."""
    scaled = network.scale_load(net3, 0.95, scale_p=False)
    res = jabr.solve_relaxation(scaled)
    cand = bnb.local_polish(scaled, res.model.point(res.solution.x),
                            cost_pass=False)
    assert cand is not None
    assert cand.objective == pytest.approx(res.objective, rel=1e-4)


def test_polish_fails_on_infeasible_instance(net3):
    scaled = network.scale_load(net3, 1.10, scale_p=False)
    res = jabr.solve_relaxation(scaled, refine=False)
    assert res.solution.optimal  # relaxation still feasible
    cand = bnb.local_polish(scaled, res.model.point(res.solution.x))
    assert cand is None


# ------------------------------------------------------------------ obbt

def test_range_reduction_shrinks_and_keeps_optimum(net2):
    scaled = network.scale_load(net2, 1.00)
    vb, cuts = tighten.run_algorithm1(scaled)
    box = bnb.NodeBox.root(scaled, vb)
    model = bnb.node_relaxation(scaled, box, cuts)
    sol = conic.solve(model.program)
    point = model.point(sol.x)
    slacks = bnb._coupling_slacks(scaled, point)
    red = bnb.range_reduction(scaled, box, cuts, 564.9, point, slacks, max_vars=4)
    assert red is not None
    assert red.max_width() <= box.max_width()
    # the verified optimum (cost 564.84, s = v1*v2*sin(-0.003452)) stays inside
    assert red.s_lo[0] <= -0.002894 <= red.s_hi[0]


def test_range_reduction_infeasible_cutoff_prunes(net2):
    scaled = network.scale_load(net2, 1.00)
    box = bnb.NodeBox.root(scaled)
    model = bnb.node_relaxation(scaled, box)
    sol = conic.solve(model.program)
    point = model.point(sol.x)
    slacks = bnb._coupling_slacks(scaled, point)
    red = bnb.range_reduction(scaled, box, (), 100.0, point, slacks)
    assert red is None  # cutoff below the relaxation value empties the node


# ------------------------------------------------------------------ end to end

def test_global_two_bus_inexact_case(net2):
    """Gap below 1e-3 within a few hundred nodes on the hardest sweep point."""
    scaled = network.scale_load(net2, 1.00)
    res = bnb.solve_global(scaled, gap_tol=9e-4, time_limit=120)
    assert res.optimal
    assert res.objective == pytest.approx(563.56, rel=5e-3)
    assert res.lower_bound <= res.objective + 1e-9
    assert res.nodes <= 500


def test_global_exact_short_circuit(net2):
    """Exact root relaxations return after a single node with zero gap."""
    scaled = network.scale_load(net2, 0.90)
    res = bnb.solve_global(scaled, gap_tol=1e-4)
    assert res.optimal and res.nodes == 1
    assert res.gap <= 1e-4


def test_global_fixed_voltage_experiment(net2):
    res = bnb.solve_global(net2, gap_tol=2e-3,
                           fixed_voltage={1: 0.874, 2: 0.816})
    assert res.optimal
    assert res.objective == pytest.approx(573.82, rel=5e-3)
    th = res.incumbent.theta
    assert abs(math.degrees(th[1] - th[0])) < 1.0


def test_global_three_bus_values(net3):
    for gamma, want in ((1.00, 950.70), (1.03, 959.91)):
        scaled = network.scale_load(net3, gamma, scale_p=False)
        res = bnb.solve_global(scaled, gap_tol=2e-3, time_limit=120)
        assert res.optimal
        assert res.objective == pytest.approx(want, rel=5e-3)


def test_global_certifies_infeasible(net3):
    scaled = network.scale_load(net3, 1.04, scale_p=False)
    res = bnb.solve_global(scaled, gap_tol=2e-3, time_limit=120)
    assert res.status == bnb.INFEASIBLE
    # while the plain relaxation is still feasible
    assert jabr.solve_relaxation(scaled).solution.optimal


def test_global_root_lb_matches_relaxation(net2):
    """Root lower bound equals the relaxation value."""
    scaled = network.scale_load(net2, 1.00)
    res = bnb.solve_global(scaled, gap_tol=2e-3, time_limit=120)
    assert res.root_lb == pytest.approx(501.46, rel=1e-3)
    assert res.root_gap_pct == pytest.approx(100 * (1 - res.root_lb / res.objective),
                                             abs=1e-6)


def test_lower_bound_monotone_truncated(net2):
    """Every processed node's bound sits at or above the root bound (child
    boxes only shrink), and the final certified bound is consistent."""
    scaled = network.scale_load(net2, 1.01)
    res = bnb.solve_global(scaled, gap_tol=2e-3, time_limit=120)
    scale = max(1.0, abs(res.root_lb))
    assert all(row[1] >= res.root_lb - 1e-6 * scale for row in res.trace)
    assert res.lower_bound <= res.objective + 1e-9 * scale


def test_incumbents_all_verified(net2):
    scaled = network.scale_load(net2, 1.00)
    res = bnb.solve_global(scaled, gap_tol=2e-3, time_limit=120)
    inc = res.incumbent
    check = jabr.evaluate_opf_point(scaled, inc.e, inc.f, inc.pg, inc.qg)
    assert check.max_violation < 1e-6


def test_workers_same_answer(net3):
    scaled = network.scale_load(net3, 1.00, scale_p=False)
    a = bnb.solve_global(scaled, gap_tol=2e-3, workers=1)
    b = bnb.solve_global(scaled, gap_tol=2e-3, workers=4)
    assert a.optimal and b.optimal
    assert a.objective == pytest.approx(b.objective, rel=2e-3)


def test_time_limit_status(net2):
    scaled = network.scale_load(net2, 1.00)
    res = bnb.solve_global(scaled, gap_tol=1e-9, time_limit=0.5)
    assert res.status in (bnb.TIME_LIMIT, bnb.GLOBAL_OPTIMAL)


def test_cuts_never_change_the_global_value(net2):
    """Boxes and cuts only remove relaxation points, so the certified global
    value is the same with and without them (within the two certificates)."""
    scaled = network.scale_load(net2, 1.00)
    tol = 1e-5
    with_cuts = bnb.solve_global(scaled, gap_tol=tol, time_limit=120)
    without = bnb.solve_global(scaled, gap_tol=tol, time_limit=120,
                               use_cuts=False, use_bounds=False)
    assert with_cuts.optimal and without.optimal
    assert with_cuts.objective == pytest.approx(without.objective, rel=3 * tol)


def test_matches_closed_form_on_random_two_bus():
    """Verdict/value agreement with the two-bus closed form on 200 random
    instances: infeasible stays infeasible, values agree at the gap tol."""
    import test_twobus
    from radopf import twobus
    rng = np.random.default_rng(77)
    seen = {"exact": 0, "inexact": 0, "infeasible": 0}
    for _ in range(200):
        inst = test_twobus.sample_instance(rng)
        cls = twobus.classify(inst)
        res = bnb.solve_global(inst.to_network(), gap_tol=2e-3, time_limit=30)
        if cls.verdict in (twobus.OPF_INFEASIBLE, twobus.BOTH_INFEASIBLE):
            assert res.status == bnb.INFEASIBLE, (inst, cls.verdict, res.status)
            seen["infeasible"] += 1
        else:
            assert res.optimal, (inst, cls.verdict, res.status)
            assert res.objective == pytest.approx(cls.opf_value, rel=2e-3,
                                                  abs=1e-6), inst
            seen[cls.verdict] += 1
    assert all(v > 0 for v in seen.values()), seen
