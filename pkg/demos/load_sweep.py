"""Reproduce the bundled tables: relaxation vs global optimum over a load
sweep on the built-in 2-bus and 3-bus systems.

The pattern to watch: exact (values agree) at light load, a finite gap as
generation floors start binding, then OPF infeasibility that the relaxation
cannot see.
"""

from radopf import bnb, cases, jabr, network


def sweep(name, gammas, scale_p=True):
    net = cases.load_case(name)
    print(f"=== {name}")
    print(f"{'gamma':>6} {'SOCP':>10} {'verdict':>9} {'global':>12} {'gap %':>7}")
    for g in gammas:
        scaled = network.scale_load(net, g, scale_p=scale_p)
        relax = jabr.solve_relaxation(scaled)
        if not relax.solution.optimal:
            print(f"{g:6.2f} {'infeasible':>10}")
            continue
        glob = bnb.solve_global(scaled, gap_tol=2e-3, time_limit=60)
        if glob.optimal:
            gap = 100 * (1 - relax.objective / glob.objective)
            print(f"{g:6.2f} {relax.objective:10.2f} {relax.verdict:>9} "
                  f"{glob.objective:12.2f} {gap:7.2f}")
        else:
            print(f"{g:6.2f} {relax.objective:10.2f} {relax.verdict:>9} "
                  f"{glob.status:>12}")


sweep("case2_two_gen", (0.13, 0.80, 0.90, 0.98, 1.00, 1.01, 1.02, 2.92))
sweep("case3_one_gen", (0.95, 0.97, 1.00, 1.03, 1.04), scale_p=False)
