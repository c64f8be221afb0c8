"""Tour of the two-bus closed form.

Builds one instance per approximation outcome, prints the classification
next to a brute-force enumeration of the same instance, and dumps the
region/curve samples for the finite-gap case to CSV for plotting.
"""

import numpy as np

from radopf import twobus

BOX = dict(c11_min=0.81, c11_max=1.21, c22_min=0.81, c22_max=1.21)

# admittance of a 0.01008 + j0.0504 line
G, B = -3.8156, 19.0782


def show(title, inst):
    cls = twobus.classify(inst)
    orc = twobus.grid_oracle(inst, resolution=1e-4)
    print(f"--- {title}")
    print(f"    alpha={cls.alpha:+.4f} beta={cls.beta:+.4f} delta={cls.delta:+.4f}")
    print(f"    closed form : {cls.verdict} (case {cls.case_label})"
          + (f", gap ${cls.gap:.4f}" if cls.gap else ""))
    print(f"    enumeration : {orc.verdict}"
          + (f", gap ${orc.gap:.4f}" if orc.gap else ""))
    if cls.socp_value is not None:
        print(f"    relaxation value ${cls.socp_value:.4f}"
              + (f", OPF value ${cls.opf_value:.4f}" if cls.opf_value else ""))
    return cls


# 1. generation floors slack: the relaxation optimum sits on the curve
show("floors slack -> exact", twobus.TwoBusInstance(g=G, b=B, pd=1.05, qd=0.228, **BOX))

# 2. floor pushed far enough that the bound line misses the curve in the box
#    (but still crosses the box, so the relaxation stays feasible)
inst = twobus.TwoBusInstance(g=G, b=B, pd=1.05, qd=0.228, pmin=2.0, **BOX)
show("floor too high -> relaxation feasible, OPF infeasible", inst)

# 3. a finite-gap configuration: pin the curve through the box so its dip
#    under the c11 floor is real, then park the bound line inside the dip
rng = np.random.default_rng(3)
for _ in range(200):
    g = -rng.uniform(0.5, 6.0)
    b = rng.uniform(2.0, 20.0)
    c22I = rng.uniform(0.84, 1.1)
    root = np.sqrt(0.81 * c22I)
    beta = rng.uniform(c22I - root + 0.02 * root, c22I + root - 0.02 * root)
    alpha = np.sqrt(max(0.81 * c22I - (c22I - beta) ** 2, 0.0))
    pd, qd = alpha * b + beta * g, alpha * g - beta * b
    m2 = alpha ** 2 + beta ** 2
    hi = min(m2 / c22I, 1.21)
    if hi <= c22I:
        continue
    c22E = 0.5 * (c22I + hi)
    pmin = -g * (m2 / c22E - 2 * beta) - g * beta + b * alpha
    cand = twobus.TwoBusInstance(g=g, b=b, pd=pd, qd=qd, pmin=pmin, **BOX)
    if twobus.classify(cand).case_label == 5:
        cls = show("bound line inside the dip -> finite gap", cand)
        sample = twobus.sample_regions(cand, resolution=5e-3)
        np.savetxt("twobus_hyperbola.csv", sample.hyperbola, delimiter=",",
                   header="c11,c22", comments="")
        np.savetxt("twobus_region.csv", sample.grid, delimiter=",",
                   header="c11,c22,socp_feasible", comments="")
        print("    wrote twobus_hyperbola.csv / twobus_region.csv; labeled "
              f"points: {sorted(sample.points)}")
        break
