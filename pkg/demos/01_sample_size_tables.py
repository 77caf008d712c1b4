"""Minimum sample sizes for a target RMS, with equal-variance priors (beta = 1).

The conditional curve kappa(n) falls monotonically, so the first even n
below the target is the answer.  The unconditional curve is different: for
large p it starts *below* small targets, climbs to a peak, and only then
decays.  The literal "first crossing" rule therefore returns n = 4 for
those cells; the safe rule asks the target to hold for the next 200 sizes
and finds the crossing after the peak.
"""

import numpy as np

from errmoments.planner import DEFAULT_PS, DEFAULT_TAUS, PlanQuery, kappa, min_n, plan_table


def show(mode, rule, **kw):
    grid = plan_table(mode, rule=rule, **kw)
    taus = kw.get("taus", DEFAULT_TAUS[mode])
    n = np.array([r.n_min for r in grid]).reshape(len(DEFAULT_PS), len(taus)).T
    print(f"\n{mode}, {rule} rule" + (f", {kw}" if kw else ""))
    print("tau \\ p " + "".join(f"{p:>7d}" for p in DEFAULT_PS))
    for tau, row in zip(taus, n):
        print(f"{tau:>7g} " + "".join(f"{v:>7d}" for v in row))


show("conditional", "literal")
show("unconditional", "literal")
show("unconditional", "safe")

# Where does the unconditional curve peak for p = 128?
ns = np.arange(4, 400, 2)
k = kappa(ns, 128, mode="unconditional")
print(f"\nunconditional kappa, p = 128: {k[0]:.4f} at n = 4, peak {k.max():.4f} at n = {ns[k.argmax()]}")

# Starting the scan at n = 2 instead of 4 changes only the easiest cells.
for start in (2, 4):
    r = min_n(PlanQuery("unconditional", 128, 0.025, rule="safe", n_start=start))
    print(f"n_start = {start}: tau = 0.025, p = 128 -> n = {r.n_min}")

# A razor-edge cell: kappa(2056) sits 3e-6 above the 0.05 target.
print(f"\nconditional kappa(2056, p = 128) = {kappa(2056, 128):.6f}")
