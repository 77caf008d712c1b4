"""RMS surfaces and the peaking phenomenon.

In the unconditional case, with the prior weight tied to the sample size
(nu = beta * n / 2), the RMS is small at both ends: very small samples
lean on the prior, and large samples pin the error down.  In between it
peaks.  For p = 900, beta = 2, Delta^2 = 4 the peak sits near n = 140.
"""

import numpy as np

from errmoments.model import ReducedUnconditional, centered_conditional
from errmoments.moments import conditional_moment_matrix, unconditional_moment_matrix

ns = np.arange(4, 602, 2, dtype=float)
half = ns / 2
mm = unconditional_moment_matrix(ReducedUnconditional(
    p=900.0, n0=half, n1=half, nu0=2 * half, nu1=2 * half, c=0.0, Delta2=np.full(ns.shape, 4.0)))
i = int(np.argmax(mm.rms))
print(f"unconditional, p = 900: RMS peaks at n = {ns[i]:.0f} (RMS = {mm.rms[i]:.4f})")
for n in (4, 40, 140, 300, 600):
    j = int(np.searchsorted(ns, n))
    print(f"  n = {n:4d}: RMS = {mm.rms[j]:.4f}")

# Conditional surface on a coarse grid: RMS grows with p and shrinks with n.
ps = np.array([4, 25, 100, 200], dtype=float)
grid = np.array([40, 100, 200], dtype=float)
P, N = np.meshgrid(ps, grid, indexing="ij")
rms = conditional_moment_matrix(centered_conditional(P, N, 2.0, np.full(P.shape, 4.0))).rms
print("\nconditional RMS, beta = 2, delta^2 = 4")
print("p \\ n " + "".join(f"{n:>9.0f}" for n in grid))
for p, row in zip(ps, rms):
    print(f"{p:5.0f} " + "".join(f"{v:9.4f}" for v in row))
