"""The estimator self-covariance term that couples the two priors.

The unconditional variance of the estimator's deviation statistic has a
term p / (nu0 * nu1 * (1 + beta)^2) that the default formulas leave out
(to stay comparable with standard sample-size tables).  This script shows
(1) that simulation supports the term, (2) that without it weak priors
produce a negative deviation variance, and (3) what it does to the plans.
"""

import numpy as np

from errmoments.gauss import NumericError
from errmoments.model import ReducedUnconditional
from errmoments.moments import unconditional_coefficients, unconditional_moment_matrix
from errmoments.planner import PlanQuery, min_n

p, n, nu, D2 = 4, 20.0, 10.0, 4.0
rng = np.random.default_rng(0)
T = 400_000
# Direct simulation of the estimator's two sample means under the prior,
# whitened so that Sigma = I; the statistic is the class-0 discriminant
# evaluated at its own prior-updated mean.
mu0 = rng.standard_normal((T, p)) / np.sqrt(nu)
mu1 = rng.standard_normal((T, p)) / np.sqrt(nu)
mu1[:, 0] += np.sqrt(D2)
x0 = mu0 + rng.standard_normal((T, p)) / np.sqrt(n)
x1 = mu1 + rng.standard_normal((T, p)) / np.sqrt(n)
m0, m1 = np.zeros(p), np.eye(p)[0] * np.sqrt(D2)
post0 = (n * x0 + nu * m0) / (n + nu)
post1 = (n * x1 + nu * m1) / (n + nu)
stat = np.einsum("ij,ij->i", post0 - (x0 + x1) / 2, x0 - x1)

ru = ReducedUnconditional(p=p, n0=n, n1=n, nu0=nu, nu1=nu, c=0.0, Delta2=D2)
default = unconditional_coefficients(ru)
exact = unconditional_coefficients(ru, cross_prior_term=True)
se = stat.var() * np.sqrt(2.0 / (T - 1))  # normal-theory SE, good enough here
print(f"simulated variance {stat.var():.4f} (se {se:.4f})")
print(f"  default formula  {default.cov_est0:.4f}")
print(f"  with the term    {exact.cov_est0:.4f}")

print("\nweak priors (nu = 2, n = 20):")
weak = ReducedUnconditional(p=p, n0=n, n1=n, nu0=2.0, nu1=2.0, c=0.0, Delta2=D2)
try:
    unconditional_moment_matrix(weak)
except NumericError as exc:
    print(f"  default formula: {exc}")
print(f"  with the term:   rms = {unconditional_moment_matrix(weak, cross_prior_term=True).rms:.4f}")

print("\nunconditional plans, safe rule:")
for tau, pp in ((0.025, 2), (0.005, 128)):
    a = min_n(PlanQuery("unconditional", pp, tau, rule="safe")).n_min
    b = min_n(PlanQuery("unconditional", pp, tau, rule="safe", cross_prior_term=True)).n_min
    print(f"  tau = {tau}, p = {pp}: {a} -> {b}")
