"""Analytic moments of the Bayesian MMSE error estimator and the true error.

Two pipelines are provided.  The conditional one fixes the class means and
averages over samples; the unconditional one additionally averages over the
prior on the means.  Each pipeline computes

* a coefficient family: mean, variance and covariance terms of the
  discriminant statistics that determine the estimator and the true error,
* a :class:`MomentMatrix`: first, second and cross moments obtained by
  plugging the coefficients into univariate and bivariate normal CDFs,
  followed by mixture metrics (bias, deviation variance, RMS).

:func:`asymptotic_limits` gives the limiting values as n, p and nu grow
together; feeding it :func:`errmoments.model.profile_from_reduced` yields the
cruder "simple" finite-sample approximations.

Inputs may carry numpy arrays in their fields; everything is elementwise.
"""

from dataclasses import dataclass, field, replace

import numpy as np

from .gauss import NumericError, bivariate_normal_cdf, std_normal_cdf
from .model import (
    AsymptoticProfile,
    ModelError,
    ReducedConditional,
    ReducedUnconditional,
    alpha0_from_threshold,
    swap_classes,
)

__all__ = [
    "RHO_CLAMP",
    "ConditionalCoefficients",
    "UnconditionalCoefficients",
    "MomentMatrix",
    "conditional_coefficients",
    "unconditional_coefficients",
    "conditional_moment_matrix",
    "unconditional_moment_matrix",
    "asymptotic_limits",
    "metrics_from_matrix",
    "relabel",
]

RHO_CLAMP = 0.999999
_DEV_VAR_TOL = 1e-10


# --- coefficient families -------------------------------------------------

@dataclass(frozen=True)
class ConditionalCoefficients:
    """Location/scale terms of the discriminants, class means held fixed.

    ``mean_est_i``/``var_est_i`` belong to the statistic whose tail gives
    the estimator for class i, ``mean_true_i``/``var_true_i`` to the one
    giving the true error.  ``var_plain`` is the unrefined variance
    delta2 + p/n0 + p/n1 used by the simple approximations.  ``cov_*``
    are the pair covariances: est-est, est-true (``cross``) and true-true.
    """

    mean_est0: float
    mean_est1: float
    var_plain: float
    mean_true0: float
    mean_true1: float
    var_est0: float
    var_est1: float
    var_true0: float
    var_true1: float
    cov_est0: float
    cov_est1: float
    cov_est01: float
    cov_cross0: float
    cov_cross1: float
    cov_cross01: float
    cov_cross10: float
    cov_true0: float
    cov_true1: float
    cov_true01: float


@dataclass(frozen=True)
class UnconditionalCoefficients:
    """Prior-averaged counterparts; the estimator and true error share location/scale."""

    mean0: float
    mean1: float
    var0: float
    var1: float
    cov_est0: float
    cov_est1: float
    cov_est01: float
    cov_cross0: float
    cov_cross1: float
    cov_cross01: float
    cov_cross10: float
    cov_true0: float
    cov_true1: float
    cov_true01: float


def _cond_class0(r: ReducedConditional):
    """Class-0 terms; class 1 comes from evaluating this on the swapped input."""
    p, n0, n1, b, d2 = r.p, r.n0, r.n1, r.beta0, r.delta2
    e_own, e_other = r.eta_m0_mu0, r.eta_m0_mu1
    b1 = 1.0 + b

    mean_est = (b * (e_other - e_own) + d2 + (1.0 - b) * p / n0 + b1 * p / n1) / (2.0 * b1)

    # prior-misfit term shared by the variance and covariance of the estimator
    misfit = b / b1**2 * ((e_other - (1.0 - b) * e_own - d2) / n0 + (b1 * e_other - e_own) / n1)
    shared = (
        misfit
        + (1.0 - b) ** 2 * p / (2.0 * n0**2 * b1**2)
        + p / (n0 * n1 * b1**2)
        + p / (2.0 * n1**2)
        + d2 / (n0 * b1**2)
    )
    var_est = (
        shared
        + d2
        + d2 / (n0 * b1)
        + d2 / (n1 * b1)
        + p / n0
        + p / n1
        + p / (n0**2 * b1)
        + p / (n0 * n1 * b1)
    )
    cov_est = shared + d2 / (n1 * b1)

    mean_true = 0.5 * (d2 + p / n1 - p / n0)
    pq = p * (1.0 / (2.0 * n0**2) + 1.0 / (2.0 * n1**2))
    var_true = d2 + d2 / n1 + p * (1.0 / n0 + 1.0 / n1) + pq
    cov_true = d2 / n1 + pq

    a = r.eta_m0mu0_mu0mu1
    cov_cross = (d2 + b * d2 + b * a) / (n1 * b1) - (1.0 - b) * p / (2.0 * n0**2 * b1) + p / (2.0 * n1**2)
    cov_cross01 = (d2 + b * a) / (n0 * b1) + (1.0 - b) * p / (2.0 * n0**2 * b1) - p / (2.0 * n1**2)
    return mean_est, var_est, cov_est, mean_true, var_true, cov_true, cov_cross, cov_cross01


def conditional_coefficients(rc: ReducedConditional) -> ConditionalCoefficients:
    """All coefficients for the conditional pipeline."""
    g0, d0, c0, gt0, dt0, ct0, x0, x01 = _cond_class0(rc)
    g1, d1, c1, gt1, dt1, ct1, x1, x10 = _cond_class0(swap_classes(rc))

    p, n0, n1, b0, b1, d2 = rc.p, rc.n0, rc.n1, rc.beta0, rc.beta1, rc.delta2
    cov_est01 = (
        (b0 * rc.eta_m0mu0_mu0mu1 - b0 * b1 * rc.eta_m0mu0_m1mu0 + b1 * rc.eta_m1mu1_mu1mu0 + b1 * d2 + d2)
        / (n0 * (1.0 + b0) * (1.0 + b1))
        + (b1 * rc.eta_m1mu1_mu1mu0 - b0 * b1 * rc.eta_m1mu1_m0mu1 + b0 * rc.eta_m0mu0_mu0mu1 + b0 * d2 + d2)
        / (n1 * (1.0 + b0) * (1.0 + b1))
        + p / (n0 * n1 * (1.0 + b0) * (1.0 + b1))
        + (1.0 - b0) * p / (2.0 * n0**2 * (1.0 + b0))
        + (1.0 - b1) * p / (2.0 * n1**2 * (1.0 + b1))
    )
    return ConditionalCoefficients(
        mean_est0=g0,
        mean_est1=-g1,
        var_plain=d2 + p / n0 + p / n1,
        mean_true0=gt0,
        mean_true1=-gt1,
        var_est0=d0,
        var_est1=d1,
        var_true0=dt0,
        var_true1=dt1,
        cov_est0=c0,
        cov_est1=c1,
        cov_est01=cov_est01,
        cov_cross0=x0,
        cov_cross1=x1,
        cov_cross01=x01,
        cov_cross10=x10,
        cov_true0=ct0,
        cov_true1=ct1,
        cov_true01=-p / (2.0 * n0**2) - p / (2.0 * n1**2),
    )


def _pair_true(r: ReducedUnconditional):
    p, v0, v1, D2 = r.p, r.nu0, r.nu1, r.Delta2
    return (1.0 / v0 + 1.0 / v1) * D2 + p / (2.0 * v0**2) + p / (2.0 * v1**2) + p / (v0 * v1) \
        - p / (2.0 * r.n0**2) - p / (2.0 * r.n1**2)


def _uncond_class0(r: ReducedUnconditional, cross_prior_term=False):
    p, n0, n1, v0, v1, D2 = r.p, r.n0, r.n1, r.nu0, r.nu1, r.Delta2
    b1 = 1.0 + v0 / n0  # 1 + beta0
    s0 = n0 + v0

    mean = 0.5 * (D2 + p / n1 - p / n0 + p / v0 + p / v1)
    var = (
        (1.0 + 1.0 / v0 + 1.0 / v1 + 1.0 / n1) * D2
        + p * (1.0 / n0 + 1.0 / n1 + 1.0 / v0 + 1.0 / v1)
        + p * (1.0 / (2.0 * n0**2) + 1.0 / (2.0 * n1**2) + 1.0 / (2.0 * v0**2) + 1.0 / (2.0 * v1**2))
        + p * (1.0 / (n1 * v0) + 1.0 / (n1 * v1) + 1.0 / (v0 * v1))
    )
    cov_est = (
        (1.0 / (n0 * b1**2) + 1.0 / n1 + 1.0 / (v0 * b1**2) + 1.0 / v1) * D2
        + p / (2.0 * n0**2) + p / (2.0 * v0**2) - p / (n0 * v0)
        + p / (n1 * v1) + p / (2.0 * n1**2) + p / (2.0 * v1**2)
        + p / (n0 * n1 * b1**2) + p / (n0 * v1 * b1**2) + p / (n1 * v0 * b1**2)
    )
    if cross_prior_term:
        cov_est = cov_est + p / (v0 * v1 * b1**2)
    cov_cross = (
        (n0 / (v0 * s0) + 1.0 / n1 + 1.0 / v1) * D2
        + p / (2.0 * n1**2) + p / (2.0 * v1**2) + p / (n1 * v1)
        + n0 * p / (n1 * v0 * s0)
        - (n0 - v0) * p / (2.0 * n0**2 * s0)
        + (n0 - v0) * p / (2.0 * v0**2 * s0)
        + n0 * p / (v0 * v1 * s0)
    )
    cov_true = (
        (1.0 / v0 + 1.0 / v1 + 1.0 / n1) * D2
        + p / (2.0 * v0**2) + p / (2.0 * v1**2) + p / (v0 * v1)
        + p / (2.0 * n0**2) + p / (2.0 * n1**2)
        + p / (n1 * v0) + p / (n1 * v1)
    )
    return mean, var, cov_est, cov_cross, _pair_true(r), cov_true


def unconditional_coefficients(ru: ReducedUnconditional, cross_prior_term: bool = False) -> UnconditionalCoefficients:
    """All coefficients for the unconditional pipeline.

    The established closed form for the estimator self-covariance
    (``cov_est0``/``cov_est1``) leaves out a p / (nu0 nu1 (1 + beta_i)^2)
    contribution that the exact covariance contains.  The default keeps
    the established form, which standard sample-size tables are based on;
    ``cross_prior_term=True`` adds the missing term.
    """
    h0, f0, k0, x0, x01, t0 = _uncond_class0(ru, cross_prior_term)
    h1, f1, k1, x1, x10, t1 = _uncond_class0(swap_classes(ru), cross_prior_term)

    p, n0, n1, v0, v1, D2 = ru.p, ru.n0, ru.n1, ru.nu0, ru.nu1, ru.Delta2
    s0, s1 = n0 + v0, n1 + v1
    cov_est01 = (
        p / (s0 * s1)
        + (n0 - v0) * p / (2.0 * n0**2 * s0)
        + (n1 - v1) * p / (2.0 * n1**2 * s1)
        + n0 * n1 * p / (v0 * v1 * s0 * s1)
        + (n0 - v0) * p / (2.0 * v0**2 * s0)
        + (n1 - v1) * p / (2.0 * v1**2 * s1)
        + (1.0 + n0 / s1 - v0 / n0) * p / (v0 * s0)
        + (1.0 + n1 / s0 - v1 / n1) * p / (v1 * s1)
        + (1.0 / v0 + 1.0 / v1) * D2
    )
    return UnconditionalCoefficients(
        mean0=h0,
        mean1=-h1,
        var0=f0,
        var1=f1,
        cov_est0=k0,
        cov_est1=k1,
        cov_est01=cov_est01,
        cov_cross0=x0,
        cov_cross1=x1,
        cov_cross01=x01,
        cov_cross10=x10,
        cov_true0=t0,
        cov_true1=t1,
        cov_true01=x01,
    )


# --- moment matrix ---------------------------------------------------------

_FIRST = ("est0", "est1", "true0", "true1")
_SECOND = ("est0_sq", "est1_sq", "est01", "true0_sq", "true1_sq", "true01")
_CROSS = ("est0_true0", "est0_true1", "est1_true0", "est1_true1")
_MIXTURE = ("mean_est", "mean_true", "second_est", "second_true", "cross", "bias", "dev_var", "rms")


@dataclass(frozen=True)
class MomentMatrix:
    """Per-class and mixture moments of (estimator, true error).

    Naming: ``est`` is the Bayesian MMSE estimate, ``true`` the true error,
    the digit the class.  ``est0_true1`` is E[est_0 * true_1], ``est01`` is
    E[est_0 * est_1] and so on.  Mixture fields are NaN until
    :func:`metrics_from_matrix` fills them.  ``clamps`` maps a second/cross
    moment name to the number of elements whose correlation was clamped.
    """

    est0: float
    est1: float
    true0: float
    true1: float
    est0_sq: float
    est1_sq: float
    est01: float
    true0_sq: float
    true1_sq: float
    true01: float
    est0_true0: float
    est0_true1: float
    est1_true0: float
    est1_true1: float
    alpha0: float = 0.5
    mean_est: float = float("nan")
    mean_true: float = float("nan")
    second_est: float = float("nan")
    second_true: float = float("nan")
    cross: float = float("nan")
    bias: float = float("nan")
    dev_var: float = float("nan")
    rms: float = float("nan")
    clamps: dict = field(default_factory=dict)

    FIRST = _FIRST
    SECOND = _SECOND
    CROSS = _CROSS
    MIXTURE = _MIXTURE

    @classmethod
    def entry_names(cls):
        return _FIRST + _SECOND + _CROSS + _MIXTURE

    def as_dict(self) -> dict:
        """Moment entries as plain floats (scalar matrices only)."""
        return {k: float(getattr(self, k)) for k in self.entry_names()}

    @property
    def n_clamped(self) -> int:
        return int(sum(self.clamps.values()))


def relabel(mm: MomentMatrix) -> MomentMatrix:
    """Exchange the class labels of every entry of a matrix."""
    swapped = {
        "est0": mm.est1, "est1": mm.est0, "true0": mm.true1, "true1": mm.true0,
        "est0_sq": mm.est1_sq, "est1_sq": mm.est0_sq, "est01": mm.est01,
        "true0_sq": mm.true1_sq, "true1_sq": mm.true0_sq, "true01": mm.true01,
        "est0_true0": mm.est1_true1, "est1_true1": mm.est0_true0,
        "est0_true1": mm.est1_true0, "est1_true0": mm.est0_true1,
        "alpha0": 1.0 - np.asarray(mm.alpha0),
    }
    return replace(mm, **swapped)


def _as_float(v):
    v = np.asarray(v, dtype=float)
    return float(v) if v.ndim == 0 else v


def _rho(name, cov, var_a, var_b, clamps):
    r = np.asarray(cov / np.sqrt(var_a * var_b), dtype=float)
    if np.any(np.isnan(r)):
        raise NumericError(f"correlation for {name} is NaN")
    out = np.clip(r, -RHO_CLAMP, RHO_CLAMP)
    hits = int(np.count_nonzero(out != r))
    if hits:
        clamps[name] = clamps.get(name, 0) + hits
    return out


def _assemble(args, covs, variances, alpha0):
    """Build a matrix from standardized arguments and covariance pairs.

    ``args``/``variances`` map 'est0', 'est1', 'true0', 'true1' to the CDF
    argument and statistic variance; ``covs`` maps each second/cross entry
    name to (cov, left, right).
    """
    clamps = {}
    vals = {k: std_normal_cdf(args[k]) for k in _FIRST}
    for name, (cov, left, right) in covs.items():
        rho = _rho(name, cov, variances[left], variances[right], clamps)
        vals[name] = bivariate_normal_cdf(args[left], args[right], rho)
    mm = MomentMatrix(**vals, alpha0=alpha0, clamps=clamps)
    return metrics_from_matrix(mm, alpha0)


def conditional_moment_matrix(rc: ReducedConditional) -> MomentMatrix:
    """Moment-matched (Raudys-type) moments given the class means."""
    k = conditional_coefficients(rc)
    c = rc.c
    args = {
        "est0": (-k.mean_est0 + c) / np.sqrt(k.var_est0),
        "est1": (k.mean_est1 - c) / np.sqrt(k.var_est1),
        "true0": (-k.mean_true0 + c) / np.sqrt(k.var_true0),
        "true1": (k.mean_true1 - c) / np.sqrt(k.var_true1),
    }
    variances = {"est0": k.var_est0, "est1": k.var_est1, "true0": k.var_true0, "true1": k.var_true1}
    covs = {
        "est0_sq": (k.cov_est0, "est0", "est0"),
        "est1_sq": (k.cov_est1, "est1", "est1"),
        "est01": (k.cov_est01, "est0", "est1"),
        "true0_sq": (k.cov_true0, "true0", "true0"),
        "true1_sq": (k.cov_true1, "true1", "true1"),
        "true01": (k.cov_true01, "true0", "true1"),
        "est0_true0": (k.cov_cross0, "est0", "true0"),
        "est0_true1": (k.cov_cross01, "est0", "true1"),
        "est1_true0": (k.cov_cross10, "est1", "true0"),
        "est1_true1": (k.cov_cross1, "est1", "true1"),
    }
    return _assemble(args, covs, variances, rc.alpha0)


def unconditional_moment_matrix(ru: ReducedUnconditional, cross_prior_term: bool = False) -> MomentMatrix:
    """Moment-matched moments averaged over the prior on the class means.

    See :func:`unconditional_coefficients` for ``cross_prior_term``.
    """
    k = unconditional_coefficients(ru, cross_prior_term)
    c = ru.c
    a0 = (-k.mean0 + c) / np.sqrt(k.var0)
    a1 = (k.mean1 - c) / np.sqrt(k.var1)
    # estimator and true error share location and scale
    args = {"est0": a0, "est1": a1, "true0": a0, "true1": a1}
    variances = {"est0": k.var0, "est1": k.var1, "true0": k.var0, "true1": k.var1}
    covs = {
        "est0_sq": (k.cov_est0, "est0", "est0"),
        "est1_sq": (k.cov_est1, "est1", "est1"),
        "est01": (k.cov_est01, "est0", "est1"),
        "true0_sq": (k.cov_true0, "true0", "true0"),
        "true1_sq": (k.cov_true1, "true1", "true1"),
        "true01": (k.cov_true01, "true0", "true1"),
        "est0_true0": (k.cov_cross0, "est0", "true0"),
        "est0_true1": (k.cov_cross01, "est0", "true1"),
        "est1_true0": (k.cov_cross10, "est1", "true0"),
        "est1_true1": (k.cov_cross1, "est1", "true1"),
    }
    # identical first moments make the mixture bias exactly zero
    return _assemble(args, covs, variances, ru.alpha0)


def _product_matrix(e0, e1, t0, t1, alpha0):
    vals = dict(
        est0=e0, est1=e1, true0=t0, true1=t1,
        est0_sq=e0 * e0, est1_sq=e1 * e1, est01=e0 * e1,
        true0_sq=t0 * t0, true1_sq=t1 * t1, true01=t0 * t1,
        est0_true0=e0 * t0, est0_true1=e0 * t1, est1_true0=e1 * t0, est1_true1=e1 * t1,
    )
    return metrics_from_matrix(MomentMatrix(**vals, alpha0=alpha0), alpha0)


def asymptotic_limits(ap: AsymptoticProfile, mode: str = "conditional") -> MomentMatrix:
    """Limits of all moments as n, p and nu grow at fixed ratios.

    In the limit the statistics concentrate, so every second or cross moment
    is the product of first moments; RMS collapses to |bias| (conditional)
    or to 0 (unconditional).
    """
    J0, J1, g0, g1, c = ap.J0, ap.J1, ap.gamma0, ap.gamma1, ap.c
    alpha0 = alpha0_from_threshold(c)
    if mode == "conditional":
        d2 = ap.delta2_bar
        loc0 = (g0 * (ap.eta_m0_mu1 - ap.eta_m0_mu0) + d2 + (1.0 - g0) * J0 + (1.0 + g0) * J1) / (2.0 * (1.0 + g0))
        loc1 = -(g1 * (ap.eta_m1_mu0 - ap.eta_m1_mu1) + d2 + (1.0 - g1) * J1 + (1.0 + g1) * J0) / (2.0 * (1.0 + g1))
        sd = np.sqrt(d2 + J0 + J1)
        t_loc0 = 0.5 * (d2 + J1 - J0)
        t_loc1 = -0.5 * (d2 + J0 - J1)
        e0 = std_normal_cdf((-loc0 + c) / sd)
        e1 = std_normal_cdf((loc1 - c) / sd)
        t0 = std_normal_cdf((-t_loc0 + c) / sd)
        t1 = std_normal_cdf((t_loc1 - c) / sd)
        return _product_matrix(e0, e1, t0, t1, alpha0)
    if mode == "unconditional":
        if np.any(np.asarray(g0) == 0) or np.any(np.asarray(g1) == 0):
            raise ModelError("unconditional limits need gamma0, gamma1 > 0")
        D2 = ap.Delta2_bar
        extra = J0 / g0 + J1 / g1
        loc0 = 0.5 * (D2 + J1 - J0 + extra)
        loc1 = -0.5 * (D2 + J0 - J1 + extra)
        sd = np.sqrt(D2 + J0 + J1 + extra)
        e0 = std_normal_cdf((-loc0 + c) / sd)
        e1 = std_normal_cdf((loc1 - c) / sd)
        mm = _product_matrix(e0, e1, e0, e1, alpha0)
        zero = _as_float(np.zeros_like(np.asarray(mm.rms)))
        return replace(mm, dev_var=zero, rms=zero)
    raise ValueError(f"mode must be 'conditional' or 'unconditional', got {mode!r}")


def metrics_from_matrix(mm: MomentMatrix, alpha0) -> MomentMatrix:
    """Fill the mixture moments, bias, deviation variance and RMS.

    RMS^2 = E[est^2] + E[true^2] - 2 E[est * true]; the deviation variance is
    what remains after removing the squared bias.
    """
    a0 = np.asarray(alpha0, dtype=float)
    a1 = 1.0 - a0
    mean_est = a0 * mm.est0 + a1 * mm.est1
    mean_true = a0 * mm.true0 + a1 * mm.true1
    # sums grouped so that relabeling the classes permutes operands of + only
    second_est = (a0 * a0 * mm.est0_sq + a1 * a1 * mm.est1_sq) + 2.0 * a0 * a1 * mm.est01
    second_true = (a0 * a0 * mm.true0_sq + a1 * a1 * mm.true1_sq) + 2.0 * a0 * a1 * mm.true01
    cross = (
        (a0 * a0 * mm.est0_true0 + a1 * a1 * mm.est1_true1) + a0 * a1 * (mm.est0_true1 + mm.est1_true0)
    )
    bias = mean_est - mean_true
    dev_var = (second_est - mean_est**2) + (second_true - mean_true**2) - 2.0 * (cross - mean_est * mean_true)
    dv = np.asarray(dev_var, dtype=float)
    if np.any(dv < -_DEV_VAR_TOL):
        raise NumericError(f"deviation variance is negative: min {dv.min():.3e}")
    dev_var = np.where(dv < 0.0, 0.0, dv)
    rms = np.sqrt(bias**2 + dev_var)
    out = _as_float
    return replace(
        mm,
        alpha0=out(a0),
        mean_est=out(mean_est),
        mean_true=out(mean_true),
        second_est=out(second_est),
        second_true=out(second_true),
        cross=out(cross),
        bias=out(bias),
        dev_var=out(dev_var),
        rms=out(rms),
    )
