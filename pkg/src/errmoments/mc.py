"""Monte Carlo oracle for the estimator/true-error moments.

Conditional mode fixes the class means and repeats: draw a stratified
sample, design LDA, record the true error and the Bayesian MMSE estimate.
Unconditional mode wraps that loop in an outer one that first draws the
class means from their priors.

Both errors depend on the sample only through the two sample means, so by
default the sampler draws those directly (x̄_i ~ N(mu_i, Sigma / n_i));
``full_samples=True`` draws every point instead.  All work happens in
coordinates whitened by the Cholesky factor of Sigma.

Reproducibility: replication blocks draw from streams keyed by
(seed, block index), and blocks are reduced in index order, so results do
not depend on the number of worker threads.
"""

import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_solve, cholesky, solve_triangular
from scipy.special import ndtr

from .model import FullModelSpec, ModelError

__all__ = [
    "DegenerateSampleError",
    "McConfig",
    "McEstimates",
    "anderson_w",
    "true_error",
    "bayes_estimate",
    "draw_sample_means",
    "sample_delta2",
    "run",
]

BLOCK = 2000  # conditional replications per RNG stream
_QUANTITIES = (
    "est0", "est1", "true0", "true1",
    "est0_sq", "est1_sq", "est01", "true0_sq", "true1_sq", "true01",
    "est0_true0", "est0_true1", "est1_true0", "est1_true1",
    "mean_est", "mean_true", "second_est", "second_true", "cross",
    "bias", "sq_dev",
)


class DegenerateSampleError(ArithmeticError):
    """The two sample means coincide, so LDA is undefined."""


def _factor(sigma_chol):
    """Accept a ``cho_factor`` tuple or a lower-triangular Cholesky factor."""
    if isinstance(sigma_chol, tuple):
        return sigma_chol
    return (np.asarray(sigma_chol, dtype=float), True)


def _check_dims(*vecs):
    dims = {np.shape(v) for v in vecs}
    if len(dims) != 1 or len(next(iter(dims))) != 1:
        raise ValueError(f"dimension mismatch: {sorted(dims)}")


def anderson_w(xbar0, xbar1, x, sigma_chol):
    """W = (x - (x̄0 + x̄1)/2)^T Sigma^{-1} (x̄0 - x̄1); LDA assigns class 1 iff W <= c."""
    xbar0, xbar1, x = (np.asarray(v, dtype=float) for v in (xbar0, xbar1, x))
    _check_dims(xbar0, xbar1, x)
    fac = _factor(sigma_chol)
    if fac[0].shape[0] != x.size:
        raise ValueError("Cholesky factor does not match the vector dimension")
    return float((x - 0.5 * (xbar0 + xbar1)) @ cho_solve(fac, xbar0 - xbar1))


def _projections(xbar0, xbar1, points, sigma_chol):
    fac = _factor(sigma_chol)
    d = xbar0 - xbar1
    sd = cho_solve(fac, d)
    s2 = float(d @ sd)
    if not s2 > 0.0:
        raise DegenerateSampleError("sample means coincide")
    mid = 0.5 * (xbar0 + xbar1)
    return [float((v - mid) @ sd) for v in points], math.sqrt(s2)


def true_error(xbar0, xbar1, mu0, mu1, sigma_chol, c=0.0, alpha0=0.5, per_class=False):
    """Misclassification probability of the LDA rule built from x̄0, x̄1.

    With ``per_class=True`` returns (eps0, eps1) instead of the mixture.
    """
    vecs = [np.asarray(v, dtype=float) for v in (xbar0, xbar1, mu0, mu1)]
    _check_dims(*vecs)
    (w0, w1), s = _projections(vecs[0], vecs[1], vecs[2:], sigma_chol)
    e0 = float(ndtr((c - w0) / s))
    e1 = float(ndtr((w1 - c) / s))
    return (e0, e1) if per_class else alpha0 * e0 + (1.0 - alpha0) * e1


def bayes_estimate(xbar0, xbar1, m0, m1, nu0, nu1, n0, n1, sigma_chol, c=0.0, alpha0=0.5, per_class=False):
    """Bayesian MMSE estimate of the LDA error under Gaussian priors on the means."""
    xbar0, xbar1, m0, m1 = (np.asarray(v, dtype=float) for v in (xbar0, xbar1, m0, m1))
    _check_dims(xbar0, xbar1, m0, m1)
    post0 = (n0 * xbar0 + nu0 * m0) / (n0 + nu0)
    post1 = (n1 * xbar1 + nu1 * m1) / (n1 + nu1)
    (w0, w1), s = _projections(xbar0, xbar1, [post0, post1], sigma_chol)
    k0 = math.sqrt((n0 + nu0) / (n0 + nu0 + 1.0))
    k1 = math.sqrt((n1 + nu1) / (n1 + nu1 + 1.0))
    e0 = float(ndtr((c - w0) / s * k0))
    e1 = float(ndtr((w1 - c) / s * k1))
    return (e0, e1) if per_class else alpha0 * e0 + (1.0 - alpha0) * e1


def draw_sample_means(rng, mu0, mu1, chol_lower, n0, n1, size, full_samples=False):
    """Draw ``size`` pairs of sample means; returns two (size, p) arrays."""
    mu0, mu1 = np.asarray(mu0, dtype=float), np.asarray(mu1, dtype=float)
    z0 = _std_means(rng, size, n0, mu0.shape[-1], full_samples)
    z1 = _std_means(rng, size, n1, mu1.shape[-1], full_samples)
    return mu0 + z0 @ chol_lower.T, mu1 + z1 @ chol_lower.T


def _std_means(rng, size, n, p, full_samples):
    if full_samples:
        return rng.standard_normal((size, n, p)).mean(axis=1)
    return rng.standard_normal((size, p)) / math.sqrt(n)


def sample_delta2(p, n0, n1, delta2, T, seed=0, full_samples=False):
    """Replicates of the plug-in distance (x̄0 - x̄1)^T (x̄0 - x̄1) with Sigma = I."""
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))
    mu0 = np.zeros(p)
    mu0[0] = math.sqrt(delta2)
    x0, x1 = draw_sample_means(rng, mu0, np.zeros(p), np.eye(p), n0, n1, T, full_samples)
    d = x0 - x1
    return np.einsum("ij,ij->i", d, d)


# --- simulation driver -----------------------------------------------------

@dataclass(frozen=True)
class McConfig:
    """Simulation settings; ``T2`` is forced to 1 in conditional mode."""

    spec: FullModelSpec
    mode: str = "conditional"
    T1: int = 10_000
    T2: int = 1
    seed: int = 0
    full_samples: bool = False

    def __post_init__(self):
        if self.mode not in ("conditional", "unconditional"):
            raise ModelError(f"mode must be 'conditional' or 'unconditional', got {self.mode!r}")
        if int(self.T1) != self.T1 or self.T1 < 2:
            raise ModelError(f"T1 must be an integer >= 2, got {self.T1}")
        if int(self.T2) != self.T2 or self.T2 < 1:
            raise ModelError(f"T2 must be a positive integer, got {self.T2}")
        if self.mode == "conditional":
            object.__setattr__(self, "T2", 1)
        if not 0 <= int(self.seed) < 2**64:
            raise ModelError("seed must be a 64-bit unsigned integer")

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "T1": int(self.T1),
            "T2": int(self.T2),
            "seed": int(self.seed),
            "full_samples": bool(self.full_samples),
            "spec": self.spec.to_dict(),
        }


@dataclass(frozen=True)
class McEstimates:
    """Means and standard errors keyed by :class:`MomentMatrix` entry name."""

    mean: dict
    stderr: dict
    config: dict
    n_pairs: int
    rejected: int
    elapsed: float = field(default=0.0, compare=False)

    def to_json(self, **kw) -> str:
        return json.dumps(
            {
                "mean": self.mean,
                "stderr": self.stderr,
                "n_pairs": self.n_pairs,
                "rejected": self.rejected,
                "elapsed_s": self.elapsed,
                "config": self.config,
            },
            **kw,
        )


class _Whitened:
    """The model expressed in coordinates where Sigma is the identity."""

    def __init__(self, spec: FullModelSpec):
        self.L = cholesky(spec.sigma, lower=True)
        w = lambda v: solve_triangular(self.L, v, lower=True)  # noqa: E731
        self.mu0, self.mu1 = w(spec.mu0), w(spec.mu1)
        self.m0, self.m1 = w(spec.m0), w(spec.m1)
        self.p = spec.p
        self.n0, self.n1 = spec.n0, spec.n1
        self.nu0, self.nu1 = spec.nu0, spec.nu1
        self.c, self.alpha0 = spec.c, spec.alpha0


def _stream(seed, tag, index):
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed), spawn_key=(tag, index))))


def _draw_pairs(rng, wm, mu0, mu1, size, full_samples):
    """Sample means (whitened), redrawing the probability-zero degenerate rows."""
    eye = np.eye(wm.p)
    x0, x1 = draw_sample_means(rng, mu0, mu1, eye, wm.n0, wm.n1, size, full_samples)
    rejected = 0
    while True:
        d = x0 - x1
        bad = np.einsum("ij,ij->i", d, d) == 0.0
        if not bad.any():
            return x0, x1, d, rejected
        k = int(bad.sum())
        rejected += k
        x0[bad], x1[bad] = draw_sample_means(rng, mu0, mu1, eye, wm.n0, wm.n1, k, full_samples)


def _errors(wm, x0, x1, d, mu0, mu1):
    """Per-draw (est0, est1, true0, true1) arrays."""
    s = np.sqrt(np.einsum("ij,ij->i", d, d))
    mid = 0.5 * (x0 + x1)
    proj = lambda v: np.einsum("ij,ij->i", v - mid, d)  # noqa: E731
    post0 = (wm.n0 * x0 + wm.nu0 * wm.m0) / (wm.n0 + wm.nu0)
    post1 = (wm.n1 * x1 + wm.nu1 * wm.m1) / (wm.n1 + wm.nu1)
    k0 = math.sqrt((wm.n0 + wm.nu0) / (wm.n0 + wm.nu0 + 1.0))
    k1 = math.sqrt((wm.n1 + wm.nu1) / (wm.n1 + wm.nu1 + 1.0))
    c = wm.c
    est0 = ndtr((c - proj(post0)) / s * k0)
    est1 = ndtr((proj(post1) - c) / s * k1)
    true0 = ndtr((c - proj(mu0)) / s)
    true1 = ndtr((proj(mu1) - c) / s)
    return est0, est1, true0, true1


def _quantities(wm, e0, e1, t0, t1):
    a0 = wm.alpha0
    a1 = 1.0 - a0
    est = a0 * e0 + a1 * e1
    tru = a0 * t0 + a1 * t1
    dev = est - tru
    return np.stack([
        e0, e1, t0, t1,
        e0 * e0, e1 * e1, e0 * e1, t0 * t0, t1 * t1, t0 * t1,
        e0 * t0, e0 * t1, e1 * t0, e1 * t1,
        est, tru, est * est, tru * tru, est * tru,
        dev, dev * dev,
    ])


def _block_stats(q):
    """Count, exact means and sums of squared deviations for each row of ``q``."""
    n = q.shape[1]
    means = np.array([math.fsum(row) / n for row in q])
    m2 = np.array([math.fsum(row) for row in (q - means[:, None]) ** 2])
    return n, means, m2


def _combine(blocks):
    """Merge per-block (n, mean, M2) in index order (pairwise update)."""
    n, mean, m2 = blocks[0]
    for nb, mb, m2b in blocks[1:]:
        tot = n + nb
        delta = mb - mean
        mean = mean + delta * (nb / tot)
        m2 = m2 + m2b + delta**2 * (n * nb / tot)
        n = tot
    return n, mean, m2


def _conditional_block(wm, cfg, index, size):
    rng = _stream(cfg.seed, 0, index)
    x0, x1, d, rej = _draw_pairs(rng, wm, wm.mu0, wm.mu1, size, cfg.full_samples)
    q = _quantities(wm, *_errors(wm, x0, x1, d, wm.mu0, wm.mu1))
    return _block_stats(q), rej


def _unconditional_block(wm, cfg, index):
    rng = _stream(cfg.seed, 1, index)
    mu0 = wm.m0 + rng.standard_normal(wm.p) / math.sqrt(wm.nu0)
    mu1 = wm.m1 + rng.standard_normal(wm.p) / math.sqrt(wm.nu1)
    x0, x1, d, rej = _draw_pairs(rng, wm, mu0, mu1, cfg.T1, cfg.full_samples)
    q = _quantities(wm, *_errors(wm, x0, x1, d, mu0, mu1))
    return _block_stats(q), rej


def run(config: McConfig, workers: int = 1) -> McEstimates:
    """Run the simulation and summarize every moment.

    Conditional standard errors treat the T1 draws as independent.  In
    unconditional mode each outer replication contributes the mean over
    its T1 inner draws, and standard errors come from the spread of those
    T2 outer means.
    """
    t_start = time.perf_counter()
    wm = _Whitened(config.spec)
    with ThreadPoolExecutor(max_workers=max(1, int(workers))) as pool:
        if config.mode == "conditional":
            sizes = [BLOCK] * (config.T1 // BLOCK)
            if config.T1 % BLOCK:
                sizes.append(config.T1 % BLOCK)
            out = list(pool.map(lambda a: _conditional_block(wm, config, *a), enumerate(sizes)))
            n, mean, m2 = _combine([o[0] for o in out])
            var_of_mean = m2 / (n - 1) / n
        else:
            out = list(pool.map(lambda j: _unconditional_block(wm, config, j), range(config.T2)))
            outer = np.array([o[0][1] for o in out])  # (T2, k) inner means
            mean = np.array([math.fsum(col) for col in outer.T]) / config.T2
            if config.T2 > 1:
                dev2 = np.array([math.fsum(col) for col in ((outer - mean) ** 2).T])
                var_of_mean = dev2 / (config.T2 - 1) / config.T2
            else:
                var_of_mean = np.full(mean.shape, np.nan)
            n = config.T1 * config.T2
    rejected = sum(o[1] for o in out)
    se = np.sqrt(var_of_mean)

    means = dict(zip(_QUANTITIES, (float(v) for v in mean)))
    errs = dict(zip(_QUANTITIES, (float(v) for v in se)))
    # deviation variance and RMS of the mixture estimate
    means["dev_var"] = max(means["sq_dev"] - means["bias"] ** 2, 0.0)
    errs["dev_var"] = errs["sq_dev"]
    means["rms"] = math.sqrt(means["sq_dev"])
    errs["rms"] = errs["sq_dev"] / (2.0 * means["rms"]) if means["rms"] > 0 else 0.0
    return McEstimates(
        mean=means,
        stderr=errs,
        config=config.to_dict(),
        n_pairs=int(n),
        rejected=int(rejected),
        elapsed=time.perf_counter() - t_start,
    )
