"""Model specifications and their reduction to Mahalanobis-type invariants.

Every analytic formula in :mod:`errmoments.moments` consumes a handful of
scalars rather than the vectors themselves: the sizes ``p, n0, n1``, the
prior weights, the decision threshold ``c`` and inner products of the form

    eta(a1, a2, a3, a4) = (a1 - a2)^T Sigma^{-1} (a3 - a4).

This module holds the full vector-level description (:class:`FullModelSpec`),
the two reduced descriptions, the limiting profile used by the asymptotic
formulas, and the class-relabeling involution.
"""

import json
import math
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path
from typing import Union

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve
from scipy.special import expit

__all__ = [
    "ModelError",
    "FullModelSpec",
    "ReducedConditional",
    "ReducedUnconditional",
    "AsymptoticProfile",
    "threshold",
    "alpha0_from_threshold",
    "reduce_conditional",
    "reduce_unconditional",
    "swap_classes",
    "profile_from_reduced",
    "equicorrelated_setup",
    "centered_conditional",
    "load_spec",
    "parse_spec",
]

_ETA_NEG_TOL = 1e-10


class ModelError(ValueError):
    """Invalid model specification."""


def threshold(alpha0: float) -> float:
    """LDA threshold c = log((1 - alpha0) / alpha0)."""
    if not 0.0 < alpha0 < 1.0:
        raise ModelError(f"alpha0 must lie in (0, 1), got {alpha0}")
    return math.log((1.0 - alpha0) / alpha0)


def alpha0_from_threshold(c):
    """Inverse of :func:`threshold`.

    The smaller prior is rounded so that 1 - alpha is exact; then
    alpha0(-c) == 1 - alpha0(c) bit for bit and relabeling the classes
    commutes with every downstream computation.
    """
    c = np.asarray(c, dtype=float)
    small = expit(-np.abs(c))
    small = 1.0 - (1.0 - small)
    out = np.where(c >= 0, small, 1.0 - small)
    return float(out) if out.ndim == 0 else out


def _check_positive(name, value, strict=True):
    v = np.asarray(value, dtype=float)
    if np.any(np.isnan(v)):
        raise ModelError(f"{name} is NaN")
    if strict and np.any(v <= 0):
        raise ModelError(f"{name} must be positive, got {value}")
    if not strict and np.any(v < 0):
        raise ModelError(f"{name} must be nonnegative, got {value}")


def _clean_quadratic(name, value):
    v = np.asarray(value, dtype=float)
    if np.any(v < -_ETA_NEG_TOL):
        raise ModelError(f"{name} is a quadratic form but evaluated to {value}")
    v = np.where(v < 0, 0.0, v)
    return float(v) if v.ndim == 0 else v


@dataclass(frozen=True)
class FullModelSpec:
    """Ground-truth Gaussian model with a Gaussian prior on each class mean.

    Class ``i`` is N(mu_i, sigma); the prior on mu_i is N(m_i, sigma / nu_i);
    ``n_i`` points are drawn from class ``i``.
    """

    p: int
    mu0: np.ndarray
    mu1: np.ndarray
    sigma: np.ndarray
    m0: np.ndarray
    m1: np.ndarray
    nu0: float
    nu1: float
    n0: int
    n1: int
    alpha0: float = 0.5

    def __post_init__(self):
        if int(self.p) != self.p or self.p < 1:
            raise ModelError(f"p must be a positive integer, got {self.p}")
        for name in ("mu0", "mu1", "m0", "m1"):
            v = np.asarray(getattr(self, name), dtype=float).reshape(-1)
            if v.shape != (self.p,):
                raise ModelError(f"{name} has length {v.size}, expected p = {self.p}")
            object.__setattr__(self, name, v)
        s = np.asarray(self.sigma, dtype=float)
        if s.shape != (self.p, self.p):
            raise ModelError(f"sigma has shape {s.shape}, expected ({self.p}, {self.p})")
        if not np.allclose(s, s.T, rtol=1e-12, atol=1e-12):
            raise ModelError("sigma is not symmetric")
        object.__setattr__(self, "sigma", s)
        _check_positive("nu0", self.nu0)
        _check_positive("nu1", self.nu1)
        for name in ("n0", "n1"):
            n = getattr(self, name)
            if int(n) != n or n < 1:
                raise ModelError(f"{name} must be an integer >= 1, got {n}")
        threshold(self.alpha0)

    @property
    def c(self) -> float:
        return threshold(self.alpha0)

    def cholesky(self):
        """Lower Cholesky factor of sigma in scipy ``cho_factor`` form."""
        try:
            return cho_factor(self.sigma, lower=True)
        except LinAlgError as exc:
            raise ModelError("sigma is not positive definite") from exc

    def to_dict(self) -> dict:
        return {
            "p": int(self.p),
            "mu0": self.mu0.tolist(),
            "mu1": self.mu1.tolist(),
            "sigma": self.sigma.tolist(),
            "m0": self.m0.tolist(),
            "m1": self.m1.tolist(),
            "nu0": float(self.nu0),
            "nu1": float(self.nu1),
            "n0": int(self.n0),
            "n1": int(self.n1),
            "alpha0": float(self.alpha0),
        }


@dataclass(frozen=True)
class ReducedConditional:
    """The fourteen scalars driving the conditional (fixed-mean) formulas.

    Fields may be numpy arrays of a common broadcast shape, in which case
    every downstream formula is evaluated elementwise.
    """

    p: float
    n0: float
    n1: float
    beta0: float
    beta1: float
    c: float
    delta2: float
    eta_m0_mu0: float = 0.0
    eta_m0_mu1: float = 0.0
    eta_m1_mu0: float = 0.0
    eta_m1_mu1: float = 0.0
    eta_m0mu0_mu0mu1: float = 0.0
    eta_m0mu0_m1mu0: float = 0.0
    eta_m1mu1_m0mu1: float = 0.0
    eta_m1mu1_mu1mu0: float = 0.0

    def __post_init__(self):
        for name in ("p", "n0", "n1", "beta0", "beta1"):
            _check_positive(name, getattr(self, name))
        for name in ("delta2", "eta_m0_mu0", "eta_m0_mu1", "eta_m1_mu0", "eta_m1_mu1"):
            object.__setattr__(self, name, _clean_quadratic(name, getattr(self, name)))

    @property
    def nu0(self):
        return self.beta0 * self.n0

    @property
    def nu1(self):
        return self.beta1 * self.n1

    @property
    def alpha0(self):
        return alpha0_from_threshold(self.c)


@dataclass(frozen=True)
class ReducedUnconditional:
    """The scalars driving the unconditional (prior-averaged) formulas."""

    p: float
    n0: float
    n1: float
    nu0: float
    nu1: float
    c: float
    Delta2: float

    def __post_init__(self):
        for name in ("p", "n0", "n1", "nu0", "nu1"):
            _check_positive(name, getattr(self, name))
        object.__setattr__(self, "Delta2", _clean_quadratic("Delta2", self.Delta2))

    @property
    def alpha0(self):
        return alpha0_from_threshold(self.c)


@dataclass(frozen=True)
class AsymptoticProfile:
    """Limiting ratios and inner products for the double-asymptotic formulas.

    ``J_i`` is the limit of p/n_i, ``gamma_i`` the limit of nu_i/n_i.
    """

    J0: float
    J1: float
    gamma0: float
    gamma1: float
    c: float = 0.0
    delta2_bar: float = 0.0
    Delta2_bar: float = 0.0
    eta_m0_mu0: float = 0.0
    eta_m0_mu1: float = 0.0
    eta_m1_mu0: float = 0.0
    eta_m1_mu1: float = 0.0
    eta_m0mu0_mu0mu1: float = 0.0
    eta_m0mu0_m1mu0: float = 0.0
    eta_m1mu1_m0mu1: float = 0.0
    eta_m1mu1_mu1mu0: float = 0.0

    def __post_init__(self):
        for name in ("J0", "J1", "gamma0", "gamma1", "delta2_bar", "Delta2_bar"):
            _check_positive(name, getattr(self, name), strict=False)

    @property
    def alpha0(self):
        return alpha0_from_threshold(self.c)


def _eta_solver(spec: FullModelSpec):
    factor = spec.cholesky()

    def eta(a1, a2, a3, a4):
        return float((a1 - a2) @ cho_solve(factor, a3 - a4))

    return eta


def reduce_conditional(spec: FullModelSpec) -> ReducedConditional:
    """Collapse a full spec to the conditional scalar invariants."""
    eta = _eta_solver(spec)
    mu0, mu1, m0, m1 = spec.mu0, spec.mu1, spec.m0, spec.m1
    return ReducedConditional(
        p=spec.p,
        n0=spec.n0,
        n1=spec.n1,
        beta0=spec.nu0 / spec.n0,
        beta1=spec.nu1 / spec.n1,
        c=spec.c,
        delta2=eta(mu0, mu1, mu0, mu1),
        eta_m0_mu0=eta(m0, mu0, m0, mu0),
        eta_m0_mu1=eta(m0, mu1, m0, mu1),
        eta_m1_mu0=eta(m1, mu0, m1, mu0),
        eta_m1_mu1=eta(m1, mu1, m1, mu1),
        eta_m0mu0_mu0mu1=eta(m0, mu0, mu0, mu1),
        eta_m0mu0_m1mu0=eta(m0, mu0, m1, mu0),
        eta_m1mu1_m0mu1=eta(m1, mu1, m0, mu1),
        eta_m1mu1_mu1mu0=eta(m1, mu1, mu1, mu0),
    )


def reduce_unconditional(spec: FullModelSpec) -> ReducedUnconditional:
    """Collapse a full spec to the unconditional scalar invariants."""
    eta = _eta_solver(spec)
    return ReducedUnconditional(
        p=spec.p,
        n0=spec.n0,
        n1=spec.n1,
        nu0=spec.nu0,
        nu1=spec.nu1,
        c=spec.c,
        Delta2=eta(spec.m0, spec.m1, spec.m0, spec.m1),
    )


def swap_classes(r):
    """Relabel class 0 as class 1 and vice versa.

    Sizes and prior weights are exchanged, ``c`` changes sign and each eta
    field moves to its mirror image under (m0, mu0) <-> (m1, mu1).  The
    field set is closed under that substitution, so no signs change.
    Works on both reduced types; an involution on each.
    """
    if isinstance(r, ReducedUnconditional):
        return replace(r, n0=r.n1, n1=r.n0, nu0=r.nu1, nu1=r.nu0, c=-r.c)
    if not isinstance(r, ReducedConditional):
        raise TypeError(f"cannot swap classes of {type(r).__name__}")
    return replace(
        r,
        n0=r.n1,
        n1=r.n0,
        beta0=r.beta1,
        beta1=r.beta0,
        c=-r.c,
        eta_m0_mu0=r.eta_m1_mu1,
        eta_m1_mu1=r.eta_m0_mu0,
        eta_m0_mu1=r.eta_m1_mu0,
        eta_m1_mu0=r.eta_m0_mu1,
        eta_m0mu0_mu0mu1=r.eta_m1mu1_mu1mu0,
        eta_m1mu1_mu1mu0=r.eta_m0mu0_mu0mu1,
        eta_m0mu0_m1mu0=r.eta_m1mu1_m0mu1,
        eta_m1mu1_m0mu1=r.eta_m0mu0_m1mu0,
    )


def profile_from_reduced(r) -> AsymptoticProfile:
    """Plug finite-sample ratios into the limiting profile.

    Evaluating the asymptotic formulas on this profile gives the "simple"
    finite-sample approximations (as opposed to the moment-matched ones).
    """
    if isinstance(r, ReducedConditional):
        return AsymptoticProfile(
            J0=r.p / r.n0,
            J1=r.p / r.n1,
            gamma0=r.beta0,
            gamma1=r.beta1,
            c=r.c,
            delta2_bar=r.delta2,
            eta_m0_mu0=r.eta_m0_mu0,
            eta_m0_mu1=r.eta_m0_mu1,
            eta_m1_mu0=r.eta_m1_mu0,
            eta_m1_mu1=r.eta_m1_mu1,
            eta_m0mu0_mu0mu1=r.eta_m0mu0_mu0mu1,
            eta_m0mu0_m1mu0=r.eta_m0mu0_m1mu0,
            eta_m1mu1_m0mu1=r.eta_m1mu1_m0mu1,
            eta_m1mu1_mu1mu0=r.eta_m1mu1_mu1mu0,
        )
    if isinstance(r, ReducedUnconditional):
        return AsymptoticProfile(
            J0=r.p / r.n0,
            J1=r.p / r.n1,
            gamma0=r.nu0 / r.n0,
            gamma1=r.nu1 / r.n1,
            c=r.c,
            Delta2_bar=r.Delta2,
        )
    raise TypeError(f"no profile for {type(r).__name__}")


def equicorrelated_setup(p, n0, n1, nu0=50.0, nu1=None, delta2=4.0, offset=0.01, rho=0.1, alpha0=0.5):
    """Simulation design with unit-variance, equicorrelated features.

    Sigma has unit diagonal and ``rho`` off the diagonal.  The class means
    have equal elements with mu0 = -mu1, scaled so that the squared
    Mahalanobis distance equals ``delta2``; prior means sit at
    m_i = (1 + offset) mu_i.
    """
    nu1 = nu0 if nu1 is None else nu1
    sigma = np.full((p, p), rho) + (1.0 - rho) * np.eye(p)
    # ones is an eigenvector of sigma with eigenvalue 1 + (p - 1) rho
    lam = 1.0 + (p - 1) * rho
    a = 0.5 * math.sqrt(delta2 * lam / p)
    mu0 = np.full(p, a)
    mu1 = -mu0
    return FullModelSpec(
        p=p,
        mu0=mu0,
        mu1=mu1,
        sigma=sigma,
        m0=(1.0 + offset) * mu0,
        m1=(1.0 + offset) * mu1,
        nu0=nu0,
        nu1=nu1,
        n0=n0,
        n1=n1,
        alpha0=alpha0,
    )


def centered_conditional(p, n, beta, delta2, c=0.0) -> ReducedConditional:
    """Balanced design (n0 = n1 = n/2, common beta) with priors centred on the true means.

    With m_i = mu_i every four-point eta vanishes and the two-point ones are
    0 or ``delta2``.  Accepts broadcastable arrays.
    """
    zero = np.zeros_like(np.asarray(delta2, dtype=float))
    return ReducedConditional(
        p=p,
        n0=np.asarray(n) / 2.0,
        n1=np.asarray(n) / 2.0,
        beta0=beta,
        beta1=beta,
        c=c,
        delta2=delta2,
        eta_m0_mu0=zero,
        eta_m0_mu1=delta2,
        eta_m1_mu0=delta2,
        eta_m1_mu1=zero,
    )


# --- JSON documents -------------------------------------------------------

_FULL_KEYS = ("p", "mu0", "mu1", "sigma", "m0", "m1", "nu0", "nu1", "n0", "n1", "alpha0")
_COND_REQUIRED = ("p", "n0", "n1", "beta0", "beta1", "delta2")
_UNCOND_REQUIRED = ("p", "n0", "n1", "nu0", "nu1", "Delta2")


def _require(doc, keys, where):
    missing = [k for k in keys if k not in doc]
    if missing:
        raise ModelError(f"{where}: missing field {', '.join(repr(k) for k in missing)}")


def _c_from_doc(doc):
    if "c" in doc:
        return float(doc["c"])
    if "alpha0" in doc:
        return threshold(float(doc["alpha0"]))
    return 0.0


def parse_spec(doc: dict) -> dict:
    """Turn a decoded JSON model document into model objects.

    Returns a dict with whichever of ``full``, ``conditional``,
    ``unconditional`` and ``asymptotic`` the document determines.  A full
    document yields all of the first three.
    """
    if not isinstance(doc, dict):
        raise ModelError("model document must be a JSON object")
    try:
        return _parse(doc)
    except ModelError:
        raise
    except (TypeError, ValueError, KeyError) as exc:
        raise ModelError(f"malformed model document: {exc}") from exc


def _parse(doc: dict) -> dict:
    out = {}
    if "equicorrelated" in doc:
        kw = doc["equicorrelated"]
        if not isinstance(kw, dict):
            raise ModelError("'equicorrelated' must be an object")
        _require(kw, ("p", "n0", "n1"), "equicorrelated")
        allowed = {"p", "n0", "n1", "nu0", "nu1", "delta2", "offset", "rho", "alpha0"}
        unknown = set(kw) - allowed
        if unknown:
            raise ModelError(f"equicorrelated: unknown field(s) {sorted(unknown)}")
        doc = {**equicorrelated_setup(**kw).to_dict(), **{k: v for k, v in doc.items() if k != "equicorrelated"}}
    if "reduced" in doc:
        red = doc["reduced"]
        if not isinstance(red, dict):
            raise ModelError("'reduced' must be an object")
        cond_keys = {f.name for f in fields(ReducedConditional)}
        if "delta2" in red or "beta0" in red:
            _require(red, _COND_REQUIRED, "reduced (conditional)")
            kw = {k: float(v) for k, v in red.items() if k in cond_keys}
            kw["c"] = _c_from_doc(red)
            out["conditional"] = ReducedConditional(**kw)
        if "Delta2" in red or "nu0" in red:
            _require(red, _UNCOND_REQUIRED, "reduced (unconditional)")
            out["unconditional"] = ReducedUnconditional(
                p=float(red["p"]), n0=float(red["n0"]), n1=float(red["n1"]),
                nu0=float(red["nu0"]), nu1=float(red["nu1"]),
                c=_c_from_doc(red), Delta2=float(red["Delta2"]),
            )
        if not out:
            raise ModelError("reduced: expected 'delta2' (conditional) or 'Delta2' (unconditional) fields")
    else:
        _require(doc, _FULL_KEYS[:-1], "model")
        p = int(doc["p"])
        try:
            sigma = np.asarray(doc["sigma"], dtype=float)
        except (TypeError, ValueError) as exc:
            raise ModelError(f"sigma is not numeric: {exc}") from exc
        if sigma.ndim == 1 and sigma.size == p * p:
            sigma = sigma.reshape(p, p)
        spec = FullModelSpec(
            p=p, mu0=doc["mu0"], mu1=doc["mu1"], sigma=sigma, m0=doc["m0"], m1=doc["m1"],
            nu0=float(doc["nu0"]), nu1=float(doc["nu1"]), n0=int(doc["n0"]), n1=int(doc["n1"]),
            alpha0=float(doc.get("alpha0", 0.5)),
        )
        out["full"] = spec
        out["conditional"] = reduce_conditional(spec)
        out["unconditional"] = reduce_unconditional(spec)
    if "asymptotic" in doc:
        asy = doc["asymptotic"]
        _require(asy, ("J0", "J1", "gamma0", "gamma1"), "asymptotic")
        keys = {f.name for f in fields(AsymptoticProfile)}
        unknown = set(asy) - keys
        if unknown:
            raise ModelError(f"asymptotic: unknown field(s) {sorted(unknown)}")
        out["asymptotic"] = AsymptoticProfile(**{k: float(v) for k, v in asy.items()})
    return out


def load_spec(path: Union[str, Path]) -> dict:
    """Read and parse a JSON model document; errors carry line numbers."""
    text = Path(path).read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
    return parse_spec(doc)


def reduced_to_dict(r) -> dict:
    """Plain-float dict of a reduced object (scalar fields only)."""
    return {k: float(v) for k, v in asdict(r).items()}
