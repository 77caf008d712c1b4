"""Sample-size planning from the worst-case RMS bound.

``kappa(n, p, beta)`` is the RMS of the estimator with the classes made as
hard to separate as possible (zero Mahalanobis distance between the means,
or between the prior means in the unconditional case).  It depends only on
the design, so it bounds the RMS for any separation and can be inverted
for the smallest balanced sample size achieving a target.
"""

import csv
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .model import ModelError, ReducedUnconditional, centered_conditional
from .moments import conditional_moment_matrix, unconditional_moment_matrix

__all__ = [
    "DEFAULT_TAUS",
    "DEFAULT_PS",
    "PlanQuery",
    "PlanResult",
    "kappa",
    "min_n",
    "plan_table",
    "write_plan_csv",
]

DEFAULT_TAUS = {
    "conditional": (0.1, 0.09, 0.08, 0.07, 0.06, 0.05),
    "unconditional": (0.025, 0.02, 0.015, 0.01, 0.005),
}
DEFAULT_PS = (2, 4, 8, 16, 32, 64, 128)
_MODES = ("conditional", "unconditional")
_RULES = ("literal", "safe")
_CHUNK = 1024  # even sizes evaluated per vectorized batch


def kappa(n, p, beta=1.0, mode="conditional", c=0.0, cross_prior_term=False):
    """Worst-case RMS for a balanced design of total size ``n``.

    ``n`` may be an array of even sizes; each class gets n/2 points and a
    prior with certainty nu = beta * n / 2.  ``cross_prior_term`` is passed
    to the unconditional pipeline.
    """
    n_arr = np.asarray(n, dtype=float)
    if np.any(n_arr < 2) or np.any(n_arr % 2):
        raise ModelError(f"n must be even and >= 2, got {n}")
    if np.any(beta * n_arr / 2.0 < 1e-9):
        raise ModelError("prior certainty beta * n / 2 is effectively zero")
    if mode == "conditional":
        mm = conditional_moment_matrix(centered_conditional(p, n_arr, beta, np.zeros_like(n_arr), c))
    elif mode == "unconditional":
        half = n_arr / 2.0
        mm = unconditional_moment_matrix(
            ReducedUnconditional(p=p, n0=half, n1=half, nu0=beta * half, nu1=beta * half, c=c,
                                 Delta2=np.zeros_like(n_arr)),
            cross_prior_term=cross_prior_term,
        )
    else:
        raise ValueError(f"mode must be one of {_MODES}, got {mode!r}")
    return mm.rms


@dataclass(frozen=True)
class PlanQuery:
    """One planning cell.

    ``rule='literal'`` returns the first even n with kappa below tau;
    ``rule='safe'`` also requires kappa to stay below tau over the next
    ``horizon`` sizes, which guards against the non-monotone unconditional
    curve.  The scan starts at ``n_start``.
    """

    mode: str
    p: int
    tau: float
    beta: float = 1.0
    n_max: int = 10_000
    rule: str = "literal"
    horizon: int = 200
    n_start: int = 4
    c: float = 0.0
    cross_prior_term: bool = False

    def __post_init__(self):
        if self.mode not in _MODES:
            raise ModelError(f"mode must be one of {_MODES}, got {self.mode!r}")
        if self.rule not in _RULES:
            raise ModelError(f"rule must be one of {_RULES}, got {self.rule!r}")
        if not 0.0 < self.tau < 1.0:
            raise ModelError(f"tau must lie in (0, 1), got {self.tau}")
        if self.p < 1:
            raise ModelError(f"p must be >= 1, got {self.p}")
        if self.beta <= 0:
            raise ModelError(f"beta must be positive, got {self.beta}")
        if self.n_max % 2 or self.n_max < 4:
            raise ModelError(f"n_max must be even and >= 4, got {self.n_max}")
        if self.n_start % 2 or self.n_start < 2 or self.n_start > self.n_max:
            raise ModelError(f"n_start must be even, >= 2 and <= n_max, got {self.n_start}")
        if self.horizon < 0 or self.horizon % 2:
            raise ModelError(f"horizon must be even and >= 0, got {self.horizon}")


@dataclass(frozen=True)
class PlanResult:
    query: PlanQuery
    n_min: Optional[int]
    kappa_at_n: Optional[float]
    trace: np.ndarray = field(repr=False)  # (k, 2) array of (n, kappa)

    @property
    def found(self) -> bool:
        return self.n_min is not None


class _Curve:
    """Lazily extended kappa(n) over even n for one (mode, p, beta, c)."""

    def __init__(self, mode, p, beta, c, n_start, cross_prior_term=False):
        self.args = (p, beta, mode, c, cross_prior_term)
        self.n = np.arange(n_start, n_start, 2, dtype=float)
        self.k = np.empty(0)
        self.next_n = n_start

    def extend(self, n_last):
        """Evaluate one more batch, never past ``n_last``."""
        hi = min(n_last, self.next_n + 2 * (_CHUNK - 1))
        ns = np.arange(self.next_n, hi + 1, 2, dtype=float)
        self.n = np.concatenate([self.n, ns])
        self.k = np.concatenate([self.k, kappa(ns, *self.args)])
        self.next_n = hi + 2


def _search(curve: _Curve, q: PlanQuery) -> PlanResult:
    extra = q.horizon if q.rule == "safe" else 0
    need = extra // 2 + 1  # consecutive sizes that must fall below tau
    last = q.n_max + extra
    run = 0
    i = 0
    while True:
        if i == curve.n.size:
            if curve.next_n > last:
                break
            curve.extend(last)
        if curve.n[i] > last:
            break
        run = run + 1 if curve.k[i] < q.tau else 0
        if run == need:
            j = i - need + 1
            trace = np.column_stack([curve.n[: i + 1], curve.k[: i + 1]])
            return PlanResult(q, int(curve.n[j]), float(curve.k[j]), trace)
        i += 1
    return PlanResult(q, None, None, np.column_stack([curve.n[:i], curve.k[:i]]))


def min_n(query: PlanQuery) -> PlanResult:
    """Smallest even n meeting the target under the query's rule."""
    q = query
    return _search(_Curve(q.mode, q.p, q.beta, q.c, q.n_start, q.cross_prior_term), q)


def plan_table(
    mode: str = "conditional",
    beta: float = 1.0,
    taus: Optional[Sequence[float]] = None,
    ps: Sequence[int] = DEFAULT_PS,
    rule: str = "literal",
    n_max: int = 10_000,
    horizon: int = 200,
    n_start: int = 4,
    cross_prior_term: bool = False,
) -> list:
    """Evaluate a (tau, p) grid, sharing one kappa curve per p."""
    taus = DEFAULT_TAUS[mode] if taus is None else taus
    out = []
    for p in ps:
        curve = _Curve(mode, p, beta, 0.0, n_start, cross_prior_term)
        for tau in taus:
            q = PlanQuery(mode=mode, p=p, tau=tau, beta=beta, n_max=n_max, rule=rule,
                          horizon=horizon, n_start=n_start, cross_prior_term=cross_prior_term)
            out.append(_search(curve, q))
    return out


CSV_COLUMNS = ("tau", "p", "n_min", "kappa_at_n_min", "mode", "beta")


def write_plan_csv(results, path):
    """Write results in the fixed column order; misses show as ``>n_max``."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_COLUMNS)
        for r in results:
            q = r.query
            if r.found:
                w.writerow([repr(q.tau), q.p, r.n_min, repr(r.kappa_at_n), q.mode, repr(q.beta)])
            else:
                w.writerow([repr(q.tau), q.p, f">{q.n_max}", "", q.mode, repr(q.beta)])
