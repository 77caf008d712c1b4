"""Standard normal CDFs in one and two dimensions.

The bivariate routine follows the Drezner & Wesolowsky (1990) representation
as refined by Genz (2004): Gauss-Legendre integration of the derivative of
the CDF with respect to the correlation for |rho| < 0.925, and an expansion
around the degenerate |rho| = 1 case above that.  Both paths are vectorized
over broadcast inputs.
"""

import numpy as np
from scipy.special import ndtr

__all__ = ["NumericError", "clamp_rho", "std_normal_cdf", "bivariate_normal_cdf"]

_RHO_SLACK = 1e-9  # |rho| in (1, 1 + slack] is treated as rounding
_RHO_DEGENERATE = 1.0 - 1e-12

# Gauss-Legendre half-rules on [-1, 1] (positive abscissae only).
_GL6 = (
    np.array([0.1713244923791705, 0.3607615730481384, 0.4679139345726904]),
    np.array([0.9324695142031522, 0.6612093864662647, 0.2386191860831970]),
)
_GL12 = (
    np.array([0.04717533638651177, 0.1069393259953183, 0.1600783285433464,
              0.2031674267230659, 0.2334925365383547, 0.2491470458134029]),
    np.array([0.9815606342467191, 0.9041172563704750, 0.7699026741943050,
              0.5873179542866171, 0.3678314989981802, 0.1252334085114692]),
)
_GL20 = (
    np.array([0.01761400713915212, 0.04060142980038694, 0.06267204833410906,
              0.08327674157670475, 0.1019301198172404, 0.1181945319615184,
              0.1316886384491766, 0.1420961093183821, 0.1491729864726037,
              0.1527533871307259]),
    np.array([0.9931285991850949, 0.9639719272779138, 0.9122344282513259,
              0.8391169718222188, 0.7463319064601508, 0.6360536807265150,
              0.5108670019508271, 0.3737060887154196, 0.2277858511416451,
              0.07652652113349733]),
)


def _full_rule(rule):
    w, x = rule
    # nodes mapped to (0, 2); integrating over (0, 2) * scale
    return np.concatenate([w, w]), np.concatenate([1.0 - x, 1.0 + x])


_RULES = [_full_rule(r) for r in (_GL6, _GL12, _GL20)]


class NumericError(ValueError):
    """Raised for NaN inputs or out-of-range correlations."""


def clamp_rho(rho):
    """Validate a correlation, snapping values within 1e-9 outside [-1, 1]."""
    r = np.asarray(rho, dtype=float)
    if np.any(np.isnan(r)):
        raise NumericError("correlation is NaN")
    if np.any(np.abs(r) > 1.0 + _RHO_SLACK):
        raise NumericError(f"correlation outside [-1, 1]: {r[np.abs(r) > 1 + _RHO_SLACK]}")
    return np.clip(r, -1.0, 1.0)


def std_normal_cdf(x):
    """Phi(x); accepts scalars or arrays, including +/-inf."""
    xa = np.asarray(x, dtype=float)
    if np.any(np.isnan(xa)):
        raise NumericError("std_normal_cdf received NaN")
    out = ndtr(xa)
    return float(out) if out.ndim == 0 else out


def _bvnu_moderate(h, k, r):
    """Upper orthant P(X > h, Y > k) for |r| < 0.925 (finite h, k)."""
    out = np.empty_like(h)
    absr = np.abs(r)
    hk = h * k
    hs = 0.5 * (h * h + k * k)
    for lo, hi, (w, x) in ((0.0, 0.3, _RULES[0]), (0.3, 0.75, _RULES[1]), (0.75, 1.0, _RULES[2])):
        m = (absr >= lo) & (absr < hi)
        if not m.any():
            continue
        asr = 0.5 * np.arcsin(r[m])
        sn = np.sin(asr[:, None] * x[None, :])
        f = np.exp((sn * hk[m][:, None] - hs[m][:, None]) / (1.0 - sn * sn))
        out[m] = (f @ w) * asr / (2.0 * np.pi) + ndtr(-h[m]) * ndtr(-k[m])
    return out


def _bvnu_high(h, k, r):
    """Upper orthant P(X > h, Y > k) for 0.925 <= |r| < 1 (finite h, k)."""
    w, x = _RULES[2]
    tp = 2.0 * np.pi
    neg = r < 0
    k = np.where(neg, -k, k)
    hk = h * k
    a_s = 1.0 - r * r
    a = np.sqrt(a_s)
    bs = (h - k) ** 2
    c = (4.0 - hk) / 8.0
    d = (12.0 - hk) / 80.0
    asr = -0.5 * (bs / a_s + hk)

    bvn = np.where(
        asr > -100.0,
        a * np.exp(np.maximum(asr, -100.0)) * (1.0 - c * (bs - a_s) * (1.0 - d * bs) / 3.0 + c * d * a_s * a_s),
        0.0,
    )
    b = np.sqrt(bs)
    sp = np.sqrt(tp) * ndtr(-b / a)
    corr = np.exp(-0.5 * np.minimum(hk, 200.0)) * sp * b * (1.0 - c * bs * (1.0 - d * bs) / 3.0)
    bvn = bvn - np.where(hk > -100.0, corr, 0.0)

    ah = 0.5 * a
    xs = (ah[:, None] * x[None, :]) ** 2
    asr2 = -0.5 * (bs[:, None] / xs + hk[:, None])
    keep = asr2 > -100.0
    sp2 = 1.0 + c[:, None] * xs * (1.0 + 5.0 * d[:, None] * xs)
    rs = np.sqrt(1.0 - xs)
    ep = np.exp(-0.5 * hk[:, None] * xs / (1.0 + rs) ** 2) / rs
    terms = np.where(keep, np.exp(np.maximum(asr2, -100.0)) * (sp2 - ep), 0.0)
    bvn = (ah * (terms @ w) - bvn) / tp

    pos_branch = bvn + ndtr(-np.maximum(h, k))
    l_val = np.where(h < 0, ndtr(k) - ndtr(h), ndtr(-h) - ndtr(-k))
    neg_branch = np.where(h >= k, -bvn, l_val - bvn)
    return np.where(neg, neg_branch, pos_branch)


def bivariate_normal_cdf(a, b, rho):
    """P(X <= a, Y <= b) for a standard bivariate normal with correlation rho.

    Inputs broadcast against each other.  ``a`` and ``b`` may be +/-inf.
    Correlations within 1e-9 of the unit interval are snapped onto it, and
    |rho| > 1 - 1e-12 uses the exact degenerate limits.
    """
    a_arr, b_arr, r_arr = np.broadcast_arrays(
        np.asarray(a, dtype=float), np.asarray(b, dtype=float), clamp_rho(rho)
    )
    if np.any(np.isnan(a_arr)) or np.any(np.isnan(b_arr)):
        raise NumericError("bivariate_normal_cdf received NaN")
    scalar = a_arr.ndim == 0
    a_arr, b_arr, r_arr = (np.atleast_1d(v).ravel() for v in (a_arr, b_arr, r_arr))
    shape = np.broadcast(np.asarray(a), np.asarray(b), np.asarray(rho)).shape

    out = np.empty(a_arr.shape, dtype=float)
    fa, fb = ndtr(a_arr), ndtr(b_arr)

    # lower orthant at (a, b) is the upper orthant at (-a, -b)
    h, k = -a_arr, -b_arr
    inf_any = ~np.isfinite(a_arr) | ~np.isfinite(b_arr)
    plus1 = ~inf_any & (r_arr > _RHO_DEGENERATE)
    minus1 = ~inf_any & (r_arr < -_RHO_DEGENERATE)
    zero = ~inf_any & ~plus1 & ~minus1 & (r_arr == 0.0)
    moderate = ~inf_any & ~plus1 & ~minus1 & ~zero & (np.abs(r_arr) < 0.925)
    high = ~inf_any & ~plus1 & ~minus1 & ~zero & ~moderate

    # infinite limits: any -inf gives 0, +inf collapses to a univariate CDF
    out[inf_any] = np.where(
        (a_arr[inf_any] == -np.inf) | (b_arr[inf_any] == -np.inf),
        0.0,
        np.where(a_arr[inf_any] == np.inf, fb[inf_any], fa[inf_any]),
    )
    out[plus1] = np.minimum(fa[plus1], fb[plus1])
    out[minus1] = np.maximum(0.0, fa[minus1] + fb[minus1] - 1.0)
    out[zero] = fa[zero] * fb[zero]
    if moderate.any():
        out[moderate] = _bvnu_moderate(h[moderate], k[moderate], r_arr[moderate])
    if high.any():
        out[high] = _bvnu_high(h[high], k[high], r_arr[high])
    out = np.clip(out, 0.0, 1.0)

    if scalar:
        return float(out[0])
    return out.reshape(shape)
