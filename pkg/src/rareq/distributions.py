"""Truncated normal and box-uniform densities.

Everything here is vectorized over numpy arrays. Samplers take an explicit
``numpy.random.Generator`` and draw by inverse-CDF, so the number of uniform
variates consumed is always exactly ``n`` (per dimension).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

_SQRT_2PI = math.sqrt(2.0 * math.pi)

# Acklam's rational approximation to the standard normal quantile.
_A = (-3.969683028665376e01, 2.209460984245205e02, -2.759285104469687e02,
      1.383577518672690e02, -3.066479806614716e01, 2.506628277459239e00)
_B = (-5.447609879822406e01, 1.615858368580409e02, -1.556989798598866e02,
      6.680131188771972e01, -1.328068155288572e01)
_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e00,
      -2.549732539343734e00, 4.374664141464968e00, 2.938163982698783e00)
_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e00,
      3.754408661907416e00)
_P_LOW = 0.02425


@dataclass(frozen=True)
class TruncNormParams:
    """Normal(mu, sigma**2) restricted to the interval [a, b]."""

    mu: float
    sigma: float
    a: float
    b: float

    def __post_init__(self):
        for name in ("mu", "sigma", "a", "b"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite, got {getattr(self, name)!r}")
        if self.sigma <= 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")
        if not self.a < self.b:
            raise ValueError(f"need a < b, got a={self.a}, b={self.b}")

    @property
    def _z_bounds(self) -> tuple[float, float]:
        return (self.a - self.mu) / self.sigma, (self.b - self.mu) / self.sigma

    @property
    def _upper_heavy(self) -> bool:
        # Work with survival functions when the interval sits in the upper tail.
        za, zb = self._z_bounds
        return za + zb > 0


@dataclass(frozen=True)
class BoxUniformParams:
    """Axis-aligned box ``[lower[i], upper[i]]`` in R^d (closed)."""

    lower: tuple[float, ...]
    upper: tuple[float, ...]

    def __post_init__(self):
        lo = tuple(float(v) for v in np.atleast_1d(self.lower))
        hi = tuple(float(v) for v in np.atleast_1d(self.upper))
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)
        if len(lo) != len(hi) or not lo:
            raise ValueError("lower and upper must be non-empty and of equal length")
        if not all(math.isfinite(l) and math.isfinite(h) and l < h for l, h in zip(lo, hi)):
            raise ValueError(f"need finite lower < upper in every dimension, got {lo}, {hi}")

    @property
    def dim(self) -> int:
        return len(self.lower)

    @property
    def volume(self) -> float:
        return math.prod(h - l for l, h in zip(self.lower, self.upper))


def norm_cdf(z):
    """Standard normal CDF."""
    return ndtr(z)


def norm_ppf(p):
    """Standard normal quantile.

    Acklam's rational approximation (relative error about 1.2e-9) followed by
    one Halley correction step against ``norm_cdf``, which brings the result
    to near machine precision. ``p=0`` and ``p=1`` map to -inf and +inf.
    """
    p_arr = np.asarray(p, dtype=float)
    if np.any((p_arr < 0) | (p_arr > 1)) or np.any(np.isnan(p_arr)):
        raise ValueError("probabilities must lie in [0, 1]")
    z = np.empty_like(p_arr)
    z[p_arr == 0] = -np.inf
    z[p_arr == 1] = np.inf

    inner = (p_arr > 0) & (p_arr < 1)
    pm = p_arr[inner]
    zm = np.empty_like(pm)

    lo = pm < _P_LOW
    hi = pm > 1 - _P_LOW
    mid = ~(lo | hi)
    if np.any(lo):
        zm[lo] = _tail(np.sqrt(-2.0 * np.log(pm[lo])))
    if np.any(hi):
        zm[hi] = -_tail(np.sqrt(-2.0 * np.log1p(-pm[hi])))
    if np.any(mid):
        q = pm[mid] - 0.5
        r = q * q
        num = (((((_A[0] * r + _A[1]) * r + _A[2]) * r + _A[3]) * r + _A[4]) * r + _A[5]) * q
        den = ((((_B[0] * r + _B[1]) * r + _B[2]) * r + _B[3]) * r + _B[4]) * r + 1.0
        zm[mid] = num / den

    # Halley refinement; the upper half uses the survival function to keep digits.
    upper = zm > 0
    err = np.where(upper, ndtr(-zm) - (1.0 - pm), ndtr(zm) - pm)
    err = np.where(upper, -err, err)
    u = err * _SQRT_2PI * np.exp(0.5 * zm * zm)
    zm = zm - u / (1.0 + 0.5 * zm * u)

    z[inner] = zm
    if np.ndim(p) == 0:
        return float(z)
    return z


def _tail(q):
    num = ((((_C[0] * q + _C[1]) * q + _C[2]) * q + _C[3]) * q + _C[4]) * q + _C[5]
    den = (((_D[0] * q + _D[1]) * q + _D[2]) * q + _D[3]) * q + 1.0
    return num / den


def _finite_array(x, name="x"):
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must be finite")
    return arr


def _scalar_or_array(template, values):
    if np.ndim(template) == 0:
        return float(values)
    return values


def truncnorm_pdf(x, p: TruncNormParams):
    """Density of the truncated normal, zero outside [a, b]."""
    arr = _finite_array(x)
    za, zb = p._z_bounds
    if p._upper_heavy:
        mass = ndtr(-za) - ndtr(-zb)
    else:
        mass = ndtr(zb) - ndtr(za)
    z = (arr - p.mu) / p.sigma
    out = np.exp(-0.5 * z * z) / (_SQRT_2PI * p.sigma * mass)
    out = np.where((arr >= p.a) & (arr <= p.b), out, 0.0)
    return _scalar_or_array(x, out)


def truncnorm_cdf(x, p: TruncNormParams):
    """CDF of the truncated normal, clamped to [0, 1]."""
    arr = np.asarray(x, dtype=float)
    if np.any(np.isnan(arr)):
        raise ValueError("x must not be NaN")
    za, zb = p._z_bounds
    z = (np.clip(arr, p.a, p.b) - p.mu) / p.sigma
    if p._upper_heavy:
        sa, sb = ndtr(-za), ndtr(-zb)
        out = (sa - ndtr(-z)) / (sa - sb)
    else:
        fa, fb = ndtr(za), ndtr(zb)
        out = (ndtr(z) - fa) / (fb - fa)
    out = np.clip(out, 0.0, 1.0)
    out = np.where(arr <= p.a, 0.0, np.where(arr >= p.b, 1.0, out))
    return _scalar_or_array(x, out)


def truncnorm_quantile(u, p: TruncNormParams):
    """Inverse of :func:`truncnorm_cdf`; returns ``a`` at 0 and ``b`` at 1."""
    arr = np.asarray(u, dtype=float)
    if np.any(np.isnan(arr)) or np.any((arr < 0) | (arr > 1)):
        raise ValueError("u must lie in [0, 1]")
    za, zb = p._z_bounds
    if p._upper_heavy:
        sa, sb = ndtr(-za), ndtr(-zb)
        z = -norm_ppf(np.asarray(sb + (1.0 - arr) * (sa - sb)))
    else:
        fa, fb = ndtr(za), ndtr(zb)
        z = norm_ppf(np.asarray(fa + arr * (fb - fa)))
    out = np.clip(p.mu + p.sigma * z, p.a, p.b)
    out = np.where(arr == 0, p.a, np.where(arr == 1, p.b, out))
    return _scalar_or_array(u, out)


def sample_truncnorm(n: int, p: TruncNormParams, rng: np.random.Generator) -> np.ndarray:
    """Draw ``n`` i.i.d. truncated-normal values by inverse-CDF."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    return truncnorm_quantile(rng.random(n), p)


def box_uniform_pdf(x, p: BoxUniformParams):
    """``1/volume`` inside the closed box, 0 outside.

    ``x`` is either one point of length ``d`` or an ``(n, d)`` array.
    """
    arr = _finite_array(x)
    single = arr.ndim == 1
    pts = np.atleast_2d(arr)
    if pts.ndim != 2 or pts.shape[1] != p.dim:
        raise ValueError(f"expected points of dimension {p.dim}, got shape {arr.shape}")
    inside = np.all((pts >= np.asarray(p.lower)) & (pts <= np.asarray(p.upper)), axis=1)
    out = np.where(inside, 1.0 / p.volume, 0.0)
    return float(out[0]) if single else out


def sample_box_uniform(n: int, p: BoxUniformParams, rng: np.random.Generator) -> np.ndarray:
    """Draw an ``(n, d)`` array of i.i.d. uniform points in the box."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    return rng.uniform(np.asarray(p.lower), np.asarray(p.upper), size=(n, p.dim))
