"""Gaussian probability and structural-credit primitives.

Everything here is pure and works on floats; ``norm_cdf`` and ``norm_inv``
also accept numpy arrays so the simulation engine can threshold whole
batches of paths at once.
"""
from __future__ import annotations

import math

import numpy as np
from scipy.special import erfc

__all__ = [
    "DomainError",
    "FactorizationError",
    "CalibrationError",
    "norm_cdf",
    "norm_inv",
    "bivariate_norm_cdf",
    "cholesky_lower",
    "uniform_correlation",
    "uniform_cholesky",
    "validate_correlation",
    "implied_double_default_pd",
    "default_correlation",
    "merton_pd",
    "merton_sigma",
]

SQRT2 = math.sqrt(2.0)
TWO_PI = 2.0 * math.pi
PIVOT_TOL = 1e-10


class DomainError(ValueError):
    """Argument outside the domain of a probability function."""


class FactorizationError(ValueError):
    """Matrix is not positive semi-definite within tolerance."""

    def __init__(self, message, pivot=None):
        super().__init__(message)
        self.pivot = pivot


class CalibrationError(ValueError):
    """No admissible volatility reproduces the requested default probability."""


def norm_cdf(x):
    """Standard normal CDF, scalar or array."""
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise DomainError("norm_cdf requires finite input")
    out = 0.5 * erfc(-arr / SQRT2)
    return float(out) if out.ndim == 0 else out


# Acklam's rational approximation; relative error below 1.15e-9 before polishing.
_A = (-3.969683028665376e01, 2.209460984245205e02, -2.759285104469687e02,
      1.383577518672690e02, -3.066479806614716e01, 2.506628277459239e00)
_B = (-5.447609879822406e01, 1.615858368580409e02, -1.556989798598866e02,
      6.680131188771972e01, -1.328068155288572e01)
_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e00,
      -2.549732539343734e00, 4.374664141464968e00, 2.938163982698783e00)
_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e00,
      3.754408661907416e00)
_P_LOW = 0.02425


def _acklam(p):
    x = np.empty_like(p)
    lo = p < _P_LOW
    hi = p > 1.0 - _P_LOW
    mid = ~(lo | hi)

    q = np.sqrt(-2.0 * np.log(p[lo]))
    x[lo] = ((((((_C[0] * q + _C[1]) * q + _C[2]) * q + _C[3]) * q + _C[4]) * q + _C[5])
             / ((((_D[0] * q + _D[1]) * q + _D[2]) * q + _D[3]) * q + 1.0))
    q = np.sqrt(-2.0 * np.log1p(-p[hi]))
    x[hi] = -((((((_C[0] * q + _C[1]) * q + _C[2]) * q + _C[3]) * q + _C[4]) * q + _C[5])
              / ((((_D[0] * q + _D[1]) * q + _D[2]) * q + _D[3]) * q + 1.0))
    q = p[mid] - 0.5
    r = q * q
    x[mid] = ((((((_A[0] * r + _A[1]) * r + _A[2]) * r + _A[3]) * r + _A[4]) * r + _A[5]) * q
              / (((((_B[0] * r + _B[1]) * r + _B[2]) * r + _B[3]) * r + _B[4]) * r + 1.0))
    return x


def norm_inv(p):
    """Inverse standard normal CDF.

    Rational approximation followed by one Newton step against ``norm_cdf``.
    Upper-tail probabilities are polished through the complementary CDF so
    that accuracy holds on both sides of the median.
    """
    arr = np.asarray(p, dtype=float)
    if np.any(~(arr > 0.0) | ~(arr < 1.0)):
        raise DomainError("norm_inv requires 0 < p < 1")
    flat = np.atleast_1d(arr).ravel()
    x = _acklam(flat)
    upper = flat > 0.5
    # residual in whichever tail keeps precision
    resid = np.where(upper, (1.0 - flat) - 0.5 * erfc(x / SQRT2), 0.5 * erfc(-x / SQRT2) - flat)
    dens = np.exp(-0.5 * x * x) / math.sqrt(TWO_PI)
    x = x - resid / dens
    x = x.reshape(arr.shape)
    return float(x) if arr.ndim == 0 else x


_GL_X, _GL_W = np.polynomial.legendre.leggauss(20)
# nodes mapped onto [0, 2] as in the Drezner-Wesolowsky / Genz formulation
_DW_X = 1.0 + _GL_X
_DW_W = _GL_W


def _bvn_upper(h, k, r):
    """P(X > h, Y > k) for a standard bivariate normal with correlation ``r``."""
    hk = h * k
    if abs(r) < 0.925:
        hs = 0.5 * (h * h + k * k)
        asr = 0.5 * math.asin(r)
        sn = np.sin(asr * _DW_X)
        bvn = float(np.dot(np.exp((sn * hk - hs) / (1.0 - sn * sn)), _DW_W))
        return bvn * asr / TWO_PI + norm_cdf(-h) * norm_cdf(-k)

    if r < 0.0:
        k = -k
        hk = -hk
    bvn = 0.0
    if abs(r) < 1.0:
        a_s = (1.0 - r) * (1.0 + r)
        a = math.sqrt(a_s)
        bs = (h - k) ** 2
        c = (4.0 - hk) / 8.0
        d = (12.0 - hk) / 80.0
        asr = -0.5 * (bs / a_s + hk)
        if asr > -100.0:
            bvn = a * math.exp(asr) * (1.0 - c * (bs - a_s) * (1.0 - d * bs) / 3.0 + c * d * a_s * a_s)
        if hk > -100.0:
            b = math.sqrt(bs)
            sp = math.sqrt(TWO_PI) * norm_cdf(-b / a)
            bvn -= math.exp(-0.5 * hk) * sp * b * (1.0 - c * bs * (1.0 - d * bs) / 3.0)
        a *= 0.5
        xs = (a * _DW_X) ** 2
        asr = -0.5 * (bs / xs + hk)
        keep = asr > -100.0
        xs = xs[keep]
        sp = 1.0 + c * xs * (1.0 + 5.0 * d * xs)
        rs = np.sqrt(1.0 - xs)
        ep = np.exp(-0.5 * hk * xs / (rs + 1.0) ** 2) / rs
        bvn = (a * float(np.dot(np.exp(asr[keep]) * (sp - ep), _DW_W[keep])) - bvn) / TWO_PI
    if r > 0.0:
        return bvn + norm_cdf(-max(h, k))
    if h >= k:
        return -bvn
    if h < 0.0:
        return norm_cdf(k) - norm_cdf(h) - bvn
    return norm_cdf(-h) - norm_cdf(-k) - bvn


def bivariate_norm_cdf(x, y, rho):
    """P(X <= x, Y <= y) for standard normals with correlation ``rho``.

    Gauss-Legendre quadrature (20 nodes) over the correlation parameter,
    following Genz's refinement of Drezner & Wesolowsky (1990). The
    independent and perfectly (anti)correlated cases are closed form.
    """
    if not (abs(rho) <= 1.0):
        raise DomainError(f"correlation must lie in [-1, 1], got {rho}")
    x = float(x)
    y = float(y)
    if math.isnan(x) or math.isnan(y):
        raise DomainError("bivariate_norm_cdf requires non-NaN limits")
    if x == -math.inf or y == -math.inf:
        return 0.0
    if x == math.inf:
        return norm_cdf(y) if math.isfinite(y) else 1.0
    if y == math.inf:
        return norm_cdf(x)
    if rho == 0.0:
        return norm_cdf(x) * norm_cdf(y)
    if rho == 1.0:
        return norm_cdf(min(x, y))
    if rho == -1.0:
        return max(0.0, norm_cdf(x) - norm_cdf(-y))
    p = _bvn_upper(-x, -y, rho)
    return min(1.0, max(0.0, p))


def validate_correlation(corr, tol=1e-12):
    corr = np.asarray(corr, dtype=float)
    if corr.ndim != 2 or corr.shape[0] != corr.shape[1]:
        raise DomainError("correlation matrix must be square")
    if not np.all(np.isfinite(corr)):
        raise DomainError("correlation matrix has non-finite entries")
    if np.max(np.abs(corr - corr.T), initial=0.0) > tol:
        raise DomainError("correlation matrix is not symmetric")
    if np.any(np.diag(corr) != 1.0):
        raise DomainError("correlation matrix must have unit diagonal")
    if np.any(np.abs(corr) > 1.0):
        raise DomainError("correlation entries must lie in [-1, 1]")
    return corr


def cholesky_lower(corr, tol=PIVOT_TOL):
    """Lower Cholesky factor of a PSD matrix.

    Pivots in ``[-tol, tol]`` are treated as exact zeros (the matrix is
    singular but still PSD); anything below ``-tol`` raises
    :class:`FactorizationError` carrying the failing pivot index.
    """
    a = np.asarray(corr, dtype=float)
    n = a.shape[0]
    L = np.zeros_like(a)
    for j in range(n):
        pivot = a[j, j] - np.dot(L[j, :j], L[j, :j])
        if pivot < -tol:
            raise FactorizationError(
                f"matrix is not positive semi-definite: pivot {j} = {pivot:.3e}", pivot=j
            )
        if pivot <= tol:
            # singular direction; rows below must not need it
            resid = a[j + 1:, j] - L[j + 1:, :j] @ L[j, :j]
            if np.any(np.abs(resid) > math.sqrt(tol)):
                raise FactorizationError(
                    f"matrix is not positive semi-definite: pivot {j} vanishes", pivot=j
                )
            continue
        d = math.sqrt(pivot)
        L[j, j] = d
        L[j + 1:, j] = (a[j + 1:, j] - L[j + 1:, :j] @ L[j, :j]) / d
    return L


def uniform_correlation(n, rho):
    """(1 - rho) I + rho J."""
    if n > 1 and not (-1.0 / (n - 1) <= rho <= 1.0):
        raise DomainError(f"uniform correlation {rho} is not valid for n={n}")
    c = np.full((n, n), float(rho))
    np.fill_diagonal(c, 1.0)
    return c


def uniform_cholesky(n, rho):
    """Closed-form Cholesky factor of the uniform correlation matrix.

    Every sub-diagonal entry of column k equals the same ``c_k``, which
    gives an O(n) recursion for the column values.
    """
    if n > 1 and not (-1.0 / (n - 1) - PIVOT_TOL <= rho <= 1.0):
        raise DomainError(f"uniform correlation {rho} is not valid for n={n}")
    L = np.zeros((n, n))
    used = 0.0  # sum of c_m**2 over earlier columns
    for k in range(n):
        pivot = 1.0 - used
        if pivot < -PIVOT_TOL:
            raise FactorizationError(f"pivot {k} = {pivot:.3e}", pivot=k)
        if pivot <= PIVOT_TOL:
            break
        d = math.sqrt(pivot)
        c = (rho - used) / d
        L[k, k] = d
        L[k + 1:, k] = c
        used += c * c
    return L


def implied_double_default_pd(pd_i, pd_j, rho):
    """Joint default probability implied by the Gaussian latent variable model."""
    for p in (pd_i, pd_j):
        if not (0.0 < p < 1.0):
            raise DomainError("default probabilities must lie in (0, 1)")
    return bivariate_norm_cdf(norm_inv(pd_i), norm_inv(pd_j), rho)


def default_correlation(pd_i, pd_j, pd_ij):
    """Pearson correlation of two default indicators."""
    for p in (pd_i, pd_j):
        if p <= 0.0 or p >= 1.0:
            raise DomainError("degenerate marginal default probability")
    if pd_ij < 0.0 or pd_ij > min(pd_i, pd_j) + 1e-15:
        raise DomainError("joint default probability exceeds a marginal")
    return (pd_ij - pd_i * pd_j) / math.sqrt(pd_i * (1.0 - pd_i) * pd_j * (1.0 - pd_j))


def merton_pd(asset, liability, sigma, mu=0.0, dt=1.0):
    """Merton default probability of a firm with assets ``asset`` and debt ``liability``."""
    if not (asset > 0 and liability > 0 and sigma > 0 and dt > 0):
        raise DomainError("merton_pd needs positive asset, liability, sigma and dt")
    d = (math.log(asset) - math.log(liability) + (mu - 0.5 * sigma * sigma) * dt) / (
        sigma * math.sqrt(dt)
    )
    return 1.0 - norm_cdf(d)


def merton_sigma(asset, capital, pd0, dt=1.0):
    """Asset volatility that makes ``merton_pd(asset, asset - capital, sigma)`` equal ``pd0``.

    Zero drift. With ``s = sigma * sqrt(dt)`` and ``z = norm_inv(1 - pd0)``
    the defining equation is the quadratic ``s**2 / 2 + z s - ln(A/B) = 0``,
    whose positive root is taken.
    """
    if not (asset > capital > 0):
        raise DomainError("merton_sigma needs asset > capital > 0")
    if not (0.0 < pd0 < 1.0):
        raise DomainError("merton_sigma needs 0 < pd0 < 1")
    z = -norm_inv(pd0)
    c = math.log(asset) - math.log(asset - capital)
    disc = z * z + 2.0 * c
    s = c * 2.0 / (z + math.sqrt(disc)) if z > 0 else -z + math.sqrt(disc)
    if not (s > 0.0) or not math.isfinite(s):
        raise CalibrationError(f"no positive volatility reproduces pd0={pd0}")
    return s / math.sqrt(dt)
