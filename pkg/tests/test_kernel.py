import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate, optimize

from pdmodel.kernel import (
    DomainError,
    FactorizationError,
    bivariate_norm_cdf,
    cholesky_lower,
    default_correlation,
    implied_double_default_pd,
    merton_pd,
    merton_sigma,
    norm_cdf,
    norm_inv,
    uniform_cholesky,
    uniform_correlation,
)

mpmath.mp.dps = 40


def mp_cdf(x):
    return float(mpmath.ncdf(mpmath.mpf(x)))


def mp_inv(p):
    """Bisection on the 40-digit CDF."""
    lo, hi = mpmath.mpf(-40), mpmath.mpf(40)
    target = mpmath.mpf(p)
    for _ in range(200):
        mid = (lo + hi) / 2
        if mpmath.ncdf(mid) < target:
            lo = mid
        else:
            hi = mid
    return float((lo + hi) / 2)


# -- univariate ---------------------------------------------------------------

def test_norm_cdf_symmetry():
    assert norm_cdf(0.0) == 0.5
    for x in (0.3, 1.7, 4.2):
        assert norm_cdf(x) + norm_cdf(-x) == pytest.approx(1.0, abs=1e-15)


@pytest.mark.parametrize("x", np.linspace(-8, 8, 33))
def test_norm_cdf_against_high_precision(x):
    assert abs(norm_cdf(x) - mp_cdf(x)) <= 1e-12


def test_norm_cdf_975():
    assert norm_cdf(1.959963985) == pytest.approx(0.975, abs=1e-9)


def test_norm_cdf_rejects_nonfinite():
    with pytest.raises(DomainError):
        norm_cdf(float("nan"))
    with pytest.raises(DomainError):
        norm_cdf(np.array([0.0, np.inf]))


def test_norm_inv_values():
    assert norm_inv(0.5) == 0.0
    assert norm_inv(norm_cdf(1.3)) == pytest.approx(1.3, abs=1e-10)
    # root of the 40-digit CDF
    assert norm_inv(0.001) == pytest.approx(mp_inv(0.001), abs=1e-12)
    assert norm_inv(0.001) == pytest.approx(-3.090232, abs=1e-6)


@pytest.mark.parametrize("p", [1e-300, 1e-12, 1e-6, 0.02, 0.02425, 0.3, 0.7, 0.97575, 0.99, 1 - 1e-10])
def test_norm_inv_against_high_precision(p):
    ref = mp_inv(p)
    assert norm_inv(p) == pytest.approx(ref, rel=1e-13, abs=1e-13)


@pytest.mark.parametrize("p", [0.0, 1.0, -0.1, 1.5, float("nan")])
def test_norm_inv_domain(p):
    with pytest.raises(DomainError):
        norm_inv(p)


def test_norm_inv_strictly_increasing():
    p = np.linspace(1e-6, 1 - 1e-6, 20001)
    assert np.all(np.diff(norm_inv(p)) > 0)


@given(st.floats(min_value=1e-12, max_value=1 - 1e-12))
def test_norm_inv_then_cdf(p):
    assert norm_cdf(norm_inv(p)) == pytest.approx(p, abs=1e-10)


# -- bivariate ----------------------------------------------------------------

def bvn_quadrature(x, y, rho):
    """Independent oracle: integrate the conditional normal over the first variable."""
    s = math.sqrt(1 - rho * rho)
    f = lambda u: math.exp(-0.5 * u * u) / math.sqrt(2 * math.pi) * mp_cdf((y - rho * u) / s)
    return integrate.quad(f, -np.inf, x, epsabs=1e-14, epsrel=1e-12, limit=200)[0]


@pytest.mark.parametrize("x,y,rho", [
    (0.0, 0.0, 0.5), (-1.0, 0.5, 0.3), (1.2, -0.7, -0.6), (-3.09, -3.09, 0.5),
    (-3.09, -3.09, 0.9), (2.0, 2.5, 0.95), (-2.0, 1.0, -0.97), (0.4, 0.1, 0.999),
    (-4.0, -3.5, 0.2), (1.0, 1.0, -0.3),
])
def test_bvn_against_quadrature(x, y, rho):
    assert bivariate_norm_cdf(x, y, rho) == pytest.approx(bvn_quadrature(x, y, rho), abs=1e-12)


def test_bvn_special_cases():
    for x, y in [(0.3, -1.1), (-2.0, 0.7)]:
        assert bivariate_norm_cdf(x, y, 0.0) == pytest.approx(norm_cdf(x) * norm_cdf(y), abs=1e-15)
        assert bivariate_norm_cdf(x, y, 1.0) == pytest.approx(norm_cdf(min(x, y)), abs=1e-15)
    assert bivariate_norm_cdf(0, 0, 0.5) == pytest.approx(1 / 3, abs=1e-9)


@pytest.mark.parametrize("rho", [1.0001, -1.5, float("nan")])
def test_bvn_domain(rho):
    with pytest.raises(DomainError):
        bivariate_norm_cdf(0.0, 0.0, rho)


finite = st.floats(min_value=-6, max_value=6)
corr = st.floats(min_value=-1, max_value=1)


@settings(max_examples=300)
@given(finite, finite, corr)
def test_bvn_frechet_and_symmetry(x, y, rho):
    p = bivariate_norm_cdf(x, y, rho)
    fx, fy = norm_cdf(x), norm_cdf(y)
    assert max(0.0, fx + fy - 1) - 1e-12 <= p <= min(fx, fy) + 1e-12
    assert p == pytest.approx(bivariate_norm_cdf(y, x, rho), abs=1e-14)


@settings(max_examples=100)
@given(finite, finite, st.floats(min_value=-0.99, max_value=0.98))
def test_bvn_monotone(x, y, rho):
    p = bivariate_norm_cdf(x, y, rho)
    assert bivariate_norm_cdf(x + 0.1, y, rho) >= p - 1e-13
    assert bivariate_norm_cdf(x, y + 0.1, rho) >= p - 1e-13
    assert bivariate_norm_cdf(x, y, rho + 0.01) >= p - 1e-13


# -- cholesky -----------------------------------------------------------------

def test_cholesky_identity_and_2x2():
    assert np.array_equal(cholesky_lower(np.eye(3)), np.eye(3))
    r = 0.37
    L = cholesky_lower(np.array([[1, r], [r, 1]]))
    assert np.allclose(L, [[1, 0], [r, math.sqrt(1 - r * r)]], atol=1e-15)


def test_cholesky_random_reconstruction():
    rng = np.random.default_rng(3)
    for _ in range(20):
        g = rng.normal(size=(5, 8))
        c = g @ g.T
        d = np.sqrt(np.diag(c))
        c = c / np.outer(d, d)
        np.fill_diagonal(c, 1.0)
        L = cholesky_lower(c)
        assert np.allclose(L, np.tril(L))
        assert np.all(np.diag(L) >= 0)
        assert np.max(np.abs(L @ L.T - c)) <= 1e-10


def test_cholesky_rejects_non_psd():
    c = np.array([[1, 0.9, -0.9], [0.9, 1, 0.9], [-0.9, 0.9, 1]])
    with pytest.raises(FactorizationError) as info:
        cholesky_lower(c)
    assert info.value.pivot == 2
    assert "pivot 2" in str(info.value)


def test_cholesky_singular_psd():
    c = uniform_correlation(4, 1.0)
    L = cholesky_lower(c)
    assert np.max(np.abs(L @ L.T - c)) <= 1e-10


@pytest.mark.parametrize("n,rho", [(1, 0.3), (5, 0.0), (35, 0.5), (10, 0.95), (6, -0.15), (4, 1.0)])
def test_uniform_cholesky_matches_general(n, rho):
    c = uniform_correlation(n, rho)
    L = uniform_cholesky(n, rho)
    assert np.max(np.abs(L @ L.T - c)) <= 1e-10
    if rho < 1:
        assert np.allclose(L, cholesky_lower(c), atol=1e-12)


def test_principal_submatrix_stays_valid():
    rng = np.random.default_rng(9)
    g = rng.normal(size=(6, 10))
    c = g @ g.T
    d = np.sqrt(np.diag(c))
    c /= np.outer(d, d)
    np.fill_diagonal(c, 1.0)
    keep = [0, 2, 5]
    sub = c[np.ix_(keep, keep)]
    L = cholesky_lower(sub)
    assert np.max(np.abs(L @ L.T - sub)) <= 1e-10


def test_cholesky_sample_correlation():
    L = uniform_cholesky(2, 0.6)
    z = np.random.default_rng(0).standard_normal((1_000_000, 2))
    x = z @ L.T
    assert abs(np.corrcoef(x.T)[0, 1] - 0.6) < 0.01


# -- double default and default correlation ----------------------------------

def test_implied_double_default_limits():
    assert implied_double_default_pd(0.02, 0.05, 0.0) == pytest.approx(0.001, abs=1e-15)
    assert implied_double_default_pd(0.001, 0.001, 1.0) == pytest.approx(0.001, abs=1e-15)


def test_implied_double_default_quadrature():
    q = norm_inv(0.001)
    s = math.sqrt(1 - 0.25)
    dens = lambda v, u: math.exp(-(u * u - 2 * 0.5 * u * v + v * v) / (2 * 0.75)) / (2 * math.pi * s)
    ref = integrate.dblquad(dens, -12, q, -12, q, epsabs=1e-15, epsrel=1e-11)[0]
    got = implied_double_default_pd(0.001, 0.001, 0.5)
    assert got == pytest.approx(ref, rel=1e-8)
    assert got <= 0.001


def test_default_correlation():
    assert default_correlation(0.1, 0.2, 0.02) == pytest.approx(0.0, abs=1e-15)
    assert default_correlation(0.3, 0.3, 0.3) == pytest.approx(1.0)
    r = default_correlation(0.001, 0.001, implied_double_default_pd(0.001, 0.001, 0.5))
    assert 0 < r < 0.5
    with pytest.raises(DomainError):
        default_correlation(0.0, 0.1, 0.0)
    with pytest.raises(DomainError):
        default_correlation(1.0, 0.1, 0.1)


# -- Merton -------------------------------------------------------------------

def test_merton_pd_basics():
    s = 0.2
    assert merton_pd(100, 100, s, mu=0.5 * s * s) == pytest.approx(0.5, abs=1e-15)
    assert merton_pd(1e12, 1.0, 0.1) == pytest.approx(0.0, abs=1e-300)
    assert merton_pd(200, 150, 0.0918) == pytest.approx(0.001, rel=0.01)
    assert merton_pd(200, 150, 0.1) < merton_pd(190, 150, 0.1) < merton_pd(190, 160, 0.1)
    assert merton_pd(200, 150, 0.05) < merton_pd(200, 150, 0.06)
    with pytest.raises(DomainError):
        merton_pd(-1, 1, 0.1)


def test_merton_sigma_value_and_bisection():
    s = merton_sigma(200, 50, 0.001)
    bis = optimize.brentq(lambda v: merton_pd(200, 150, v) - 0.001, 1e-4, 0.2, xtol=1e-15)
    assert s == pytest.approx(bis, abs=1e-12)
    assert s == pytest.approx(0.0918, abs=1e-4)
    assert merton_pd(200, 150, s) == pytest.approx(0.001, abs=1e-10)


def test_merton_sigma_small_capital_limit():
    sig = [merton_sigma(200, e, 0.001) for e in (1.0, 1e-3, 1e-6)]
    assert sig[0] > sig[1] > sig[2] > 0
    assert sig[2] < 1e-8


@pytest.mark.parametrize("args", [(100, 100, 0.01), (100, 0, 0.01), (100, 10, 0.0), (100, 10, 1.0)])
def test_merton_sigma_domain(args):
    with pytest.raises(DomainError):
        merton_sigma(*args)


@settings(max_examples=200)
@given(st.floats(min_value=1e-4, max_value=0.2), st.floats(min_value=0.01, max_value=0.5))
def test_merton_round_trip(pd0, frac):
    A = 1000.0
    s = merton_sigma(A, frac * A, pd0)
    assert merton_pd(A, A - frac * A, s) == pytest.approx(pd0, abs=1e-10)
