import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from nrayleigh.analytic import (
    ConvergenceError,
    DimensionError,
    QuadratureConfig,
    UndefinedAFDError,
    afd,
    afd_approx,
    amplitude_u,
    cdf_mellin_barnes,
    cdf_product,
    exponent_h,
    hessian_matrix,
    laplace_internals,
    lcr_approx,
    lcr_exact,
    lcr_exact_mc,
    multihop_lcr_approx,
    rayleigh_lcr,
)
from nrayleigh.model import ProductParams, cascade_to_product, hops_from_stations

SQRT_2PI = math.sqrt(2 * math.pi)
mpmath.mp.dps = 30


def rayleigh_pdf(x, omega):
    return 2 * x / omega * np.exp(-x * x / omega)


def lcr_two_branch_oracle(p, y):
    """Rice's formula with X2 = y / X1 integrated out in x-space."""
    (o1, o2), (f1, f2) = p.branch_powers, p.branch_dopplers
    s1, s2 = math.pi**2 * o1 * f1**2, math.pi**2 * o2 * f2**2

    def g(x):
        sig = math.sqrt(s1 * y * y / (x * x) + s2 * x * x)
        return rayleigh_pdf(x, o1) * rayleigh_pdf(y / x, o2) / x * sig / SQRT_2PI

    peak = math.sqrt(y) * (o1 / o2) ** 0.25
    pts = [peak * k for k in (1e-3, 1e-2, 0.1, 0.5, 1, 2, 10, 100)]
    total = math.fsum(integrate.quad(g, a, b, epsabs=0, epsrel=1e-12, limit=200)[0]
                      for a, b in zip([0.0] + pts, pts))
    return total + integrate.quad(g, pts[-1], np.inf, epsabs=0, epsrel=1e-12)[0]


def lcr_three_branch_oracle(p, y):
    o, f = p.branch_powers, p.branch_dopplers
    s = [math.pi**2 * oi * fi**2 for oi, fi in zip(o, f)]

    def g(x2, x1):
        prod = x1 * x2
        sig = math.sqrt(y * y * (s[0] / x1**2 + s[1] / x2**2) + s[2] * prod * prod)
        return (rayleigh_pdf(x1, o[0]) * rayleigh_pdf(x2, o[1]) * rayleigh_pdf(y / prod, o[2])
                / prod * sig / SQRT_2PI)

    hi1, hi2 = 8 * math.sqrt(o[0]), 8 * math.sqrt(o[1])
    return integrate.dblquad(g, 0, hi1, 0, hi2, epsabs=0, epsrel=1e-9)[0]


# -- N = 1 -----------------------------------------------------------------


@pytest.mark.parametrize("rho", [0.1, 1.0, 3.0])
def test_single_branch_reduction(rho):
    omega, f = 2.5, 40.0
    y = rho * math.sqrt(omega)
    ref = SQRT_2PI * f * rho * math.exp(-rho * rho)
    p = ProductParams((omega,), (f,))
    assert lcr_approx(p, y) == pytest.approx(ref, rel=1e-12)
    assert lcr_exact(p, y) == pytest.approx(ref, rel=1e-6)
    assert rayleigh_lcr(omega, f, y) == pytest.approx(ref, rel=1e-14)


# -- exact LCR ---------------------------------------------------------------


def test_two_branch_frozen_values():
    p = ProductParams.iid(2)
    assert lcr_exact(p, 1.0) == pytest.approx(0.8886597467516455, rel=1e-7)
    assert lcr_exact(p, 0.1) == pytest.approx(0.601120968319105, rel=1e-7)


@pytest.mark.parametrize("y", [0.05, 0.3, 1.0, 2.0])
@pytest.mark.parametrize("powers,dopplers", [((1.0, 1.0), (1.0, 1.0)), ((0.3, 4.0), (2.0, 0.5)), ((5.0, 0.2), (1.0, 0.0))])
def test_two_branch_against_oracle(powers, dopplers, y):
    p = ProductParams(powers, dopplers)
    assert lcr_exact(p, y, QuadratureConfig(rel_tol=1e-9)) == pytest.approx(lcr_two_branch_oracle(p, y), rel=1e-7)


@pytest.mark.parametrize("y", [0.2, 1.0])
def test_three_branch_against_oracle(y):
    p = ProductParams((1.0, 2.0, 0.5), (1.0, 0.7, 1.3))
    assert lcr_exact(p, y) == pytest.approx(lcr_three_branch_oracle(p, y), rel=1e-6)


@pytest.mark.parametrize("n", [2, 3, 4])
def test_importance_sampler_agrees_with_cubature(n):
    p = ProductParams(tuple(np.linspace(0.5, 2.0, n)), tuple(np.linspace(1.0, 3.0, n)))
    y = 0.7
    est = lcr_exact_mc(p, y, QuadratureConfig(mc_samples=400_000), seed=3)
    assert abs(est.value - lcr_exact(p, y)) < 4 * est.stderr
    assert est.stderr < 0.01 * est.value


def test_importance_sampler_is_seeded():
    p = ProductParams.iid(5)
    cfg = QuadratureConfig(mc_samples=50_000)
    assert lcr_exact_mc(p, 1.0, cfg, seed=9) == lcr_exact_mc(p, 1.0, cfg, seed=9)
    assert lcr_exact_mc(p, 1.0, cfg, seed=9) != lcr_exact_mc(p, 1.0, cfg, seed=10)


def test_cubature_dimension_limit():
    with pytest.raises(DimensionError):
        lcr_exact(ProductParams.iid(5), 1.0)


def test_cubature_reports_nonconvergence():
    with pytest.raises(ConvergenceError):
        lcr_exact(ProductParams((1.0, 3.0, 0.2, 7.0), (1.0, 2.0, 0.5, 1.0)), 0.01,
                  QuadratureConfig(rel_tol=1e-12, max_depth=1))


def test_zero_doppler_gives_zero_rate():
    p = ProductParams((1.0, 1.0), (0.0, 0.0))
    assert lcr_exact(p, 1.0) == 0.0
    assert lcr_approx(p, 1.0) == 0.0


def test_invalid_threshold():
    for bad in (0.0, -1.0):
        with pytest.raises(ValueError):
            lcr_exact(ProductParams.iid(2), bad)
        with pytest.raises(ValueError):
            lcr_approx(ProductParams.iid(2), bad)


# -- Laplace approximation -------------------------------------------------


def random_params(n, rng):
    return ProductParams(tuple(rng.uniform(0.2, 5.0, n)), tuple(rng.uniform(0.5, 3.0, n)))


@pytest.mark.parametrize("n", [2, 3, 4, 6])
def test_critical_point_is_stationary(n, rng):
    p = random_params(n, rng)
    y = 0.8
    x = np.array(laplace_internals(p, y).critical_point)
    om = np.array(p.branch_powers)
    prod_sq = np.prod(x**2)
    grad = -2 * y * y / (om[-1] * prod_sq * x) + 2 * x / om[:-1]
    assert np.max(np.abs(grad)) <= 1e-6


@pytest.mark.parametrize("n", [2, 3, 5])
def test_hessian_matches_finite_differences(n, rng):
    p = random_params(n, rng)
    y = 1.3
    x = np.array(laplace_internals(p, y).critical_point)
    h = 1e-4
    num = np.empty((n - 1, n - 1))
    for i in range(n - 1):
        for j in range(n - 1):
            def at(di, dj):
                z = x.copy()
                z[i] += di
                z[j] += dj
                return exponent_h(p, y, z)
            num[i, j] = (at(h, h) - at(h, -h) - at(-h, h) + at(-h, -h)) / (4 * h * h)
    np.testing.assert_allclose(num, hessian_matrix(p), rtol=1e-5)


@pytest.mark.parametrize("n", [2, 3, 4, 7])
def test_hessian_determinant(n, rng):
    p = random_params(n, rng)
    li = laplace_internals(p, 1.0)
    assert np.linalg.det(hessian_matrix(p)) == pytest.approx(li.hessian_det, rel=1e-12)


def test_hessian_eigenvalues_equal_powers():
    n, omega = 4, 2.0
    ev = np.sort(np.linalg.eigvalsh(hessian_matrix(ProductParams.iid(n, omega))))
    np.testing.assert_allclose(ev, [4 / omega] * (n - 2) + [4 * n / omega], rtol=1e-12)


def test_internal_values_at_critical_point():
    p = ProductParams((1.0, 2.0, 3.0), (1.0, 2.0, 2.0))
    y = 0.6
    li = laplace_internals(p, y)
    assert exponent_h(p, y, li.critical_point) == pytest.approx(li.h_at_crit, rel=1e-12)
    assert amplitude_u(p, y, li.critical_point) == pytest.approx(li.u_at_crit, rel=1e-12)


@settings(max_examples=60, deadline=None)
@given(
    st.lists(st.floats(0.05, 20.0), min_size=2, max_size=6),
    st.floats(0.01, 10.0),
)
def test_closed_form_assembles_laplace_terms(powers, y):
    n = len(powers)
    p = ProductParams(tuple(powers), tuple(np.linspace(1.0, 2.0, n)))
    li = laplace_internals(p, y)
    sig_n = math.sqrt(p.deriv_variances()[-1])
    om_n = p.branch_powers[-1]
    # sigma_N / sqrt(2 pi) * 2^N y / (Phi/Omega_N) / Omega_N * U * exp(-h) * (2 pi)^((N-1)/2) / sqrt(det A)
    assembled = (sig_n / SQRT_2PI * 2**n * y / p.total_phi() * li.u_at_crit
                 * math.exp(-li.h_at_crit) * (2 * math.pi) ** ((n - 1) / 2) / math.sqrt(li.hessian_det))
    assert om_n > 0
    if assembled > 1e-290:
        assert lcr_approx(p, y) == pytest.approx(assembled, rel=1e-10)


def test_approx_underflow_returns_zero():
    assert lcr_approx(ProductParams.iid(2), 1e4) == 0.0


def test_multihop_closed_form():
    hops = hops_from_stations([100.0] * 5 + [0.0], 1.0, 0.1)
    p = cascade_to_product(hops)
    y = 0.5
    mean_f2 = 9e4 / 5
    ref = math.sqrt(mean_f2) * (2 * math.pi) ** 2.5 * y / math.sqrt(p.total_phi()) * math.exp(
        -5 * (y * y / p.total_phi()) ** 0.2)
    assert multihop_lcr_approx(hops, y) == pytest.approx(ref, rel=1e-12)


@pytest.mark.parametrize("n", [2, 3])
def test_laplace_converges_at_high_threshold(n):
    # the closed form tightens as the threshold grows
    p = ProductParams.iid(n)
    errs = [abs(lcr_approx(p, y) / lcr_exact(p, y) - 1) for y in (0.1, 0.5, 1.8)]
    assert errs[0] > errs[1] > errs[2]
    assert errs[2] < 0.05


# -- invariances -------------------------------------------------------------


@pytest.mark.parametrize("order", [(1, 0, 2), (2, 1, 0), (2, 0, 1)])
def test_permutation_invariance(order):
    p = ProductParams((0.5, 1.0, 3.0), (1.0, 2.0, 0.5))
    q = p.permuted(order)
    assert lcr_approx(q, 0.9) == lcr_approx(p, 0.9)
    assert lcr_exact(q, 0.9) == pytest.approx(lcr_exact(p, 0.9), rel=2e-6)


@pytest.mark.parametrize("c", [0.5, 2.0])
def test_scaling_invariance(c):
    p = ProductParams((0.5, 1.0, 3.0), (1.0, 2.0, 0.5))
    q = p.scaled(c)
    y, yc = 0.9, 0.9 * c**3
    assert lcr_approx(q, yc) == pytest.approx(lcr_approx(p, y), rel=1e-12)
    assert lcr_exact(q, yc) == pytest.approx(lcr_exact(p, y), rel=2e-6)
    assert cdf_product(q, yc) == pytest.approx(cdf_product(p, y), rel=1e-9)


# -- CDF ---------------------------------------------------------------------


@pytest.mark.parametrize("y", [1e-3, 0.1, 0.5, 1.0, 2.0, 4.0])
def test_cdf_single_and_two_branch_closed_forms(y):
    assert cdf_product(ProductParams((2.0,), (1.0,)), y) == pytest.approx(-math.expm1(-y * y / 2), rel=1e-12)
    # P(E1 E2 <= z) = 1 - 2 sqrt(z) K1(2 sqrt(z))
    r = 2 * mpmath.sqrt(mpmath.mpf(y) ** 2)
    ref = float(1 - r * mpmath.besselk(1, r))
    assert cdf_product(ProductParams.iid(2), y) == pytest.approx(ref, rel=1e-7)


@pytest.mark.parametrize("n", [2, 3, 4, 5, 6])
@pytest.mark.parametrize("y", [0.05, 0.3, 1.0, 3.0])
def test_cdf_matches_mellin_barnes(n, y):
    p = ProductParams.iid(n)
    mb = cdf_mellin_barnes(p, y)
    assert cdf_product(p, y) == pytest.approx(mb, rel=1e-7, abs=1e-10)


def test_cdf_against_sampling(rng):
    n, m = 3, 10**6
    samples = np.prod(np.sqrt(rng.standard_exponential((m, n))), axis=1)
    p = ProductParams.iid(n)
    for y in (0.1, 0.3, 0.6, 1.2):
        assert cdf_product(p, y) == pytest.approx(np.mean(samples <= y), abs=3e-3)


def test_cdf_monotone_and_bounded():
    p = ProductParams.iid(4, 3.0)
    ys = np.geomspace(1e-4, 100, 60)
    vals = [cdf_product(p, y) for y in ys]
    assert 0 < vals[0] < 1e-6 and vals[-1] > 0.9999
    assert cdf_product(p, 1e6) == 1.0
    assert all(b >= a for a, b in zip(vals, vals[1:]))
    assert cdf_product(p, 0.0) == 0.0
    with pytest.raises(ValueError):
        cdf_product(p, -1.0)


# -- AFD ---------------------------------------------------------------------


def test_single_branch_afd():
    omega, f, rho = 1.0, 10.0, 0.5
    ref = math.expm1(rho * rho) / (SQRT_2PI * f * rho)
    p = ProductParams((omega,), (f,))
    assert afd_approx(p, rho) == pytest.approx(ref, rel=1e-9)
    assert afd(p, rho, lcr_mode="exact") == pytest.approx(ref, rel=1e-6)


def test_afd_is_cdf_over_lcr():
    p = ProductParams.iid(3, 1.0, 2.0)
    y = 0.4
    assert afd(p, y, lcr_mode="exact") == pytest.approx(cdf_product(p, y) / lcr_exact(p, y), rel=1e-12)
    with pytest.raises(ValueError):
        afd(p, y, lcr_mode="both")


def test_afd_undefined():
    with pytest.raises(UndefinedAFDError):
        afd_approx(ProductParams.iid(2), 1e4)
    with pytest.raises(UndefinedAFDError):
        afd_approx(ProductParams((1.0, 1.0), (0.0, 0.0)), 1.0)
