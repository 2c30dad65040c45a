"""Exact and approximate LCR, AFD and CDF of the N*Rayleigh process.

The exact level crossing rate is an (N-1)-dimensional integral over the
first N-1 envelopes, with the last envelope and the Gaussian derivative
integrated out in closed form. Two evaluators are provided: deterministic
cubature in log coordinates (N <= 4) and importance sampling with the
Rayleigh densities as proposal (any N).

The closed-form approximation comes from expanding the exponent of that
integral around its unique interior minimum (Laplace's method with
lambda = 1).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import NamedTuple, Sequence

import numpy as np
from scipy import integrate, special
from scipy.interpolate import CubicSpline

from nrayleigh.model import HopSpec, ProductParams, cascade_to_product

SQRT_2PI = math.sqrt(2.0 * math.pi)
LCR_FLOOR = 1e-300
MAX_CUBATURE_BRANCHES = 4

# integrand is cut where the exponent sits this far below its minimum
_TRUNCATION_MARGIN = 80.0
_MC_BATCH = 1 << 17


class ConvergenceError(RuntimeError):
    pass


class DimensionError(ValueError):
    pass


class UndefinedAFDError(ArithmeticError):
    """Raised when the LCR at a threshold is zero, so the AFD is undefined."""


@dataclass(frozen=True)
class QuadratureConfig:
    rel_tol: float = 1e-6
    max_depth: int = 12
    mc_samples: int = 10**6

    def __post_init__(self):
        if not 0 < self.rel_tol <= 0.1:
            raise ValueError(f"rel_tol must lie in (0, 0.1], got {self.rel_tol}")
        if self.max_depth < 1:
            raise ValueError("max_depth must be >= 1")
        if self.mc_samples < 10**4:
            raise ValueError("mc_samples must be >= 1e4")

    @property
    def max_subdivisions(self) -> int:
        return 2**self.max_depth


@dataclass(frozen=True)
class LaplaceInternals:
    critical_point: tuple[float, ...]
    hessian_det: float
    u_at_crit: float
    h_at_crit: float


class MCEstimate(NamedTuple):
    value: float
    stderr: float


def _check_threshold(y: float) -> float:
    y = float(y)
    if not y > 0:
        raise ValueError(f"threshold must be positive, got {y}")
    return y


def rayleigh_lcr(omega: float, f: float, y: float) -> float:
    """Classic single-Rayleigh LCR, sqrt(2 pi) f (y/sqrt(omega)) exp(-y^2/omega)."""
    rho = y / math.sqrt(omega)
    return SQRT_2PI * f * rho * math.exp(-rho * rho)


def rayleigh_cdf(omega: float, y: float) -> float:
    return -math.expm1(-y * y / omega)


# ---------------------------------------------------------------------------
# Laplace approximation
# ---------------------------------------------------------------------------


def exponent_h(params: ProductParams, y: float, x: Sequence[float]) -> float:
    """Exponent of the LCR integrand, y^2/(Omega_N prod x^2) + sum x^2/Omega_i."""
    om = params.branch_powers
    x = [float(v) for v in x]
    prod_sq = math.prod(v * v for v in x)
    return y * y / (om[-1] * prod_sq) + math.fsum(v * v / o for v, o in zip(x, om[:-1]))


def amplitude_u(params: ProductParams, y: float, x: Sequence[float]) -> float:
    """Square-root factor of the LCR integrand (derivative std over sigma_N)."""
    s2 = params.deriv_variances()
    x = [float(v) for v in x]
    prod_sq = math.prod(v * v for v in x)
    ratio = math.fsum(s / s2[-1] / (v * v) for s, v in zip(s2[:-1], x))
    return math.sqrt(1.0 + y * y / prod_sq * ratio)


def hessian_matrix(params: ProductParams) -> np.ndarray:
    """Hessian of the exponent at the critical point: 8/Omega_i on the
    diagonal, 4/sqrt(Omega_i Omega_j) off it. Independent of the threshold."""
    om = np.asarray(params.branch_powers[:-1])
    inv_sqrt = 1.0 / np.sqrt(om)
    a = 4.0 * np.outer(inv_sqrt, inv_sqrt)
    a[np.diag_indices_from(a)] = 8.0 / om
    return a


def laplace_internals(params: ProductParams, y: float) -> LaplaceInternals:
    y = _check_threshold(y)
    n = params.n
    if n < 2:
        raise DimensionError("Laplace internals need at least two branches")
    om = params.branch_powers
    log_phi = params.log_phi()
    # x_i = y^(1/N) sqrt(Omega_i) / Phi^(1/(2N))
    base = math.exp(math.log(y) / n - log_phi / (2 * n))
    crit = tuple(base * math.sqrt(o) for o in om[:-1])
    # det A = prod of eigenvalues 4/Omega_i (i < N-1) and 4N/Omega_{N-1}
    det = 4.0 ** (n - 1) * n / math.prod(om[:-1])
    f = params.branch_dopplers
    if f[-1] > 0:
        u = math.sqrt(1.0 + math.fsum(fi * fi for fi in f[:-1]) / (f[-1] * f[-1]))
    else:
        u = math.inf
    h = n * math.exp((2.0 * math.log(y) - log_phi) / n)
    return LaplaceInternals(crit, det, u, h)


def lcr_approx(params: ProductParams, y: float) -> float:
    """Closed-form Laplace approximation of the N*Rayleigh LCR.

    ``sqrt(mean f_i^2) (2 pi)^(N/2) y / sqrt(Phi) exp(-N (y^2/Phi)^(1/N))``.
    Values below 1e-300 are returned as 0.
    """
    y = _check_threshold(y)
    n = params.n
    mean_f2 = math.fsum(f * f for f in params.branch_dopplers) / n
    if mean_f2 == 0.0:
        return 0.0
    log_phi = params.log_phi()
    log_val = (
        0.5 * math.log(mean_f2)
        + 0.5 * n * math.log(2.0 * math.pi)
        + math.log(y)
        - 0.5 * log_phi
        - n * math.exp((2.0 * math.log(y) - log_phi) / n)
    )
    if log_val < math.log(LCR_FLOOR):
        return 0.0
    return math.exp(log_val)


def multihop_lcr_approx(hops: Sequence[HopSpec], alpha: float) -> float:
    """Approximate LCR of the end-to-end fading amplitude of a relay chain."""
    return lcr_approx(cascade_to_product(hops), alpha)


# ---------------------------------------------------------------------------
# Exact LCR
# ---------------------------------------------------------------------------


def lcr_exact(params: ProductParams, y: float, cfg: QuadratureConfig = QuadratureConfig()) -> float:
    """Exact LCR by adaptive cubature (N <= 4).

    With x_i = exp(u_i) the integral runs over R^(N-1); it is truncated to
    the box outside which the exponent exceeds its minimum by a fixed
    margin, then handed to a Gauss-Kronrod tensor cubature.
    """
    y = _check_threshold(y)
    n = params.n
    om = np.asarray(params.branch_powers)
    f = np.asarray(params.branch_dopplers)
    if n == 1:
        return rayleigh_lcr(om[0], f[0], y)
    if n > MAX_CUBATURE_BRANCHES:
        raise DimensionError(
            f"deterministic cubature is limited to N <= {MAX_CUBATURE_BRANCHES}; use lcr_exact_mc"
        )
    if not np.any(f > 0):
        return 0.0

    s2 = np.pi**2 * om * f**2
    log_phi = params.log_phi()
    t = math.exp((2.0 * math.log(y) - log_phi) / n)
    h_min = n * t
    a0 = y * y / om[-1]
    om_head, s2_head, s2_last = om[:-1], s2[:-1], s2[-1]

    def integrand(u):
        x2 = np.exp(2.0 * u)
        prod_sq = np.exp(2.0 * np.sum(u, axis=-1))
        var = s2_last + (y * y / prod_sq) * np.sum(s2_head / x2, axis=-1)
        expo = -(a0 / prod_sq + np.sum(x2 / om_head, axis=-1)) + np.sum(u, axis=-1) + h_min
        return np.sqrt(var) * np.exp(expo)

    cap = h_min + _TRUNCATION_MARGIN
    hi = 0.5 * np.log(om_head * cap)
    lo = 0.5 * (math.log(a0 / cap) - (2.0 * hi.sum() - 2.0 * hi))
    res = integrate.cubature(
        integrand, lo, hi, rtol=cfg.rel_tol, atol=0.0, max_subdivisions=cfg.max_subdivisions
    )
    if res.status != "converged":
        raise ConvergenceError(
            f"LCR cubature did not reach rel_tol={cfg.rel_tol} within "
            f"{cfg.max_subdivisions} subdivisions (y={y}, N={n})"
        )
    log_pref = n * math.log(2.0) + math.log(y) - log_phi - 0.5 * math.log(2.0 * math.pi) - h_min
    return float(math.exp(log_pref) * res.estimate)


def lcr_exact_mc(
    params: ProductParams, y: float, cfg: QuadratureConfig = QuadratureConfig(), seed: int = 0
) -> MCEstimate:
    """Importance-sampled exact LCR with standard error.

    The first N-1 envelopes are drawn from their Rayleigh laws; each draw
    contributes sigma(x)/sqrt(2 pi) * f_{X_N}(y/P)/P with P = prod x_i and
    sigma(x) the conditional std of the derivative of Y.
    """
    y = _check_threshold(y)
    n = params.n
    om = np.asarray(params.branch_powers)
    f = np.asarray(params.branch_dopplers)
    if n == 1:
        return MCEstimate(rayleigh_lcr(om[0], f[0], y), 0.0)
    if not np.any(f > 0):
        return MCEstimate(0.0, 0.0)
    s2 = np.pi**2 * om * f**2
    rng = np.random.default_rng(seed)
    sums, sumsq = [], []
    remaining = cfg.mc_samples
    while remaining > 0:
        m = min(_MC_BATCH, remaining)
        remaining -= m
        x = np.sqrt(om[:-1] * rng.standard_exponential((m, n - 1)))
        p = np.prod(x, axis=1)
        sigma = np.sqrt(y * y * np.sum(s2[:-1] / x**2, axis=1) + s2[-1] * p * p)
        r = y / p
        pdf_last = 2.0 * r / om[-1] * np.exp(-r * r / om[-1])
        w = sigma / SQRT_2PI * pdf_last / p
        sums.append(w.sum())
        sumsq.append(np.dot(w, w))
    total = cfg.mc_samples
    mean = math.fsum(sums) / total
    var = max(math.fsum(sumsq) / total - mean * mean, 0.0)
    return MCEstimate(mean, math.sqrt(var / total))


# ---------------------------------------------------------------------------
# CDF of the product
# ---------------------------------------------------------------------------
#
# P(Y <= y) = P(E_1 ... E_N <= y^2/Phi) with E_i iid unit exponentials. In
# w = ln z the recursion F_k(w) = int g(v) F_{k-1}(w - v) dv holds with
# g(v) = exp(v - e^v), the density of ln E. Levels below N are tabulated
# once on a fine w grid (log F, cubic spline); the last level is integrated
# adaptively at the requested point.

_W_LO = -120.0
_W_STEP = 0.02
_V_HI = 4.5  # g(4.5) ~ 1e-37
_TABLE_EPSREL = 1e-10


def _w_hi(k: int) -> float:
    # 1 - F_k(e^w) ~ exp(-k e^(w/k)) is far below double precision here
    return 5.0 * k + 10.0


def _log_density_ln_exp(v):
    return v - np.exp(v)


class _LogCdfInterpolant:
    def __init__(self, w: np.ndarray, log_f: np.ndarray):
        self.w = w
        self.spline = CubicSpline(w, log_f)
        self.w_lo, self.w_hi = w[0], w[-1]
        self.left = log_f[0]
        self.left_slope = float(self.spline(w[0], 1))

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        inside = np.clip(x, self.w_lo, self.w_hi)
        out = np.minimum(self.spline(inside), 0.0)
        out = np.where(x > self.w_hi, 0.0, out)
        return np.where(x < self.w_lo, self.left + self.left_slope * (x - self.w_lo), out)


@lru_cache(maxsize=None)
def _log_cdf_table(k: int) -> _LogCdfInterpolant:
    w = np.arange(_W_LO, _w_hi(k) + 0.5 * _W_STEP, _W_STEP)
    if k == 1:
        return _LogCdfInterpolant(w, np.log(-np.expm1(-np.exp(w))))
    prev = _log_cdf_table(k - 1)
    scale = prev(w)

    def integrand(v):
        return np.exp(_log_density_ln_exp(v) + prev(w - v) - scale)

    ratio, _ = integrate.quad_vec(
        integrand, _W_LO - 40.0, _V_HI, epsabs=0.0, epsrel=_TABLE_EPSREL, norm="max", limit=20000
    )
    return _LogCdfInterpolant(w, scale + np.log(ratio))


def _unit_exp_product_cdf(n: int, z: float, cfg: QuadratureConfig) -> float:
    if z <= 0.0:
        return 0.0
    if n == 1:
        return -math.expm1(-z)
    w = math.log(z)
    if w > _w_hi(n):
        return 1.0
    if n == 2:
        def prev(x):
            return np.log(-np.expm1(-np.exp(x)))
    else:
        prev = _log_cdf_table(n - 1)

    def integrand(v):
        return float(np.exp(_log_density_ln_exp(v) + prev(w - v)))

    v_lo = min(w, 0.0) - 60.0
    out = integrate.quad(
        integrand,
        v_lo,
        _V_HI,
        points=[min(max(w, v_lo + 1.0), _V_HI - 1.0), 0.0],
        epsabs=0.0,
        epsrel=cfg.rel_tol,
        limit=cfg.max_subdivisions,
        full_output=1,
    )
    if len(out) > 3:
        raise ConvergenceError(f"CDF quadrature failed at z={z}: {out[3]}")
    return out[0]


def cdf_product(params: ProductParams, y: float, cfg: QuadratureConfig = QuadratureConfig()) -> float:
    """P(Y <= y) for the product of N independent Rayleigh envelopes."""
    y = float(y)
    if y < 0:
        raise ValueError(f"threshold must be nonnegative, got {y}")
    if y == 0.0:
        return 0.0
    z = math.exp(2.0 * math.log(y) - params.log_phi())
    return min(max(_unit_exp_product_cdf(params.n, z, cfg), 0.0), 1.0)


def cdf_mellin_barnes(params: ProductParams, y: float, c: float = 0.5) -> float:
    """CDF by the vertical-contour integral of Gamma(1-s)^N z^s / s.

    Cross-check only; loses relative accuracy when the CDF is tiny.
    """
    y = _check_threshold(y)
    n = params.n
    log_z = 2.0 * math.log(y) - params.log_phi()

    def integrand(t):
        s = complex(c, t)
        return (np.exp(n * special.loggamma(1.0 - s) + s * log_z) / s).real

    val, _ = integrate.quad(integrand, 0.0, np.inf, epsabs=1e-13, epsrel=1e-11, limit=2000)
    return val / math.pi


# ---------------------------------------------------------------------------
# AFD
# ---------------------------------------------------------------------------


def afd(
    params: ProductParams,
    y: float,
    cfg: QuadratureConfig = QuadratureConfig(),
    lcr_mode: str = "approx",
) -> float:
    """Average fade duration F_Y(y) / N_Y(y).

    ``lcr_mode`` picks the closed-form LCR ("approx") or the cubature
    ("exact", N <= 4).
    """
    y = _check_threshold(y)
    if lcr_mode == "approx":
        rate = lcr_approx(params, y)
    elif lcr_mode == "exact":
        rate = lcr_exact(params, y, cfg)
    else:
        raise ValueError(f"lcr_mode must be 'exact' or 'approx', got {lcr_mode!r}")
    if not rate > 0:
        raise UndefinedAFDError(f"AFD undefined at this threshold (y={y}): LCR is zero")
    return cdf_product(params, y, cfg) / rate


def afd_approx(params: ProductParams, y: float, cfg: QuadratureConfig = QuadratureConfig()) -> float:
    return afd(params, y, cfg, "approx")
