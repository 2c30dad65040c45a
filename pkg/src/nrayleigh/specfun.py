"""Special functions used by the relay-gain and CDF formulas."""

import math

EULER_GAMMA = 0.57721566490153286061

_SERIES_CUTOFF = 1.0
_EPS = 1e-16
_FPMIN = 1e-300
_MAXIT = 500


def _e1_series(x: float) -> float:
    # E1(x) = -gamma - ln x - sum_{k>=1} (-x)^k / (k k!)
    total = 0.0
    term = 1.0
    for k in range(1, _MAXIT):
        term *= -x / k
        contrib = term / k
        total += contrib
        if abs(contrib) < _EPS * abs(total):
            break
    return -EULER_GAMMA - math.log(x) - total


def _e1_continued_fraction(x: float) -> float:
    # modified Lentz on the even form of the E1 continued fraction
    b = x + 1.0
    c = 1.0 / _FPMIN
    d = 1.0 / b
    h = d
    for i in range(1, _MAXIT):
        an = -float(i * i)
        b += 2.0
        d = 1.0 / (an * d + b)
        c = b + an / c
        delta = c * d
        h *= delta
        if abs(delta - 1.0) < _EPS:
            return h * math.exp(-x)
    raise ArithmeticError(f"E1 continued fraction did not converge at x={x}")


def gamma_upper_zero(x: float) -> float:
    """Upper incomplete gamma function of order zero, ``Gamma(0, x) = E1(x)``.

    Power series below x = 1, continued fraction above. Relative error is
    below 1e-10 on (0, inf); the result underflows to 0 for x > ~745.
    """
    x = float(x)
    if not x > 0.0:
        raise ValueError(f"Gamma(0, x) requires x > 0, got {x}")
    if x < _SERIES_CUTOFF:
        return _e1_series(x)
    return _e1_continued_fraction(x)


def ln_gamma(x: float) -> float:
    """Natural log of the Gamma function for x > 0."""
    x = float(x)
    if not x > 0.0:
        raise ValueError(f"ln_gamma requires x > 0, got {x}")
    return math.lgamma(x)
