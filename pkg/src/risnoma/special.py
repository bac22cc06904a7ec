"""Scalar special functions used by the pdf bounds and the bound constants.

Only real, positive arguments are supported.  Everything here is pure.
"""

from __future__ import annotations

import math

from .errors import DomainError

_EULER_GAMMA = 0.57721566490153286061
_FPMIN = 1e-300
_EPS = 1e-16
_MAXITER = 500


def _check_finite_positive(name: str, x: float) -> float:
    x = float(x)
    if not math.isfinite(x) or x <= 0.0:
        raise DomainError(f"{name} must be finite and > 0, got {x!r}")
    return x


def log_gamma(x: float) -> float:
    """Natural log of the gamma function for ``x > 0``."""
    x = _check_finite_positive("x", x)
    return math.lgamma(x)


def log_factorial(k: float) -> float:
    """``ln(k!)`` for a non-negative integer ``k``.

    Half-integer arguments are refused: every factorial in the bound
    constants has an integral argument once N is even.
    """
    kf = float(k)
    if not math.isfinite(kf) or kf < 0 or kf != math.floor(kf):
        raise DomainError(f"factorial needs a non-negative integer, got {k!r}")
    return math.lgamma(kf + 1.0)


def exp_integral_e1(x: float) -> float:
    """Exponential integral ``E1(x) = int_x^inf exp(-t)/t dt``.

    Power series below 1, modified Lentz continued fraction above.
    """
    x = _check_finite_positive("x", x)
    if x < 1.0:
        # E1(x) = -gamma - ln x - sum_{k>=1} (-x)^k / (k k!)
        total = 0.0
        term = 1.0
        for k in range(1, _MAXITER):
            term *= -x / k
            contrib = term / k
            total += contrib
            if abs(contrib) < abs(total) * _EPS:
                break
        return -_EULER_GAMMA - math.log(x) - total
    # E1(x) = exp(-x) * 1/(x+1- 1/(x+3- 4/(x+5- ...)))
    b = x + 1.0
    c = 1.0 / _FPMIN
    d = 1.0 / b
    h = d
    for i in range(1, _MAXITER):
        a = -float(i * i)
        b += 2.0
        d = 1.0 / (a * d + b)
        c = b + a / c
        delta = c * d
        h *= delta
        if abs(delta - 1.0) < _EPS:
            break
    else:  # pragma: no cover - convergence is fast for x >= 1
        raise ArithmeticError(f"E1 continued fraction did not converge at x={x}")
    return h * math.exp(-x)


def lower_incomplete_gamma(n: int, x: float) -> float:
    """``gamma(n, x) = int_0^x t^(n-1) exp(-t) dt`` for integer ``n >= 1``."""
    if isinstance(n, bool) or int(n) != n or n < 1:
        raise DomainError(f"n must be a positive integer, got {n!r}")
    n = int(n)
    x = float(x)
    if math.isnan(x) or x < 0.0:
        raise DomainError(f"x must be >= 0, got {x!r}")
    if x == 0.0:
        return 0.0
    full = math.factorial(n - 1)
    if math.isinf(x):
        return float(full)
    if x < n + 1.0:
        # series: x^n e^-x sum_k x^k / (n (n+1) ... (n+k))
        term = 1.0 / n
        total = term
        for k in range(1, _MAXITER):
            term *= x / (n + k)
            total += term
            if term < total * _EPS:
                break
        return math.exp(n * math.log(x) - x) * total
    # integer n: Gamma(n, x) = (n-1)! e^-x sum_{k<n} x^k / k!
    lx = math.log(x)
    upper = sum(math.exp(k * lx - x - math.lgamma(k + 1.0)) for k in range(n))
    return full - full * upper


def log_beta(a: float, b: float) -> float:
    a = _check_finite_positive("a", a)
    b = _check_finite_positive("b", b)
    return math.lgamma(a) + math.lgamma(b) - math.lgamma(a + b)


def beta_function(a: float, b: float) -> float:
    """Euler beta function, evaluated through log-gamma."""
    return math.exp(log_beta(a, b))
