"""Chernoff-bound conversions between observed counts and expected values.

Two directions are needed.  Given an observed sum X of Bernoulli samples,
the expected value phi is bracketed by

    phi_L = X / (1 + delta1),   (e^d1 / (1+d1)^(1+d1))^(X/(1+d1)) = xi/2
    phi_U = X / (1 - delta2),   (e^-d2 / (1-d2)^(1-d2))^(X/(1-d2)) = xi/2

and given an expected value Y, the observed value is bracketed by

    obs_U = (1 + delta1') Y,    (e^d1 / (1+d1)^(1+d1))^Y = xi/2
    obs_L = (1 - delta2') Y,    (e^-d2 / (1-d2)^(1-d2))^Y = xi/2

where xi is the failure probability per invocation.  All four defining
equations are monotone in delta and solved by bisection.
"""
from __future__ import annotations

import math

import numpy as np

_REL_TOL = 1e-12


def _g_plus(delta):
    """(1+d) ln(1+d) - d, the upper-tail exponent; monotone increasing."""
    return (1.0 + delta) * np.log1p(delta) - delta


def _g_minus(delta):
    """d + (1-d) ln(1-d), the lower-tail exponent; monotone increasing on (0,1)."""
    return delta + (1.0 - delta) * np.log1p(-delta)


def _bisect(func, target, lo, hi):
    """Solve func(d) = target for monotone increasing func on [lo, hi]."""
    flo, fhi = func(lo) - target, func(hi) - target
    while fhi < 0.0:
        lo, flo = hi, fhi
        hi *= 2.0
        fhi = func(hi) - target
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if func(mid) - target <= 0.0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= _REL_TOL * max(abs(lo), 1e-300):
            break
    return 0.5 * (lo + hi)


def _bisect_unit(func, target):
    """As _bisect, for func monotone increasing on (0, 1)."""
    lo, hi = 0.0, 1.0 - 1e-16
    if func(hi) < target:
        return hi
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if func(mid) <= target:
            lo = mid
        else:
            hi = mid
        if hi - lo <= _REL_TOL * max(lo, 1e-300):
            break
    return 0.5 * (lo + hi)


def _check_xi(xi: float) -> float:
    if not 0.0 < xi < 1.0:
        raise ValueError("xi must be in (0, 1)")
    return math.log(2.0 / xi)


def expected_bounds_from_observed(x: float, xi: float):
    """Bounds on the expected value behind an observed count X.

    Returns (lower, upper) = (X/(1+delta1), X/(1-delta2)).  For X = 0 the
    lower bound is 0 and the upper bound is the X -> 0+ limit ln(2/xi).
    """
    big_l = _check_xi(xi)
    if x < 0:
        raise ValueError("observed count must be >= 0")
    if x == 0:
        return 0.0, big_l
    # X * g_plus(d1) / (1 + d1) = L ; X * g_minus(d2) / (1 - d2) = L
    d1 = _bisect(lambda d: x * _g_plus(d) / (1.0 + d), big_l, 0.0, 1.0)
    d2 = _bisect_unit(lambda d: x * _g_minus(d) / (1.0 - d), big_l)
    return x / (1.0 + d1), x / (1.0 - d2)


def observed_bounds_from_expected(y: float, xi: float):
    """Bounds on the value observed when the expectation is Y.

    Returns (lower, upper) = ((1-delta2') Y, (1+delta1') Y).  When
    Y <= ln(2/xi) the lower-tail equation has no solution in (0, 1) and
    the lower bound is 0; for Y = 0 both bounds are 0 (the limit of the
    defining equations).
    """
    big_l = _check_xi(xi)
    if y < 0:
        raise ValueError("expected value must be >= 0")
    if y == 0:
        return 0.0, 0.0
    d1 = _bisect(lambda d: y * _g_plus(d), big_l, 0.0, 1.0)
    upper = (1.0 + d1) * y
    if y * _g_minus(1.0 - 1e-16) <= big_l:
        lower = 0.0
    else:
        d2 = _bisect_unit(lambda d: y * _g_minus(d), big_l)
        lower = (1.0 - d2) * y
    return lower, upper


def phi_lower(x: float, xi: float) -> float:
    return expected_bounds_from_observed(x, xi)[0]


def phi_upper(x: float, xi: float) -> float:
    return expected_bounds_from_observed(x, xi)[1]


def varphi_lower(y: float, xi: float) -> float:
    return observed_bounds_from_expected(y, xi)[0]


def varphi_upper(y: float, xi: float) -> float:
    return observed_bounds_from_expected(y, xi)[1]
