"""Numerics shared by the rate and finite-key models.

erf comes from the standard library; erfi and the modified Bessel
function I0 are evaluated by their power series, whose terms are all
positive -- no cancellation, so plain double accumulation holds relative
error near machine precision over the |x| <= 20 working range (erfi
overflows double just past x = 26.6 in any case).  I0 switches to the
large-argument asymptotic expansion beyond the series' comfort zone.
"""

from __future__ import annotations

import math

from .errors import NumericalDomainError


def erf(x: float) -> float:
    return math.erf(x)


def erfi(x: float) -> float:
    """Imaginary error function, erfi(x) = -i erf(ix).

    Series: (2/sqrt(pi)) * sum_k x^(2k+1) / (k! (2k+1)).
    """
    if x == 0.0:
        return 0.0
    if abs(x) > 26.5:
        raise NumericalDomainError("erfi overflows double precision beyond |x| ~ 26.6")
    xx = x * x
    term = x
    total = x
    k = 0
    while True:
        k += 1
        term *= xx / k
        contrib = term / (2 * k + 1)
        total += contrib
        if abs(contrib) < 1e-17 * abs(total):
            break
    return (2.0 / math.sqrt(math.pi)) * total


def bessel_i0(x: float) -> float:
    """Modified Bessel function of the first kind, order zero."""
    x = abs(x)
    if x <= 25.0:
        term = 1.0
        total = 1.0
        q = x * x / 4.0
        k = 0
        while True:
            k += 1
            term *= q / (k * k)
            total += term
            if term < 1e-17 * total:
                break
        return total
    # Asymptotic expansion; for x > 25 a few terms reach ~1e-12 relative.
    s = 1.0
    term = 1.0
    for k in range(1, 10):
        term *= (2 * k - 1) ** 2 / (8.0 * x * k)
        s += term
    return math.exp(x) / math.sqrt(2.0 * math.pi * x) * s


def binary_entropy(x: float) -> float:
    """Shannon entropy of a bit, h(x); h(0) = h(1) = 0 by continuity."""
    if x < 0.0 or x > 1.0:
        raise NumericalDomainError(f"binary entropy needs 0 <= x <= 1, got {x}")
    if x == 0.0 or x == 1.0:
        return 0.0
    return -x * math.log2(x) - (1.0 - x) * math.log2(1.0 - x)


def holevo_g(x: float) -> float:
    """(x+1) log2(x+1) - x log2(x), the bosonic entropy kernel; g(0) = 0."""
    if x < 0.0:
        if x > -1e-12:  # tolerate eigenvalue round-off at the vacuum
            return 0.0
        raise NumericalDomainError(f"entropy kernel needs x >= 0, got {x}")
    if x == 0.0:
        return 0.0
    return (x + 1.0) * math.log2(x + 1.0) - x * math.log2(x)
