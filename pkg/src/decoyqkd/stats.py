"""Chernoff-type deviation solvers.

Every solver answers the same question: given an observed count ``phi`` of a
sum of independent [0, 1] variables and a failure probability ``epsilon``,
how far may the unknown expectation sit from the observation?

Two directions are tracked separately:

* ``delta_upper`` bounds the upper tail. ``phi / (1 + delta_upper)`` is a
  lower estimate of the expectation.
* ``delta_lower`` bounds the lower tail. ``phi / (1 - delta_lower)`` is an
  upper estimate of the expectation; it must stay below 1 to be informative.

All logarithms here are natural.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from scipy.optimize import brentq

SYMMETRIC = "symmetric-analytical"
ASYMMETRIC = "asymmetric-search"
KNOWN_EXPECTATION = "known-expectation"

# phi > -ANALYTIC_THRESHOLD * ln(eps) => closed form is tight enough
ANALYTIC_THRESHOLD = 100.0

UPPER_BRACKET = 1e3
LOWER_BRACKET = 1.0 - 1e-12
RTOL = 1e-12


class AnalyticalBoundInapplicable(ValueError):
    """Raised when the closed-form symmetric deviation would leave [0, 1]."""


class VacuousBoundError(ValueError):
    """Raised when no deviation below 1 satisfies the lower-tail equation.

    The partially solved deviation (with ``delta_lower`` set to 1, i.e. the
    whole count may be fluctuation) is kept on ``deviation``.
    """

    def __init__(self, message: str, deviation: "Deviation"):
        super().__init__(message)
        self.deviation = deviation


@dataclass(frozen=True)
class Deviation:
    """Relative deviations of an observed count from its expectation."""

    delta_lower: float
    delta_upper: float
    method: str

    def __post_init__(self):
        if not 0.0 <= self.delta_lower <= 1.0:
            raise ValueError(f"delta_lower must be in [0, 1], got {self.delta_lower}")
        if self.delta_upper < 0.0:
            raise ValueError(f"delta_upper must be >= 0, got {self.delta_upper}")

    @property
    def vacuous(self) -> bool:
        """True when the lower-tail deviation swallows the whole count."""
        return self.delta_lower >= 1.0

    def lower_estimate(self, phi: float) -> float:
        """Lower estimate ``phi / (1 + delta_upper)`` of the expectation."""
        return phi / (1.0 + self.delta_upper)

    def upper_estimate(self, phi: float) -> float:
        """Upper estimate ``phi / (1 - delta_lower)``; infinite if vacuous."""
        if self.vacuous:
            return math.inf
        return phi / (1.0 - self.delta_lower)


def _check_epsilon(epsilon: float) -> None:
    if not 0.0 < epsilon <= 1.0:
        raise ValueError(f"epsilon must be in (0, 1], got {epsilon}")


def symmetric_exponent(delta: float, phi: float) -> float:
    """``ln`` of the relaxed bound ``exp(-delta^2/(2+delta) * phi/(1+delta))``."""
    return -delta * delta / (2.0 + delta) * phi / (1.0 + delta)


def upper_tail_exponent(delta: float, phi: float) -> float:
    """``ln`` of ``(e^d / (1+d)^(1+d))^(phi/(1+d))``."""
    return phi * (delta / (1.0 + delta) - math.log1p(delta))


def lower_tail_exponent(delta: float, phi: float) -> float:
    """``ln`` of ``(e^-d / (1-d)^(1-d))^(phi/(1+d))``."""
    if delta >= 1.0:
        return -phi / (1.0 + delta)
    return phi * (-delta - (1.0 - delta) * math.log1p(-delta)) / (1.0 + delta)


def _bisect(func, lo: float, hi: float) -> float:
    # func is increasing across the root on [lo, hi]
    return brentq(func, lo, hi, xtol=1e-300, rtol=RTOL, maxiter=500)


def solve_delta_symmetric(phi: float, epsilon: float) -> Deviation:
    """Closed-form symmetric deviation for an observed count.

    Solves ``exp(-d^2/(2+d) * phi/(1+d)) = epsilon`` analytically. The result
    is valid for both tails at once.

    Raises
    ------
    AnalyticalBoundInapplicable
        If ``phi <= -6 ln(epsilon)``; the root would exceed 1 and the
        asymmetric search has to be used instead.
    """
    _check_epsilon(epsilon)
    if phi < 0:
        raise ValueError(f"phi must be >= 0, got {phi}")
    if epsilon == 1.0:
        return Deviation(0.0, 0.0, SYMMETRIC)
    log_eps = math.log(epsilon)
    if phi <= -6.0 * log_eps:
        raise AnalyticalBoundInapplicable(
            f"phi={phi:g} <= -6 ln(eps)={-6 * log_eps:g}: analytical bound "
            "inapplicable, use the asymmetric search"
        )
    delta = (-3.0 * log_eps + math.sqrt(log_eps * log_eps - 8.0 * phi * log_eps)) / (
        2.0 * (phi + log_eps)
    )
    return Deviation(delta, delta, SYMMETRIC)


def solve_delta_upper(phi: float, epsilon: float) -> float:
    """Upper-tail deviation by bracketed root search.

    The bracket starts at [0, 1e3] and widens geometrically; tiny counts can
    need deviations of many orders of magnitude. Returns ``inf`` when no root
    exists below 1e300.
    """
    _check_epsilon(epsilon)
    if phi <= 0:
        raise ValueError(f"phi must be > 0, got {phi}")
    if epsilon == 1.0:
        return 0.0
    target = math.log(epsilon)
    f = lambda d: target - upper_tail_exponent(d, phi)
    lo, hi = 0.0, UPPER_BRACKET
    while f(hi) < 0:
        if hi >= 1e300:
            return math.inf
        lo, hi = hi, min(hi * 1e6, 1e300)
    return _bisect(f, lo, hi)


def solve_delta_lower(phi: float, epsilon: float) -> float | None:
    """Lower-tail deviation by bracketed root search on [0, 1 - 1e-12].

    Returns ``None`` when no root exists below 1.
    """
    _check_epsilon(epsilon)
    if phi <= 0:
        raise ValueError(f"phi must be > 0, got {phi}")
    if epsilon == 1.0:
        return 0.0
    target = math.log(epsilon)
    f = lambda d: target - lower_tail_exponent(d, phi)
    if f(LOWER_BRACKET) < 0:
        return None
    return _bisect(f, 0.0, LOWER_BRACKET)


def solve_delta_asymmetric(phi: float, epsilon: float) -> Deviation:
    """Separate deviations for each tail, from the unrelaxed Chernoff forms.

    Raises
    ------
    VacuousBoundError
        If the lower-tail equation has no root below 1. The error carries the
        deviation with ``delta_lower = 1`` so callers that only need the upper
        direction can still proceed.
    """
    delta_upper = solve_delta_upper(phi, epsilon)
    delta_lower = solve_delta_lower(phi, epsilon)
    if delta_lower is None:
        dev = Deviation(1.0, delta_upper, ASYMMETRIC)
        raise VacuousBoundError(
            f"phi={phi:g} too small for a lower-tail deviation below 1 at "
            f"eps={epsilon:g}: bound vacuous, treat deviation as total",
            dev,
        )
    return Deviation(delta_lower, delta_upper, ASYMMETRIC)


def solve_delta(phi: float, epsilon: float, policy: str = "auto") -> Deviation:
    """Deviation for an observed count using the selection policy.

    ``"auto"`` uses the closed form when ``phi > -100 ln(epsilon)`` and the
    asymmetric search otherwise; ``"symmetric"`` and ``"asymmetric"`` force one
    route (``"symmetric"`` still falls back when the closed form is
    inapplicable). A vacuous lower tail is returned as ``delta_lower = 1``
    rather than raised. A zero count yields the fully vacuous deviation.
    """
    _check_epsilon(epsilon)
    if policy not in ("auto", "symmetric", "asymmetric"):
        raise ValueError(f"unknown deviation policy {policy!r}")
    if epsilon == 1.0:
        return Deviation(0.0, 0.0, SYMMETRIC)
    if phi <= 0:
        return Deviation(1.0, 0.0, ASYMMETRIC)
    log_eps = math.log(epsilon)
    use_closed_form = policy == "symmetric" or (
        policy == "auto" and phi > -ANALYTIC_THRESHOLD * log_eps
    )
    if use_closed_form and phi > -6.0 * log_eps:
        return solve_delta_symmetric(phi, epsilon)
    try:
        return solve_delta_asymmetric(phi, epsilon)
    except VacuousBoundError as err:
        return err.deviation


def solve_delta_known_expectation(
    expectation: float, epsilon: float, closed_form: bool = False
) -> Deviation:
    """Deviation when the expectation itself is known.

    Solves ``exp(-d^2/(2+d) * E) = epsilon``. The exact root is
    ``(L + sqrt(L^2 + 8 E L)) / (2E)`` with ``L = -ln(epsilon)``; it is found
    by bisection and returned as a symmetric deviation.

    With ``closed_form=True`` the narrower expression
    ``(L + sqrt(L^2 + 4 E L)) / (2E)`` is returned instead. It does not solve
    the equation above and is kept only to reproduce published numbers.
    """
    _check_epsilon(epsilon)
    if expectation <= 0:
        raise ValueError(f"expectation must be positive, got {expectation}")
    if epsilon == 1.0:
        return Deviation(0.0, 0.0, KNOWN_EXPECTATION)
    big_l = -math.log(epsilon)
    if closed_form:
        delta = (big_l + math.sqrt(4.0 * expectation * big_l + big_l * big_l)) / (
            2.0 * expectation
        )
    else:
        f = lambda d: -big_l - (-d * d / (2.0 + d) * expectation)
        hi = 1.0
        while f(hi) < 0:
            hi *= 2.0
        delta = _bisect(f, 0.0, hi)
    return Deviation(min(delta, 1.0), delta, KNOWN_EXPECTATION)
