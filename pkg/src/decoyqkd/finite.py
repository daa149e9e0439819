"""Finite-statistics key-rate lower bounds.

The tangent-line estimator treats the photon-number click counts as fixed
and only the assignment of each click to an intensity as random. After the
linear relaxation, the bound depends on the data through two sums of
indicator variables (decoy-side errors and decoy-side error-free clicks),
each handled by one Chernoff deviation. A third deviation bounds the number
of emitted single-photon signal pulses.

The two baselines bound each observed count separately and plug the results
into the two-intensity and vacuum+weak formulas.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

from . import asymptotic as asym
from .channel import (ChannelParams, FiniteCounts, SourceParams, expected_counts,
                      infinite_decoy_reference, simulate_rates)
from .entropy import TangentLine, binary_entropy, feasible_tangent
from .stats import Deviation, solve_delta, solve_delta_known_expectation

METHODS = ("one-decoy", "vacuum-weak", "improved")
ASYMPTOTIC_METHODS = METHODS + ("infinite-decoy",)
# baselines bound every count with the closed-form deviation, falling back to
# the search only where the closed form is inapplicable
BASELINE_POLICY = "symmetric"


@dataclass(frozen=True)
class FiniteKeyResult:
    """Outcome of a finite-key estimator.

    ``R_lower`` is floored at 0. ``deltas`` holds the deviations used, in the
    order documented by each estimator. ``epsilon_total`` is the union-bound
    failure probability.
    """

    R_lower: float
    deltas: tuple
    tangent: TangentLine | None
    epsilon_total: float
    Y_lower: float = 0.0
    notes: tuple = field(default=())


def empirical_tangent(counts: FiniteCounts, source: SourceParams) -> TangentLine:
    """Tangent line at the single-photon error rate suggested by the data.

    Uses the observed frequencies in place of gains. A zero (or negative)
    estimate falls back to the floor tangent point; an estimate beyond the
    feasibility boundary is shrunk onto it.
    """
    mu, nu = source.mu, source.nu
    if counts.N_mu <= 0 or counts.N_nu <= 0:
        raise asym.NoSinglePhotonEstimate("no signal or decoy pulses")
    en, em = math.exp(nu), math.exp(mu)
    num = mu * mu * counts.m_nu / counts.N_nu * en - nu * nu * counts.m_mu / counts.N_mu * em
    den = mu * mu * counts.n_nu / counts.N_nu * en - nu * nu * counts.n_mu / counts.N_mu * em
    if den <= 0:
        raise asym.NoSinglePhotonEstimate("no single-photon signal; key rate 0")
    return feasible_tangent(num / den, mu, nu)


def _scaled(count: float, dev: Deviation, sign: float) -> float:
    # count/(1 + sgn*delta); the lower-tail direction diverges when vacuous
    if sign > 0:
        return count / (1.0 + dev.delta_upper)
    if dev.vacuous:
        return math.inf
    return count / (1.0 - dev.delta_lower)


def _chernoff_term(weight: float, z_obs: float, offset: float, total: float,
                   epsilon: float, policy: str, decomposition: str):
    """Lower estimate of ``weight * (Z + offset * total)``.

    ``Z`` is a sum of ``total`` indicators observed as ``z_obs``. The
    complementary decomposition rewrites it with the indicators of the other
    intensity. Returns ``(value, deviation used)``.
    """
    def standard():
        dev = solve_delta(z_obs, epsilon, policy)
        scaled = _scaled(z_obs, dev, math.copysign(1.0, weight))
        val = -math.inf if math.isinf(scaled) else weight * (scaled + offset * total)
        return val, dev

    def complement():
        w, z, b = -weight, total - z_obs, -1.0 - offset
        dev = solve_delta(z, epsilon, policy)
        scaled = _scaled(z, dev, math.copysign(1.0, w))
        val = -math.inf if math.isinf(scaled) else w * (scaled + b * total)
        return val, dev

    if weight == 0:
        return 0.0, Deviation(0.0, 0.0, "none")
    if decomposition == "standard":
        return standard()
    if decomposition == "complement":
        return complement()
    if decomposition == "tighter":
        return max(standard(), complement(), key=lambda t: t[0])
    raise ValueError(f"unknown decomposition {decomposition!r}")


def finite_improved_rate(counts: FiniteCounts, source: SourceParams, f: float,
                         epsilon: float, coefficient: str = "derived",
                         delta_n: str = "exact", decomposition: str = "standard",
                         policy: str = "auto", tangent: TangentLine | None = None,
                         deltas_override: tuple | None = None) -> FiniteKeyResult:
    """Tangent-line key-rate lower bound from finite counts.

    Failure probability is at most ``3 * epsilon``.

    Parameters
    ----------
    coefficient : {"derived", "published"}
        Weight of the decoy error count. ``"derived"`` uses
        ``mu (mu - nu)``, which follows from regrouping the estimator;
        ``"published"`` uses ``mu^2 - nu^2``, which gives a lower rate.
    delta_n : {"exact", "closed-form"}
        How the single-photon pulse-count deviation is computed (see
        :func:`~decoyqkd.stats.solve_delta_known_expectation`).
    decomposition : {"standard", "complement", "tighter"}
        Which indicator sums carry the Chernoff deviations. ``"standard"``
        uses decoy-side counts; ``"complement"`` the signal-side ones;
        ``"tighter"`` picks, per term, the larger lower bound.
    policy : str
        Deviation policy, see :func:`~decoyqkd.stats.solve_delta`.
    tangent : TangentLine, optional
        Override the data-driven tangent.
    deltas_override : tuple, optional
        ``(delta_N, delta_1, delta_2)`` to use verbatim; symmetric deviations.
        Meant for audits (all zeros reproduces the fluctuation-free value).

    Notes
    -----
    ``deltas`` in the result is ``(delta_N, delta_1, delta_2)`` where
    ``delta_1`` is the deviation applied to the error term and ``delta_2`` the
    one applied to the error-free term, each in the direction actually used.
    """
    if not 0 < epsilon <= 1:
        raise ValueError(f"epsilon must be in (0, 1], got {epsilon}")
    mu, nu = source.mu, source.nu
    eps_total = 3.0 * epsilon
    try:
        line = tangent if tangent is not None else empirical_tangent(counts, source)
    except asym.NoSinglePhotonEstimate as err:
        return FiniteKeyResult(0.0, (math.nan,) * 3, None, eps_total, 0.0, (str(err),))
    en, em = math.exp(nu), math.exp(mu)
    if coefficient == "derived":
        coef = mu * (mu - nu)
    elif coefficient == "published":
        coef = mu * mu - nu * nu
    else:
        raise ValueError(f"unknown coefficient mode {coefficient!r}")
    w_nu = mu * mu * en / counts.N_nu
    w_mu = nu * nu * em / counts.N_mu
    weight1 = (line.a - line.b) * coef * en / counts.N_nu
    weight2 = line.a * (w_nu + w_mu)
    offset2 = -w_mu / (w_nu + w_mu)
    total_m = counts.m_mu + counts.m_nu
    total_c = counts.c_mu + counts.c_nu
    expect_single = counts.N_mu * mu * math.exp(-mu)

    if deltas_override is not None:
        d_n, d_1, d_2 = deltas_override
        s1 = math.copysign(1.0, weight1)
        s2 = math.copysign(1.0, weight2)
        if (s1 < 0 and d_1 >= 1.0) or (s2 < 0 and d_2 >= 1.0):
            term1 = -math.inf
            term2 = 0.0
        else:
            term1 = weight1 * counts.m_nu / (1.0 + s1 * d_1)
            term2 = weight2 * (counts.c_nu / (1.0 + s2 * d_2) + offset2 * total_c)
    else:
        d_n = solve_delta_known_expectation(
            expect_single, epsilon, closed_form=(delta_n == "closed-form")).delta_upper
        term1, dev1 = _chernoff_term(weight1, counts.m_nu, 0.0, total_m,
                                     epsilon, policy, decomposition)
        term2, dev2 = _chernoff_term(weight2, counts.c_nu, offset2, total_c,
                                     epsilon, policy, decomposition)
        d_1 = dev1.delta_lower if weight1 < 0 else dev1.delta_upper
        d_2 = dev2.delta_upper if weight2 > 0 else dev2.delta_lower
    notes = []
    if line.clipped:
        notes.append(f"tangent moved to e_t={line.e_t:.6g}")
    y_lower = (term1 + term2) / (mu * nu * (mu - nu))
    if math.isinf(y_lower):
        notes.append("deviation vacuous; bound is 0")
        return FiniteKeyResult(0.0, (d_n, d_1, d_2), line, eps_total, -math.inf, tuple(notes))
    e_mu = counts.m_mu / counts.n_mu if counts.n_mu > 0 else 0.0
    r = (expect_single / (counts.N * (1.0 + d_n)) * y_lower
         - f * binary_entropy(min(e_mu, 1.0)) * counts.n_mu / counts.N)
    return FiniteKeyResult(max(r, 0.0), (d_n, d_1, d_2), line, eps_total, y_lower, tuple(notes))


def _pa_bounds(counts: FiniteCounts, source: SourceParams, epsilon: float, policy: str):
    mu, nu = source.mu, source.nu
    em, en = math.exp(mu), math.exp(nu)
    devs = {name: solve_delta(getattr(counts, name), epsilon, policy)
            for name in ("n_mu", "n_nu", "m_mu", "m_nu")}
    q_mu = devs["n_mu"].upper_estimate(counts.n_mu) / counts.N_mu * em
    q_nu = devs["n_nu"].lower_estimate(counts.n_nu) / counts.N_nu * en
    eq_mu = devs["m_mu"].upper_estimate(counts.m_mu) / counts.N_mu * em
    eq_nu = devs["m_nu"].upper_estimate(counts.m_nu) / counts.N_nu * en
    return (q_mu, q_nu, eq_mu, eq_nu), devs


def _baseline_rate(counts: FiniteCounts, source: SourceParams, f: float, pa: float) -> float:
    mu = source.mu
    e_mu = counts.m_mu / counts.n_mu if counts.n_mu > 0 else 0.0
    r = (counts.N_mu / counts.N * mu * math.exp(-mu) * pa
         - f * binary_entropy(min(e_mu, 1.0)) * counts.n_mu / counts.N)
    return max(r, 0.0)


def finite_one_decoy_rate(counts: FiniteCounts, source: SourceParams, f: float,
                          epsilon: float, background: str = "separate",
                          policy: str = BASELINE_POLICY) -> FiniteKeyResult:
    """Two-intensity baseline with one Chernoff deviation per observed count.

    The decoy gain enters through its lower estimate, the signal gain and both
    error counts through upper estimates; the unknown background yield is
    confined by the decoy error count. Failure probability ``4 * epsilon``;
    ``deltas`` are the deviations of ``(n_mu, n_nu, m_mu, m_nu)``.
    """
    eps_total = 4.0 * epsilon
    if counts.N_mu <= 0 or counts.N_nu <= 0 or counts.n_nu <= 0:
        return FiniteKeyResult(0.0, (), None, eps_total, 0.0, ("no decoy clicks",))
    bounds, devs = _pa_bounds(counts, source, epsilon, policy)
    cap = min(1.0, bounds[3] / asym.E0)
    pa, _ = asym.background_pa_term(source.mu, source.nu, *bounds, 0.0, cap, background)
    deltas = tuple(devs[k] for k in ("n_mu", "n_nu", "m_mu", "m_nu"))
    return FiniteKeyResult(_baseline_rate(counts, source, f, pa), deltas, None, eps_total, pa)


def finite_vacuum_weak_rate(counts: FiniteCounts, source: SourceParams, f: float,
                            epsilon: float, background: str = "separate",
                            policy: str = BASELINE_POLICY) -> FiniteKeyResult:
    """Vacuum+weak baseline: the vacuum-decoy clicks confine the background yield.

    The vacuum interval is intersected with the two-intensity interval, so an
    uninformative vacuum count degenerates to the two-intensity bound.
    Failure probability ``5 * epsilon``.
    """
    eps_total = 5.0 * epsilon
    if counts.N_vac <= 0:
        raise ValueError("vacuum-decoy counts required")
    if counts.N_mu <= 0 or counts.N_nu <= 0 or counts.n_nu <= 0:
        return FiniteKeyResult(0.0, (), None, eps_total, 0.0, ("no decoy clicks",))
    bounds, devs = _pa_bounds(counts, source, epsilon, policy)
    cap = min(1.0, bounds[3] / asym.E0)
    dev0 = solve_delta(counts.n_vac, epsilon, policy)
    notes = []
    lo = dev0.lower_estimate(counts.n_vac) / counts.N_vac
    hi = dev0.upper_estimate(counts.n_vac) / counts.N_vac
    if hi >= cap:
        notes.append("vacuum estimate uninformative; two-intensity interval used")
    hi = min(hi, cap)
    lo = min(lo, hi)
    pa, _ = asym.background_pa_term(source.mu, source.nu, *bounds, lo, hi, background)
    deltas = tuple(devs[k] for k in ("n_mu", "n_nu", "m_mu", "m_nu")) + (dev0,)
    return FiniteKeyResult(_baseline_rate(counts, source, f, pa), deltas, None,
                           eps_total, pa, tuple(notes))


# options meaningful without fluctuations (one-decoy background scan)
ASYMPTOTIC_OPTIONS = ("background", "grid")


def finite_rate(method: str, source: SourceParams, channel: ChannelParams, N: float,
                f: float, epsilon: float, **options) -> FiniteKeyResult:
    """Estimator ``method`` evaluated on the expected counts of a simulated link."""
    rates = simulate_rates(source, channel)
    counts = expected_counts(source, rates, N, channel.Y0)
    if method == "improved":
        return finite_improved_rate(counts, source, f, epsilon, **options)
    if method == "one-decoy":
        return finite_one_decoy_rate(counts, source, f, epsilon, **options)
    if method == "vacuum-weak":
        return finite_vacuum_weak_rate(counts, source, f, epsilon, **options)
    raise ValueError(f"unknown finite-key method {method!r}")


def asymptotic_rate(method: str, source: SourceParams, channel: ChannelParams,
                    f: float, **options) -> float:
    """Fluctuation-free key rate of ``method`` on a simulated link.

    Options that only affect finite-size statistics are ignored, so the same
    option set can be passed to both entry points.
    """
    options = {k: v for k, v in options.items() if k in ASYMPTOTIC_OPTIONS}
    rates = simulate_rates(source, channel)
    if method == "improved":
        return asym.improved_key_rate(rates, source, f)
    if method == "one-decoy":
        return asym.one_decoy_key_rate(rates, source, f, **options)
    if method == "vacuum-weak":
        return asym.vacuum_weak_key_rate(rates, source, channel.Y0, f)
    if method == "infinite-decoy":
        return asym.key_rate(source, infinite_decoy_reference(channel), rates, f)
    raise ValueError(f"unknown method {method!r}")


def max_distance(rate_at, lo: float = 0.0, hi: float = 400.0, step: float = 5.0,
                 resolution: float = 0.1) -> float:
    """Largest distance (to ``resolution`` km) where ``rate_at(l) > 0``.

    ``rate_at`` maps a fiber length to a key rate. A coarse scan finds the
    last positive grid point, bisection narrows the edge, and the reported
    distance is rounded down to the resolution grid and verified positive.
    Returns 0 if the rate is nowhere positive.
    """
    grid = [lo + k * step for k in range(int(round((hi - lo) / step)) + 1)]
    last = None
    for l in grid:
        if rate_at(l) > 0:
            last = l
    if last is None:
        return 0.0
    a, b = last, min(last + step, hi)
    if rate_at(b) > 0:
        return b
    while b - a > resolution / 10:
        mid = 0.5 * (a + b)
        if rate_at(mid) > 0:
            a = mid
        else:
            b = mid
    d = math.floor(a / resolution + 1e-9) * resolution
    while d > lo and rate_at(d) <= 0:
        d -= resolution
    return round(max(d, lo), 10)


def finite_max_distance(method: str, source: SourceParams, channel: ChannelParams,
                        N: float | None, f: float, epsilon: float, **options) -> float:
    """Maximum positive-rate distance for ``method``; ``N=None`` means asymptotic."""
    if N is None:
        return max_distance(lambda l: asymptotic_rate(method, source, channel.at(l), f, **options))
    return max_distance(
        lambda l: finite_rate(method, source, channel.at(l), N, f, epsilon, **options).R_lower)
