"""Monte Carlo check of the finite-key failure probabilities.

The hidden configuration is a fixed set of click and error counts per photon
number. Each trial only re-draws which intensity every click belongs to, which
is exactly the randomness the finite-key estimators account for.

Random streams are numpy ``PCG64`` generators seeded from
``SeedSequence(seed, spawn_key=...)``: spawn key ``(0,)`` builds the hidden
configuration and ``(1, k)`` drives trial ``k``. Trials are therefore
independent and any single one can be replayed on its own.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import binomtest

from .channel import ChannelParams, FiniteCounts, SourceParams, photon_cutoff, poisson_pmf
from .entropy import binary_entropy
from .finite import (finite_improved_rate, finite_one_decoy_rate, finite_vacuum_weak_rate)
from .stats import solve_delta_known_expectation

ESTIMATORS = ("improved", "one-decoy", "vacuum-weak")
MIN_TRIALS = 1000
# legs whose union is a failure of the key-rate bound; the decoy-count legs
# are the individual deviation checks behind the yield leg
FAILURE_LEGS = ("yield", "pulses")


def _generator(seed: int, *key: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=key)))


def _class_probabilities(source: SourceParams, k_max: int) -> np.ndarray:
    """Rows (mu, nu, vac) of ``p_x * P(i photons | x)`` for ``i <= k_max``.

    The last column absorbs the Poisson tail beyond ``k_max``.
    """
    i = np.arange(k_max + 1)
    rows = []
    for p, x in ((source.p_mu, source.mu), (source.p_nu, source.nu), (source.p_vac, 0.0)):
        pmf = np.asarray(poisson_pmf(x, i), dtype=float)
        pmf[-1] += max(0.0, 1.0 - pmf.sum())
        rows.append(p * pmf)
    return np.array(rows)


def conditional_intensity_probability(source: SourceParams, i: int) -> float:
    """Probability that an ``i``-photon pulse was a signal pulse.

    Only signal and weak-decoy pulses are considered; a vacuum decoy never
    carries photons and does not change the ratio for ``i >= 1``.
    """
    if i < 0:
        raise ValueError(f"photon number must be >= 0, got {i}")
    a = source.p_mu * poisson_pmf(source.mu, i)
    b = source.p_nu * poisson_pmf(source.nu, i)
    if a + b == 0:
        # far tail underflow: the stronger intensity dominates
        return 1.0 if source.mu > source.nu else source.p_mu / (source.p_mu + source.p_nu)
    return a / (a + b)


@dataclass(frozen=True)
class PhotonChannelTruth:
    """Hidden per-photon-number clicks ``n`` and errors ``m``.

    ``expected_pulses[i]`` is the mean number of emitted ``i``-photon pulses;
    the true yields used for violation checks are ``n / expected_pulses``.
    ``class_probs`` holds the rows (signal, decoy, vacuum) of the joint
    probability of intensity and photon number.
    """

    n: np.ndarray
    m: np.ndarray
    expected_pulses: np.ndarray
    class_probs: np.ndarray
    N: float

    def __post_init__(self):
        if np.any(self.m < 0) or np.any(self.m > self.n):
            raise ValueError("need 0 <= m_i <= n_i")

    @property
    def c(self) -> np.ndarray:
        return self.n - self.m

    @property
    def k_max(self) -> int:
        return len(self.n) - 1

    def true_yield(self, i: int) -> float:
        e = self.expected_pulses[i]
        return self.n[i] / e if e > 0 else 0.0

    def true_error_rate(self, i: int) -> float:
        return self.m[i] / self.n[i] if self.n[i] > 0 else 0.0

    def single_photon_term(self) -> float:
        """``Y_1 [1 - h(e_1)]`` of the hidden configuration."""
        return self.true_yield(1) * (1.0 - binary_entropy(self.true_error_rate(1)))


def photon_yields(channel: ChannelParams, k_max: int):
    """Per-photon-number yields and error rates of the channel model.

    ``Y_i = 1 - (1 - Y0)(1 - eta)^i`` and ``e_i Y_i = e0 Y0 + e_d (1 - (1 - eta)^i)``.
    Mixed with Poisson weights these reproduce the simulated gains and error
    rates exactly. (Writing the misalignment part as ``e_d (Y_i - Y0)`` would
    carry an extra ``1 - Y0`` factor and miss the error rates by about ``Y0``.)
    """
    i = np.arange(k_max + 1)
    survive = np.power(1.0 - channel.eta, i)
    y = 1.0 - (1.0 - channel.Y0) * survive
    ey = channel.e0 * channel.Y0 + channel.e_d * (1.0 - survive)
    with np.errstate(invalid="ignore", divide="ignore"):
        e = np.where(y > 0, ey / y, 0.0)
    return y, np.clip(e, 0.0, 1.0)


def build_truth(source: SourceParams, channel: ChannelParams, N: int, seed: int,
                k_max: int | None = None) -> PhotonChannelTruth:
    """Draw a hidden configuration for ``N`` emitted pulses.

    Photon-number emissions are multinomial, clicks binomial in the yield and
    errors binomial in the error rate. Deterministic given ``seed``.
    """
    if k_max is None:
        k_max = max(photon_cutoff(source.mu), 2)
    probs = _class_probabilities(source, k_max)
    per_class = probs.sum(axis=0)
    rng = _generator(seed, 0)
    emitted = rng.multinomial(int(N), per_class / per_class.sum())
    y, e = photon_yields(channel, k_max)
    n = rng.binomial(emitted, y)
    m = rng.binomial(n, e)
    return PhotonChannelTruth(n=n, m=m, expected_pulses=N * per_class,
                              class_probs=probs, N=float(N))


def _assignment_shares(truth: PhotonChannelTruth) -> np.ndarray:
    # conditional probability of (mu, nu, vac) for each photon number
    total = truth.class_probs.sum(axis=0)
    with np.errstate(invalid="ignore", divide="ignore"):
        share = np.where(total > 0, truth.class_probs / total, 0.0)
    # underflowed tail columns go to the signal
    empty = total == 0
    share[:, empty] = np.array([[1.0], [0.0], [0.0]])
    return share


def _split(rng: np.random.Generator, counts: np.ndarray, share: np.ndarray):
    """Split each count into (mu, nu, vac) parts by sequential binomials."""
    to_mu = rng.binomial(counts, share[0])
    rest = counts - to_mu
    with np.errstate(invalid="ignore", divide="ignore"):
        cond = np.where(share[0] < 1.0, share[1] / (1.0 - share[0]), 0.0)
    to_nu = rng.binomial(rest, np.clip(cond, 0.0, 1.0))
    return to_mu, to_nu, rest - to_nu


def sample_assignment(truth: PhotonChannelTruth, source: SourceParams,
                      seed: int | np.random.Generator) -> FiniteCounts:
    """Assign every hidden click to an intensity and tally the counts.

    Each click is assigned independently with the conditional intensity
    probability of its photon number. Pulse totals per intensity are the
    design values ``p_x * N``.
    """
    rng = seed if isinstance(seed, np.random.Generator) else _generator(seed, 1, 0)
    share = _assignment_shares(truth)
    m_mu, m_nu, m_vac = _split(rng, truth.m, share)
    c_mu, c_nu, c_vac = _split(rng, truth.c, share)
    N = truth.N
    return FiniteCounts(
        N=N, N_mu=source.p_mu * N, N_nu=source.p_nu * N, N_vac=source.p_vac * N,
        n_mu=int(m_mu.sum() + c_mu.sum()), n_nu=int(m_nu.sum() + c_nu.sum()),
        n_vac=int(m_vac.sum() + c_vac.sum()),
        m_mu=int(m_mu.sum()), m_nu=int(m_nu.sum()), m_vac=int(m_vac.sum()),
    )


def wilson_interval(k: int, n: int, confidence: float = 0.95) -> tuple[float, float]:
    """Wilson score interval for ``k`` successes in ``n`` trials."""
    ci = binomtest(k, n).proportion_ci(confidence_level=confidence, method="wilson")
    return float(ci.low), float(ci.high)


@dataclass(frozen=True)
class TrialOutcome:
    """One Monte Carlo trial.

    ``violations`` maps a leg name to whether the estimate overshot the hidden
    truth on that leg; ``violated`` is the union over :data:`FAILURE_LEGS`.
    """

    trial: int
    counts: FiniteCounts
    Y_lower: float
    R_lower: float
    single_photon_pulses: int
    violations: dict

    @property
    def violated(self) -> bool:
        return any(self.violations.get(leg, False) for leg in FAILURE_LEGS)


@dataclass(frozen=True)
class ValidationSummary:
    """Aggregated violation statistics of a Monte Carlo run."""

    estimator: str
    trials: int
    seed: int
    epsilon: float
    epsilon_total: float
    violations: int
    fraction: float
    interval: tuple
    truth_value: float
    leg_fractions: dict = field(default_factory=dict)
    leg_intervals: dict = field(default_factory=dict)

    @property
    def half_width(self) -> float:
        return 0.5 * (self.interval[1] - self.interval[0])

    def as_record(self) -> dict:
        rec = {
            "estimator": self.estimator, "trials": self.trials, "seed": self.seed,
            "epsilon": self.epsilon, "epsilon_total": self.epsilon_total,
            "violations": self.violations, "fraction": self.fraction,
            "wilson_low": self.interval[0], "wilson_high": self.interval[1],
            "truth_value": self.truth_value,
        }
        for leg, frac in self.leg_fractions.items():
            rec[f"fraction_{leg}"] = frac
        return rec


def _evaluate(estimator, counts, source, f, epsilon, delta_scale):
    if estimator == "improved":
        if delta_scale == 1.0:
            return finite_improved_rate(counts, source, f, epsilon)
        base = finite_improved_rate(counts, source, f, epsilon)
        if base.tangent is None or any(math.isnan(d) for d in base.deltas):
            return base
        scaled = tuple(delta_scale * d for d in base.deltas)
        return finite_improved_rate(counts, source, f, epsilon, tangent=base.tangent,
                                    deltas_override=scaled)
    if delta_scale != 1.0:
        raise ValueError("delta scaling is only supported for the improved estimator")
    if estimator == "one-decoy":
        return finite_one_decoy_rate(counts, source, f, epsilon)
    if estimator == "vacuum-weak":
        return finite_vacuum_weak_rate(counts, source, f, epsilon)
    raise ValueError(f"unknown estimator {estimator!r}")


def run_trial(truth: PhotonChannelTruth, source: SourceParams, estimator: str,
              f: float, epsilon: float, seed: int, trial: int,
              delta_scale: float = 1.0) -> TrialOutcome:
    """Replayable single trial ``trial`` of the run seeded with ``seed``."""
    rng = _generator(seed, 1, trial)
    counts = sample_assignment(truth, source, rng)
    result = _evaluate(estimator, counts, source, f, epsilon, delta_scale)
    single = int(rng.binomial(int(round(counts.N_mu)), source.mu * math.exp(-source.mu)))
    violations = {"yield": bool(result.Y_lower > truth.single_photon_term())}
    if estimator == "improved" and result.tangent is not None:
        d_n, d_1, d_2 = result.deltas
        n_lower = counts.N_mu * source.mu * math.exp(-source.mu) / (1.0 + d_n)
        violations["pulses"] = bool(n_lower > single)
        # the error weight is negative and the error-free weight positive for
        # every tangent point below 1/2, fixing the direction of each leg
        share = _assignment_shares(truth)[1]
        m_upper = counts.m_nu / (1.0 - d_1) if d_1 < 1.0 else math.inf
        violations["decoy_errors"] = bool(m_upper < float(truth.m @ share))
        violations["decoy_correct"] = bool(counts.c_nu / (1.0 + d_2) > float(truth.c @ share))
    return TrialOutcome(trial, counts, float(result.Y_lower), float(result.R_lower),
                        single, violations)


def estimate_failure_rate(estimator: str, source: SourceParams, channel: ChannelParams,
                          N: int, epsilon: float, trials: int, seed: int,
                          f: float = 1.06, delta_scale: float = 1.0,
                          trial_csv: str | None = None) -> ValidationSummary:
    """Empirical probability that ``estimator`` overshoots the hidden truth.

    Builds one hidden configuration, then runs ``trials`` independent
    assignments. For the tangent-line estimator the yield leg compares its
    ``Y^L`` with ``Y_1 [1 - h(e_1)]`` and the pulse leg compares the lower
    estimate of emitted single-photon signal pulses with a sampled count;
    baselines only have the yield leg. ``delta_scale`` multiplies the
    tangent-line deviations to probe the slack.
    """
    if estimator not in ESTIMATORS:
        raise ValueError(f"unknown estimator {estimator!r}")
    if trials < MIN_TRIALS:
        raise ValueError(f"need at least {MIN_TRIALS} trials, got {trials}")
    truth = build_truth(source, channel, N, seed)
    outcomes = [run_trial(truth, source, estimator, f, epsilon, seed, k, delta_scale)
                for k in range(trials)]
    if trial_csv is not None:
        write_trials(outcomes, trial_csv)
    return summarize(outcomes, estimator, seed, epsilon, truth)


_BUDGET = {"improved": 3, "one-decoy": 4, "vacuum-weak": 5}


def summarize(outcomes, estimator, seed, epsilon, truth) -> ValidationSummary:
    n = len(outcomes)
    k = sum(o.violated for o in outcomes)
    legs = sorted(outcomes[0].violations) if outcomes else []
    leg_frac, leg_ci = {}, {}
    for leg in legs:
        kl = sum(o.violations[leg] for o in outcomes)
        leg_frac[leg] = kl / n
        leg_ci[leg] = wilson_interval(kl, n)
    return ValidationSummary(estimator, n, seed, epsilon, _BUDGET[estimator] * epsilon,
                             k, k / n, wilson_interval(k, n), float(truth.single_photon_term()),
                             leg_frac, leg_ci)


TRIAL_COLUMNS = ("trial", "n_mu", "n_nu", "m_mu", "m_nu", "n_vac", "m_vac",
                 "Y_lower", "R_lower", "single_photon_pulses", "violated")


def write_trials(outcomes, path: str) -> None:
    """Per-trial CSV in :data:`TRIAL_COLUMNS` order."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(TRIAL_COLUMNS)
        for o in outcomes:
            c = o.counts
            w.writerow([o.trial, c.n_mu, c.n_nu, c.m_mu, c.m_nu, c.n_vac, c.m_vac,
                        f"{o.Y_lower:.12g}", f"{o.R_lower:.12g}", o.single_photon_pulses,
                        int(o.violated)])


def pulse_leg_failure(source: SourceParams, N: int, epsilon: float, trials: int,
                      seed: int) -> float:
    """Violation fraction of the single-photon pulse-count estimate alone."""
    expect = N * source.p_mu * source.mu * math.exp(-source.mu)
    d = solve_delta_known_expectation(expect, epsilon).delta_upper
    rng = _generator(seed, 2)
    draws = rng.binomial(int(round(N * source.p_mu)), source.mu * math.exp(-source.mu), trials)
    return float(np.mean(expect / (1.0 + d) > draws))
