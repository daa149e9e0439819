"""Fluctuation-free lower bounds on the privacy-amplification term.

Three estimators are provided:

* the two-intensity ("one-decoy") bound, worst case over the unknown
  background yield;
* the vacuum+weak bound, where the background yield is measured;
* the tangent-line bound, which never needs the background yield.

The exact minimum for a fixed background yield (the adversary's best
configuration) is available as a verification oracle.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.special import gammaln

from .channel import ObservedRates, SourceParams
from .entropy import TangentLine, binary_entropy, feasibility_margin, feasible_tangent

E0 = 0.5
BACKGROUND_GRID = 100
# photon numbers summed for infinite tails; terms beyond are below 1e-80
TAIL_CUTOFF = 60


class UnphysicalEstimateWarning(UserWarning):
    """An estimate fell outside its physical range and was clamped."""


class NoSinglePhotonEstimate(ValueError):
    """The single-photon yield lower bound is not positive; the key rate is 0."""


class StarSolutionSingular(ZeroDivisionError):
    """The two-photon elimination has a vanishing denominator."""


class InfeasibleTangentError(ValueError):
    """The tangent line violates the feasibility condition; pick a smaller e_t."""


class InfeasibleConstraintsError(ValueError):
    """No adversary configuration reproduces the observed statistics."""


class StructuredConfigInapplicable(ValueError):
    """The top-filled adversary configuration leaves [0, 1] at these rates.

    The constraint set can still be feasible; its minimum then has a
    different shape (typically a saturated two-photon yield), which the
    closed-form construction does not cover.
    """


def _weighted(rates: ObservedRates, source: SourceParams):
    """``(Q_mu e^mu, Q_nu e^nu, E_mu Q_mu e^mu, E_nu Q_nu e^nu)``."""
    em, en = math.exp(source.mu), math.exp(source.nu)
    return (rates.Q_mu * em, rates.Q_nu * en,
            rates.E_mu * rates.Q_mu * em, rates.E_nu * rates.Q_nu * en)


def _y1_lower(mu, nu, q_mu, q_nu, y0):
    # q_* are gains already multiplied by e^intensity
    return (mu * mu * q_nu - nu * nu * q_mu - (mu * mu - nu * nu) * y0) / (mu * nu * (mu - nu))


def _e1_upper(mu, nu, eq_mu, eq_nu, y0, y1):
    return min((eq_mu - y0 * E0) / (mu * y1), (eq_nu - y0 * E0) / (nu * y1))


def pa_term_from_bounds(mu, nu, q_mu, q_nu, eq_mu, eq_nu, y0_yield, y0_error=None) -> float:
    """``Y1^L [1 - h(e1^U)]`` from weighted gain/error bounds.

    Inputs are already scaled by ``e^intensity``; ``q_nu`` should be a lower
    and ``q_mu`` an upper estimate (errors: upper estimates). The background
    yield entering the yield bound and the error bound may differ, so each
    can sit at its own worst case; ``y0_error`` defaults to ``y0_yield``.
    Returns 0 when no positive single-photon yield can be certified.
    """
    if y0_error is None:
        y0_error = y0_yield
    y1 = min(_y1_lower(mu, nu, q_mu, q_nu, y0_yield), 1.0)
    if y1 <= 0:
        return 0.0
    e1 = min(max(_e1_upper(mu, nu, eq_mu, eq_nu, y0_error, y1), 0.0), 0.5)
    return y1 * (1.0 - binary_entropy(e1))


def worst_case_background(objective, lo: float, hi: float, grid: int = BACKGROUND_GRID):
    """Minimum of ``objective(Y0)`` over ``[lo, hi]``.

    Scans a uniform grid, then refines around the best grid point with a
    bounded scalar search. Returns ``(value, Y0)``.
    """
    if hi <= lo:
        return objective(lo), lo
    ys = np.linspace(lo, hi, grid + 1)
    vals = np.array([objective(y) for y in ys])
    k = int(np.argmin(vals))
    best, arg = float(vals[k]), float(ys[k])
    a, b = ys[max(k - 1, 0)], ys[min(k + 1, grid)]
    res = minimize_scalar(objective, bounds=(a, b), method="bounded",
                          options={"xatol": (hi - lo) * 1e-9})
    if res.fun < best:
        best, arg = float(res.fun), float(res.x)
    return best, arg


def background_pa_term(mu, nu, q_mu, q_nu, eq_mu, eq_nu, lo, hi,
                       background: str = "separate", grid: int = BACKGROUND_GRID):
    """Privacy-amplification bound with the background yield only known to lie in ``[lo, hi]``.

    ``"separate"`` puts each bound at its own worst case: the yield bound at
    ``hi`` and the error bound at ``lo``. ``"joint"`` minimizes the product
    over a single ``Y0`` (tighter, scanned on a grid). Returns
    ``(value, Y0 used for the yield bound)``.
    """
    if background == "separate":
        return pa_term_from_bounds(mu, nu, q_mu, q_nu, eq_mu, eq_nu, hi, lo), hi
    if background == "joint":
        obj = lambda y0: pa_term_from_bounds(mu, nu, q_mu, q_nu, eq_mu, eq_nu, y0)
        return worst_case_background(obj, lo, hi, grid)
    raise ValueError(f"unknown background treatment {background!r}")


def background_cap(rates: ObservedRates, source: SourceParams) -> float:
    """Largest background yield consistent with the decoy error counts."""
    return min(1.0, rates.E_nu * rates.Q_nu * math.exp(source.nu) / E0)


def one_decoy_Y1_lower(rates: ObservedRates, source: SourceParams, Y0: float) -> float:
    """Lower bound on the single-photon yield at a given background yield.

    Clamped below at 0; values above 1 mean the statistics are unphysical
    and are clamped to 1 with an ``UnphysicalEstimateWarning``.
    """
    q_mu, q_nu, _, _ = _weighted(rates, source)
    y1 = _y1_lower(source.mu, source.nu, q_mu, q_nu, Y0)
    if y1 > 1.0:
        warnings.warn(f"single-photon yield bound {y1:.6g} > 1, clamped",
                      UnphysicalEstimateWarning, stacklevel=2)
        return 1.0
    return max(y1, 0.0)


def one_decoy_e1_upper(rates: ObservedRates, source: SourceParams, Y0: float,
                       Y1_lower: float) -> float:
    """Upper bound on the single-photon error rate, clamped to [0, 1/2]."""
    if Y1_lower <= 0:
        raise NoSinglePhotonEstimate("no single-photon estimate; key rate 0")
    _, _, eq_mu, eq_nu = _weighted(rates, source)
    e1 = _e1_upper(source.mu, source.nu, eq_mu, eq_nu, Y0, Y1_lower)
    return min(max(e1, 0.0), 0.5)


def key_rate(source: SourceParams, pa_term: float, rates: ObservedRates, f: float) -> float:
    """Key rate per pulse ``p_mu {mu e^-mu Y - f h(E_mu) Q_mu}``, floored at 0."""
    r = source.p_mu * (source.mu * math.exp(-source.mu) * pa_term
                       - f * binary_entropy(rates.E_mu) * rates.Q_mu)
    return max(r, 0.0)


def one_decoy_pa_term(rates: ObservedRates, source: SourceParams,
                      background: str = "separate",
                      grid: int = BACKGROUND_GRID) -> tuple[float, float]:
    """Worst-case privacy-amplification term with ``Y0`` in ``[0, cap]``.

    Returns ``(value, worst Y0 for the yield bound)``.
    """
    w = _weighted(rates, source)
    return background_pa_term(source.mu, source.nu, *w, 0.0,
                              background_cap(rates, source), background, grid)


def one_decoy_key_rate(rates: ObservedRates, source: SourceParams, f: float,
                       background: str = "separate",
                       grid: int = BACKGROUND_GRID) -> float:
    """Two-intensity key rate with the background yield treated as unknown."""
    pa, _ = one_decoy_pa_term(rates, source, background, grid)
    return key_rate(source, pa, rates, f)


def vacuum_weak_key_rate(rates: ObservedRates, source: SourceParams,
                         Y0_measured: float, f: float) -> float:
    """Key rate when a vacuum decoy pins the background yield."""
    if not 0 <= Y0_measured <= 1:
        raise ValueError(f"Y0 must be in [0, 1], got {Y0_measured}")
    w = _weighted(rates, source)
    pa = pa_term_from_bounds(source.mu, source.nu, *w, Y0_measured)
    return key_rate(source, pa, rates, f)


_ZERO_RTOL = 1e-12


@dataclass(frozen=True)
class StarSolution:
    """Exact solution of the model with only one- and two-photon components.

    ``valid`` is False when a yield or error rate falls outside [0, 1];
    ``e2_indeterminate`` is True when ``Y2s == 0`` and ``e2s`` was set to 0.
    """

    Y1s: float
    e1s: float
    Y2s: float
    e2s: float
    valid: bool
    e2_indeterminate: bool = False


def star_solution(rates: ObservedRates, source: SourceParams) -> StarSolution:
    """Closed-form ``(Y1*, e1*, Y2*, e2*)`` after dropping all other photon numbers."""
    mu, nu = source.mu, source.nu
    q_mu, q_nu, eq_mu, eq_nu = _weighted(rates, source)
    d1 = mu * mu * q_nu - nu * nu * q_mu
    if d1 == 0:
        raise StarSolutionSingular("star solution singular: mu^2 Q_nu e^nu == nu^2 Q_mu e^mu")
    d2 = nu * q_mu - mu * q_nu
    # cancellation residue counts as an exact zero
    if abs(d2) <= _ZERO_RTOL * max(nu * q_mu, mu * q_nu):
        d2 = 0.0
    y1 = d1 / (mu * nu * (mu - nu))
    e1 = (mu * mu * eq_nu - nu * nu * eq_mu) / d1
    y2 = 2.0 * d2 / (mu * nu * (mu - nu))
    num2 = nu * eq_mu - mu * eq_nu
    indeterminate = d2 == 0
    e2 = 0.0 if indeterminate else num2 / d2
    valid = all(0 <= v <= 1 for v in (y1, e1, y2, e2))
    return StarSolution(y1, e1, y2, e2, valid, indeterminate)


def correction_determinant(rates: ObservedRates, source: SourceParams) -> float:
    """``nu E_mu Q_mu e^mu - mu E_nu Q_nu e^nu``; its sign flags background influence."""
    _, _, eq_mu, eq_nu = _weighted(rates, source)
    return source.nu * eq_mu - source.mu * eq_nu


def improved_bound(rates: ObservedRates, source: SourceParams, line: TangentLine,
                   check: bool = True) -> float:
    """Tangent-line lower bound on ``Y1 [1 - h(e1)]``.

    Raises ``InfeasibleTangentError`` when the line fails the feasibility
    condition for this source (pass ``check=False`` to evaluate anyway).
    """
    mu, nu = source.mu, source.nu
    if check and feasibility_margin(line, mu, nu) < 0:
        raise InfeasibleTangentError(
            f"tangent at e_t={line.e_t:.6g} infeasible for mu={mu}, nu={nu}; shrink e_t")
    q_mu, q_nu, eq_mu, eq_nu = _weighted(rates, source)
    c1 = mu * mu * q_nu - nu * nu * q_mu
    c2 = mu * mu * eq_nu - nu * nu * eq_mu
    extra = (line.a - line.b) * nu * (nu * eq_mu - mu * eq_nu)
    return (line.a * c1 - line.b * c2 + extra) / (mu * nu * (mu - nu))


def closed_form_terms(rates: ObservedRates, source: SourceParams) -> tuple[float, float]:
    """``(Y1*[1-h(e1*)], (nu/2)(1+log2 e1*) e2* Y2*)`` at the star solution."""
    s = star_solution(rates, source)
    main = s.Y1s * (1.0 - binary_entropy(s.e1s))
    corr = 0.5 * source.nu * (1.0 + math.log2(s.e1s)) * s.e2s * s.Y2s
    return main, corr


def preferred_tangent(rates: ObservedRates, source: SourceParams) -> TangentLine:
    """Tangent at ``e1*``, moved into the feasible region when necessary."""
    try:
        e1s = star_solution(rates, source).e1s
    except StarSolutionSingular:
        e1s = math.nan
    return feasible_tangent(e1s, source.mu, source.nu)


def improved_key_rate(rates: ObservedRates, source: SourceParams, f: float) -> float:
    """Key rate from the tangent-line bound with the recommended tangent point."""
    line = preferred_tangent(rates, source)
    return key_rate(source, improved_bound(rates, source, line), rates, f)


@dataclass(frozen=True)
class EveConfig:
    """Per-photon-number yields ``Y[i]`` and error rates ``e[i]``.

    Index 0 is the background. Arrays stop at the truncation photon number;
    for untruncated configurations the omitted tail has ``Y = e = 1`` and
    weight below 1e-80.
    """

    Y: np.ndarray
    e: np.ndarray
    k0: int
    truncated: bool

    @property
    def objective(self) -> float:
        return float(self.Y[1] * (1.0 - binary_entropy(min(max(self.e[1], 0.0), 1.0))))

    def residuals(self, rates: ObservedRates, source: SourceParams) -> np.ndarray:
        """Residuals of the four linear gain/error constraints."""
        return constraint_residuals(self.Y, self.e, rates, source)


def _poisson_weights(x: float, kmax: int) -> np.ndarray:
    k = np.arange(kmax + 1)
    if x == 0:
        return (k == 0).astype(float)
    return np.exp(k * math.log(x) - x - gammaln(k + 1))


def constraint_residuals(Y, e, rates: ObservedRates, source: SourceParams) -> np.ndarray:
    """``[Q_mu, Q_nu, E_mu Q_mu, E_nu Q_nu]`` model minus observed."""
    Y = np.asarray(Y, float)
    e = np.asarray(e, float)
    pm = _poisson_weights(source.mu, len(Y) - 1)
    pn = _poisson_weights(source.nu, len(Y) - 1)
    return np.array([
        pm @ Y - rates.Q_mu,
        pn @ Y - rates.Q_nu,
        pm @ (Y * e) - rates.E_mu * rates.Q_mu,
        pn @ (Y * e) - rates.E_nu * rates.Q_nu,
    ])


def eve_optimal_config(rates: ObservedRates, source: SourceParams, Y0: float,
                       max_photon: int | None = None) -> EveConfig:
    """Adversary configuration minimizing ``Y1 [1 - h(e1)]`` at fixed ``Y0``.

    All photon numbers from 3 up get error rate 1. Yields are filled from the
    top: ``Y_i = 1`` for ``i >= k0``, one fractional ``Y_{k0-1}``, zero
    below, where ``k0`` is the smallest photon number whose tail weight fits
    in the error budget left after eliminating the single-photon error. The
    remaining one- and two-photon unknowns follow from the four constraints.

    ``max_photon`` truncates the problem: photon numbers above it are absent.
    """
    mu, nu = source.mu, source.nu
    kmax = TAIL_CUTOFF if max_photon is None else int(max_photon)
    if kmax < 2:
        raise ValueError("need at least photon numbers 0..2")
    q_mu, q_nu, eq_mu, eq_nu = _weighted(rates, source)
    budget = eq_mu / mu - eq_nu / nu + (mu - nu) / (2.0 * mu * nu) * Y0
    if abs(budget) <= _ZERO_RTOL * max(eq_mu / mu, eq_nu / nu):
        budget = 0.0
    if budget < 0:
        raise InfeasibleConstraintsError(
            f"error budget {budget:.3g} < 0: constraint set infeasible")
    i = np.arange(kmax + 1, dtype=float)
    fact = np.exp(gammaln(i + 1))
    w = (mu ** (i - 1) - nu ** (i - 1)) / fact
    w[:3] = 0.0
    # tail[k] = sum_{i >= k} w_i ; tail[kmax + 1] = 0
    tail = np.concatenate([np.cumsum(w[::-1])[::-1], [0.0]])
    k0 = next(k for k in range(3, kmax + 2) if tail[k] <= budget)
    Y = np.zeros(kmax + 1)
    e = np.zeros(kmax + 1)
    Y[0], e[0] = Y0, E0
    Y[k0:] = 1.0
    e[3:] = 1.0
    if k0 > 3:
        Y[k0 - 1] = (budget - tail[k0]) / w[k0 - 1]

    # remaining unknowns: Y1, Y2 from gains; e1Y1, e2Y2 from errors
    pm = mu ** i / fact
    pn = nu ** i / fact
    hi_mu, hi_nu = pm[3:] @ Y[3:], pn[3:] @ Y[3:]
    mat = np.array([[mu, mu * mu / 2], [nu, nu * nu / 2]])
    y1, y2 = np.linalg.solve(mat, [q_mu - Y0 - hi_mu, q_nu - Y0 - hi_nu])
    w1, w2 = np.linalg.solve(mat, [eq_mu - E0 * Y0 - hi_mu, eq_nu - E0 * Y0 - hi_nu])
    if abs(w2) <= 1e-12 * max(abs(eq_mu), 1e-300):
        w2 = 0.0
    Y[1], Y[2] = y1, y2
    e[1] = w1 / y1 if y1 > 0 else 0.0
    e[2] = w2 / y2 if y2 > 0 else 0.0
    tol = 1e-9
    if (np.any(Y < -tol) or np.any(Y > 1 + tol) or np.any(e < -tol) or np.any(e > 1 + tol)):
        raise StructuredConfigInapplicable(
            f"structured configuration out of range at truncation {kmax}: Y1={y1:.3g}, "
            f"Y2={y2:.3g}, e1={e[1]:.3g}, e2={e[2]:.3g}")
    return EveConfig(np.clip(Y, 0, 1), np.clip(e, 0, 1), int(k0), max_photon is not None)


def eve_optimal_value(rates: ObservedRates, source: SourceParams, Y0: float,
                      max_photon: int | None = None) -> float:
    """Exact minimum of ``Y1 [1 - h(e1)]`` for a fixed background yield."""
    return eve_optimal_config(rates, source, Y0, max_photon).objective
