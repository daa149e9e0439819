"""Binary entropy and its tangent-line relaxation."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

# tangent point used when the empirical error rate is zero
ET_FLOOR = 1e-6
# backoff below the feasibility boundary when the preferred point is infeasible
FEASIBILITY_BACKOFF = 1e-6


def binary_entropy(e):
    """Binary entropy in bits, with ``h(0) = h(1) = 0``.

    Accepts scalars or arrays. Values outside [0, 1] raise ``ValueError``.
    """
    arr = np.asarray(e, dtype=float)
    if np.any((arr < 0) | (arr > 1)) or np.any(np.isnan(arr)):
        raise ValueError(f"binary entropy needs e in [0, 1], got {e}")
    with np.errstate(divide="ignore", invalid="ignore"):
        out = -arr * np.log2(arr) - (1 - arr) * np.log2(1 - arr)
    out = np.where((arr == 0) | (arr == 1), 0.0, out)
    if np.ndim(out) == 0:
        return float(out)
    return out


@dataclass(frozen=True)
class TangentLine:
    """Line ``a - b*e`` touching ``1 - h(e)`` at ``e = e_t`` from below.

    ``clipped`` records that ``e_t`` is not the preferred tangent point but was
    moved (floored or shrunk into the feasible region).
    """

    e_t: float
    a: float
    b: float
    clipped: bool = False

    def __call__(self, e):
        return self.a - self.b * np.asarray(e, dtype=float)


def tangent_at(e_t: float, clipped: bool = False) -> TangentLine:
    """Tangent of ``1 - h`` at ``e_t`` in (0, 1)."""
    if not 0.0 < e_t < 1.0:
        raise ValueError(f"tangent point must be in (0, 1), got {e_t}")
    log_1m = math.log2(1.0 - e_t)
    return TangentLine(e_t, log_1m + 1.0, log_1m - math.log2(e_t), clipped)


def feasibility_margin(line: TangentLine, mu: float, nu: float) -> float:
    """Signed margin ``(a-b)*nu/(mu+nu) + (b-2a)``.

    The linear relaxation of the privacy-amplification term drops the
    background-yield term only when this is non-negative.
    """
    if not mu >= nu > 0:
        raise ValueError(f"need mu >= nu > 0, got mu={mu}, nu={nu}")
    return (line.a - line.b) * nu / (mu + nu) + (line.b - 2.0 * line.a)


def _margin_at(e_t: float, ratio: float) -> float:
    log_1m = math.log2(1.0 - e_t)
    a = log_1m + 1.0
    b = log_1m - math.log2(e_t)
    return (a - b) * ratio + (b - 2.0 * a)


def max_feasible_et(mu: float, nu: float) -> float:
    """Largest tangent point in (0, 0.5) with a non-negative margin.

    The margin is positive near 0, negative just below 0.5 and vanishes at
    0.5 itself, so the search runs on (1e-12, 0.5 - 1e-9).
    """
    if not mu >= nu > 0:
        raise ValueError(f"need mu >= nu > 0, got mu={mu}, nu={nu}")
    ratio = nu / (mu + nu)
    lo, hi = 1e-12, 0.5 - 1e-9
    if _margin_at(hi, ratio) >= 0:
        return hi
    return brentq(lambda e: _margin_at(e, ratio), lo, hi, xtol=1e-12)


def feasible_tangent(e_preferred: float, mu: float, nu: float) -> TangentLine:
    """Tangent at ``e_preferred``, moved into the feasible region if needed.

    Non-positive or missing preferred points fall back to ``ET_FLOOR``;
    points above the feasibility boundary are shrunk to the boundary minus
    ``FEASIBILITY_BACKOFF``.
    """
    if not e_preferred > ET_FLOOR or not math.isfinite(e_preferred):
        return tangent_at(ET_FLOOR, clipped=True)
    cap = max_feasible_et(mu, nu) - FEASIBILITY_BACKOFF
    if e_preferred > cap:
        return tangent_at(cap, clipped=True)
    return tangent_at(e_preferred)
