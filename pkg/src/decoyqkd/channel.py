"""Simulated fiber link for phase-randomized weak coherent pulses."""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.special import gammaln

from .entropy import binary_entropy

POISSON_TAIL = 1e-15


@dataclass(frozen=True)
class SourceParams:
    """Signal/decoy intensities and how often each is sent.

    ``p_vac`` is the probability of a vacuum decoy; it is zero for the
    two-intensity scheme.
    """

    mu: float = 0.6
    nu: float = 0.2
    p_mu: float = 6 / 7
    p_nu: float = 1 / 7
    p_vac: float = 0.0

    def __post_init__(self):
        if not self.mu > self.nu >= 0:
            raise ValueError(f"need mu > nu >= 0, got mu={self.mu}, nu={self.nu}")
        probs = (self.p_mu, self.p_nu, self.p_vac)
        if any(p < 0 or p > 1 for p in probs):
            raise ValueError(f"selection probabilities must be in [0, 1], got {probs}")
        if abs(sum(probs) - 1.0) > 1e-12:
            raise ValueError(f"selection probabilities must sum to 1, got {sum(probs)}")

    @classmethod
    def with_vacuum(cls, mu=0.6, nu=0.2, p_mu=0.75, p_nu=0.125, p_vac=0.125):
        """Three-intensity source; defaults to the 6:1:1 split."""
        return cls(mu, nu, p_mu, p_nu, p_vac)

    @property
    def has_vacuum(self) -> bool:
        return self.p_vac > 0


@dataclass(frozen=True)
class ChannelParams:
    """Fiber and detector parameters. ``Y0`` is the dark-count yield."""

    length_km: float = 0.0
    alpha_db_per_km: float = 0.21
    eta_d: float = 0.72
    Y0: float = 3e-8
    e_d: float = 0.015
    e0: float = 0.5

    def __post_init__(self):
        if self.length_km < 0:
            raise ValueError(f"length must be >= 0, got {self.length_km}")
        for name in ("eta_d", "Y0", "e_d"):
            val = getattr(self, name)
            if not 0 <= val <= 1:
                raise ValueError(f"{name} must be in [0, 1], got {val}")
        if self.e0 != 0.5:
            raise ValueError("vacuum error rate e0 is fixed to 1/2")
        if self.alpha_db_per_km < 0:
            raise ValueError("loss coefficient must be >= 0")

    @property
    def eta(self) -> float:
        """Overall transmittance, detector efficiency included."""
        return self.eta_d * 10.0 ** (-self.alpha_db_per_km * self.length_km / 10.0)

    def at(self, length_km: float) -> "ChannelParams":
        return replace(self, length_km=length_km)


@dataclass(frozen=True)
class ObservedRates:
    """Asymptotic gains and quantum bit error rates of both intensities."""

    Q_mu: float
    Q_nu: float
    E_mu: float
    E_nu: float

    def __post_init__(self):
        for q, e in ((self.Q_mu, self.E_mu), (self.Q_nu, self.E_nu)):
            if not (0 <= q <= 1 and 0 <= e <= 1):
                raise ValueError(f"invalid gain/error pair Q={q}, E={e}")


@dataclass(frozen=True)
class FiniteCounts:
    """Pulse, click and error counts per intensity.

    Counts may be real-valued (expected counts) or integers (sampled or
    measured). Vacuum-decoy fields stay zero for the two-intensity scheme.
    """

    N: float
    N_mu: float
    N_nu: float
    n_mu: float
    n_nu: float
    m_mu: float
    m_nu: float
    N_vac: float = 0.0
    n_vac: float = 0.0
    m_vac: float = 0.0

    def __post_init__(self):
        for name in ("N", "N_mu", "N_nu", "n_mu", "n_nu", "m_mu", "m_nu", "N_vac", "n_vac", "m_vac"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        for tag in ("mu", "nu", "vac"):
            pulses = getattr(self, f"N_{tag}")
            clicks = getattr(self, f"n_{tag}")
            errors = getattr(self, f"m_{tag}")
            if errors > clicks * (1 + 1e-12):
                raise ValueError(f"m_{tag}={errors} exceeds n_{tag}={clicks}")
            if clicks > pulses * (1 + 1e-12):
                raise ValueError(f"n_{tag}={clicks} exceeds N_{tag}={pulses}")
        total = self.N_mu + self.N_nu + self.N_vac
        if abs(total - self.N) > 1e-9 * max(self.N, 1.0):
            raise ValueError(f"pulse counts {total} do not add up to N={self.N}")

    @property
    def c_mu(self) -> float:
        return self.n_mu - self.m_mu

    @property
    def c_nu(self) -> float:
        return self.n_nu - self.m_nu


def poisson_pmf(intensity, k):
    """Poisson probability of ``k`` photons, evaluated in log space."""
    k = np.asarray(k)
    if np.any(k < 0):
        raise ValueError("photon number must be >= 0")
    if intensity < 0:
        raise ValueError("intensity must be >= 0")
    if intensity == 0:
        out = np.where(k == 0, 1.0, 0.0)
    else:
        out = np.exp(k * math.log(intensity) - intensity - gammaln(k + 1))
    return float(out) if out.ndim == 0 else out


def photon_cutoff(intensity: float, tail: float = POISSON_TAIL) -> int:
    """Smallest ``k`` whose Poisson tail mass beyond ``k`` is below ``tail``."""
    k = 0
    cdf = 0.0
    term = math.exp(-intensity)
    while True:
        cdf += term
        if 1.0 - cdf < tail or term == 0.0 and k > intensity:
            return k
        k += 1
        term *= intensity / k


def simulate_rates(source: SourceParams, channel: ChannelParams) -> ObservedRates:
    """Gains and error rates of the standard dark-count plus misalignment model."""
    eta = channel.eta
    out = []
    for x in (source.mu, source.nu):
        click = -math.expm1(-x * eta)
        # 1 - (1 - Y0) exp(-x eta), rearranged to avoid cancellation
        gain = click + channel.Y0 * (1.0 - click)
        err = channel.e0 * channel.Y0 + channel.e_d * click
        out.append((gain, err / gain if gain > 0 else 0.0))
    (q_mu, e_mu), (q_nu, e_nu) = out
    return ObservedRates(q_mu, q_nu, e_mu, e_nu)


def expected_counts(source: SourceParams, rates: ObservedRates, N: float,
                    Y0: float | None = None) -> FiniteCounts:
    """Expected (real-valued) counts for ``N`` pulses.

    ``Y0`` is required when the source carries a vacuum decoy; vacuum clicks
    are dark counts with error rate 1/2.
    """
    if N < 0:
        raise ValueError("N must be >= 0")
    N_mu, N_nu, N_vac = source.p_mu * N, source.p_nu * N, source.p_vac * N
    n_mu, n_nu = N_mu * rates.Q_mu, N_nu * rates.Q_nu
    n_vac = m_vac = 0.0
    if N_vac > 0:
        if Y0 is None:
            raise ValueError("vacuum-decoy counts need the background yield Y0")
        n_vac = N_vac * Y0
        m_vac = 0.5 * n_vac
    return FiniteCounts(
        N=N, N_mu=N_mu, N_nu=N_nu,
        n_mu=n_mu, n_nu=n_nu,
        m_mu=n_mu * rates.E_mu, m_nu=n_nu * rates.E_nu,
        N_vac=N_vac, n_vac=n_vac, m_vac=m_vac,
    )


def infinite_decoy_yield(channel: ChannelParams, complement_eta: bool = False):
    """Single-photon yield and error rate ``(Y1, e1)`` of the channel model.

    ``complement_eta=True`` replaces ``eta`` by ``1 - eta`` in both
    expressions (transmittance swapped for loss); that variant
    grows with distance and is kept only for auditing.
    """
    t = 1.0 - channel.eta if complement_eta else channel.eta
    y1 = channel.Y0 + (1.0 - channel.Y0) * t
    e1y1 = channel.e0 * channel.Y0 + channel.e_d * (1.0 - channel.Y0) * t
    return y1, (e1y1 / y1 if y1 > 0 else 0.0)


def infinite_decoy_reference(channel: ChannelParams, complement_eta: bool = False) -> float:
    """True privacy-amplification term ``Y1 [1 - h(e1)]`` of the channel."""
    y1, e1 = infinite_decoy_yield(channel, complement_eta)
    return y1 * (1.0 - binary_entropy(min(e1, 1.0)))
