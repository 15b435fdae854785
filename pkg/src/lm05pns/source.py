"""Weak-pulse source, lossy channel and threshold detectors.

A pulse is a photon count plus one polarization shared by all its photons.
Loss is modelled photon by photon (binomial thinning), which makes the Monte
Carlo click rate converge to the closed form ``1 - exp(-mu * eta * t)``
exactly rather than to its small-exponent approximation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.special import gammainc

from .quantum import Basis, PolarizationState


@dataclass(frozen=True)
class Pulse:
    n: int
    state: PolarizationState

    def __post_init__(self):
        if self.n < 0:
            raise ValueError(f"photon count must be >= 0, got {self.n}")


@dataclass(frozen=True)
class LinkParams:
    """Device and channel configuration.

    Attributes:
        mu: mean photon number per pulse.
        alpha: fiber absorption in dB/km.
        l: Alice-Bob distance in km.
        gamma_c: constant loss of the terminal equipment in dB.
        eta_b: detector quantum efficiency.
        d_b: dark-count probability per gating window, per detector.
        c: control-mode probability (LM05 only).
        rep_rate: source repetition rate in pulses/s.
        eta_in_gamma: if set, ``eta_b`` is taken to be already included in
            ``gamma_c`` and detectors are treated as unit-efficiency.
    """

    mu: float = 0.1
    alpha: float = 2.5
    l: float = 0.0
    gamma_c: float = 8.0
    eta_b: float = 0.5
    d_b: float = 5e-8
    c: float = 0.5
    rep_rate: float = 20e6
    eta_in_gamma: bool = False

    def __post_init__(self):
        if not self.mu > 0:
            raise ValueError(f"mu must be > 0, got {self.mu}")
        if self.alpha < 0 or self.l < 0 or self.gamma_c < 0:
            raise ValueError("alpha, l and gamma_c must be nonnegative")
        if not 0 <= self.eta_b <= 1:
            raise ValueError(f"eta_b must lie in [0, 1], got {self.eta_b}")
        if not 0 <= self.d_b < 1:
            raise ValueError(f"d_b must lie in [0, 1), got {self.d_b}")
        if not 0 <= self.c <= 1:
            raise ValueError(f"c must lie in [0, 1], got {self.c}")
        if self.rep_rate <= 0:
            raise ValueError("rep_rate must be positive")

    @property
    def eta(self) -> float:
        """Detector efficiency actually applied at the detector."""
        return 1.0 if self.eta_in_gamma else self.eta_b

    def with_(self, **changes) -> "LinkParams":
        return replace(self, **changes)


@dataclass(frozen=True)
class ClickRecord:
    click0: bool
    click1: bool

    @property
    def no_click(self) -> bool:
        return not (self.click0 or self.click1)

    @property
    def double_click(self) -> bool:
        return self.click0 and self.click1

    @property
    def single_click(self) -> int | None:
        """Index of the lone firing detector, or None."""
        if self.click0 != self.click1:
            return 0 if self.click0 else 1
        return None


def poisson_pmf(n: int, mu: float) -> float:
    """Probability of ``n`` photons in a pulse of mean ``mu``."""
    if n < 0 or int(n) != n:
        raise ValueError(f"n must be a nonnegative integer, got {n}")
    if not mu > 0:
        raise ValueError(f"mu must be > 0, got {mu}")
    # log space keeps large n from overflowing mu**n / n!
    return math.exp(n * math.log(mu) - mu - math.lgamma(n + 1))


def poisson_tail(mu: float, n_min: int) -> float:
    """P(n >= n_min) without the cancellation of ``1 - sum(head)``."""
    if not mu > 0:
        raise ValueError(f"mu must be > 0, got {mu}")
    if n_min <= 0:
        return 1.0
    return float(gammainc(n_min, mu))


def sample_photon_number(mu: float, rng: np.random.Generator, size=None):
    if not mu > 0:
        raise ValueError(f"mu must be > 0, got {mu}")
    out = rng.poisson(mu, size=size)
    return int(out) if size is None else out


def transmissivity(alpha: float, l: float, gamma_c: float) -> float:
    """Channel transmissivity ``10**(-(alpha*l + gamma_c)/10)``."""
    if alpha < 0 or l < 0 or gamma_c < 0:
        raise ValueError("alpha, l and gamma_c must be nonnegative")
    # inf * 0 would be nan; a zero-length fiber has no fiber loss
    fiber_db = alpha * l if l > 0 else 0.0
    return 10.0 ** (-(fiber_db + gamma_c) / 10.0)


def thin(pulse: Pulse, t: float, rng: np.random.Generator) -> Pulse:
    """Independent per-photon survival with probability ``t``."""
    if not 0 <= t <= 1:
        raise ValueError(f"t must lie in [0, 1], got {t}")
    return Pulse(int(rng.binomial(pulse.n, t)), pulse.state)


def thin_many(n: np.ndarray, t: float, rng: np.random.Generator) -> np.ndarray:
    return rng.binomial(n, t)


def detect_many(
    n: np.ndarray,
    states: np.ndarray,
    bases: np.ndarray,
    eta: float,
    d_b: float,
    rng: np.random.Generator,
) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized two-detector threshold measurement.

    Each photon is registered with probability ``eta`` and then measured on
    its own. Photons already in the analysis basis all hit the detector
    ``state & 1``; conjugate-basis photons split independently 50/50, i.e.
    the hit count on detector 0 is Binomial(k, 1/2). Each detector also
    dark-fires with probability ``d_b``. Returns boolean ``(click0, click1)``.
    """
    n = np.asarray(n)
    states = np.asarray(states)
    registered = rng.binomial(n, eta)
    same = (states >> 1) == np.asarray(bases)
    split0 = rng.binomial(registered, 0.5)
    own0 = (states & 1) == 0
    hits0 = np.where(same, np.where(own0, registered, 0), split0)
    hits1 = registered - hits0
    dark0 = rng.random(n.shape) < d_b
    dark1 = rng.random(n.shape) < d_b
    return (hits0 > 0) | dark0, (hits1 > 0) | dark1


def detect(
    pulse: Pulse,
    analysis_basis: Basis,
    eta_b: float,
    d_b: float,
    rng: np.random.Generator,
) -> ClickRecord:
    c0, c1 = detect_many(
        np.array([pulse.n]),
        np.array([int(pulse.state)]),
        np.array([int(analysis_basis)]),
        eta_b,
        d_b,
        rng,
    )
    return ClickRecord(bool(c0[0]), bool(c1[0]))
