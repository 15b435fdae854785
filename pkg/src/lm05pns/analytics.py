"""Closed-form security figures for LM05 and BB84 under PNS attacks.

Everything here is a pure function of its arguments. The central quantity is
the gain of secure bits

    G = K * p_av * [beta * (1 - tau(e / beta)) - f_casc(e) * h(e)]

with ``beta = (p_av - Y) / p_av``, ``Y`` the fraction of pulses a PNS
eavesdropper can read in full (``Y_lm05`` or ``Y_bb84``), and ``K`` the
protocol prefactor (1 for LM05, 1/2 for the BB84 basis sifting).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace
from enum import Enum
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import minimize_scalar

from .source import LinkParams, poisson_pmf, poisson_tail, transmissivity



class Protocol(str, Enum):
    LM05 = "LM05"
    BB84 = "BB84"

    @classmethod
    def parse(cls, value: "str | Protocol") -> "Protocol":
        if isinstance(value, Protocol):
            return value
        try:
            return cls(value.upper())
        except ValueError:
            raise ValueError(f"unknown protocol {value!r}") from None


class CascadeRangeWarning(UserWarning):
    """QBER fell outside the Cascade efficiency table and was clamped."""


# --- detection -------------------------------------------------------------


def path_km(p: LinkParams, protocol: Protocol) -> float:
    """Distance from photon creation to detection: 2l for LM05, l for BB84."""
    return 2.0 * p.l if Protocol.parse(protocol) is Protocol.LM05 else p.l


def signal_probability_t(mu: float, eta: float, t_link: float) -> float:
    return -math.expm1(-mu * eta * t_link)


def signal_probability(p: LinkParams, path_km: float) -> float:
    """Click probability from signal photons, ``1 - exp(-mu*eta*t_link)``.

    ``path_km`` is the fiber length actually traversed; pass ``2*l`` for
    LM05 and ``l`` for BB84.
    """
    t = transmissivity(p.alpha, path_km, p.gamma_c)
    return signal_probability_t(p.mu, p.eta, t)


def detection_probability(p_sign: float, d_b: float) -> float:
    """Total click probability including dark counts from both detectors."""
    p_dark = 2.0 * d_b
    return p_sign + p_dark - p_sign * p_dark


# --- eavesdropper yields ---------------------------------------------------


def _check_mu(mu: float) -> None:
    if not mu > 0:
        raise ValueError(f"mu must be > 0, got {mu}")


def pns_yield_lm05(mu: float) -> float:
    """Pulses readable by PNS_M: half of the 3-photon ones plus all n > 3.

    Equal to ``1 - (1 + mu + mu**2/2 + mu**3/12) * exp(-mu)``; evaluated as
    a tail sum so that small ``mu`` keeps full relative precision.
    """
    _check_mu(mu)
    return 0.5 * poisson_pmf(3, mu) + poisson_tail(mu, 4)


def pns_yield_bb84(mu: float) -> float:
    """Multiphoton probability ``1 - (1 + mu) * exp(-mu)``."""
    _check_mu(mu)
    return poisson_tail(mu, 2)


def pns_yield_m_prime(mu: float) -> float:
    """Pulses readable with the pair measurement: a quarter of n >= 3."""
    _check_mu(mu)
    return 0.25 * poisson_tail(mu, 3)


def yield_bound(protocol: Protocol, mu: float) -> float:
    if Protocol.parse(protocol) is Protocol.LM05:
        return pns_yield_lm05(mu)
    return pns_yield_bb84(mu)


# --- entropy, privacy amplification, error correction ----------------------


def _check_unit(e: float, name: str = "e") -> None:
    if not 0.0 <= e <= 1.0:
        raise ValueError(f"{name} must lie in [0, 1], got {e}")


def binary_entropy(e: float) -> float:
    _check_unit(e)
    if e == 0.0 or e == 1.0:
        return 0.0
    return -e * math.log2(e) - (1.0 - e) * math.log2(1.0 - e)


def tau(e: float) -> float:
    """Fraction of the corrected key discarded in privacy amplification."""
    _check_unit(e)
    if e <= 0.5:
        return math.log2(1.0 + 4.0 * e - 4.0 * e * e)
    return 1.0


@dataclass(frozen=True)
class CascadeTable:
    """Cascade efficiency anchors, linearly interpolated and clamped."""

    qber: tuple[float, ...]
    efficiency: tuple[float, ...]

    def __post_init__(self):
        if len(self.qber) != len(self.efficiency) or len(self.qber) < 2:
            raise ValueError("need at least two (qber, efficiency) anchors")
        if any(b <= a for a, b in zip(self.qber, self.qber[1:])):
            raise ValueError("qber column must be strictly increasing")

    def __call__(self, e: float) -> float:
        if e < 0:
            raise ValueError(f"e must be >= 0, got {e}")
        if e > self.qber[-1]:
            warnings.warn(
                f"QBER {e:.4g} above Cascade table range, clamped to {self.qber[-1]}",
                CascadeRangeWarning,
                stacklevel=2,
            )
        return float(np.interp(e, self.qber, self.efficiency))


# reconciliation overhead of Cascade at a few reference QBERs
DEFAULT_CASCADE = CascadeTable((0.01, 0.05, 0.10, 0.15), (1.16, 1.16, 1.22, 1.35))


def load_cascade_table(path: str | Path) -> CascadeTable:
    """Read a two-column ``qber efficiency`` text file (``#`` comments ok)."""
    qs, fs = [], []
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.replace(",", " ").split()
        if len(parts) != 2:
            raise ValueError(f"{path}:{lineno}: expected two columns, got {raw!r}")
        qs.append(float(parts[0]))
        fs.append(float(parts[1]))
    return CascadeTable(tuple(qs), tuple(fs))


def f_cascade(e: float, table: CascadeTable | None = None) -> float:
    return (table or DEFAULT_CASCADE)(e)


# --- QBER -----------------------------------------------------------------


@dataclass(frozen=True)
class QberTally:
    n_err: int
    n_d: int
    n_tot: int

    def __post_init__(self):
        if min(self.n_err, self.n_d, self.n_tot) < 0:
            raise ValueError("counts must be nonnegative")
        if self.n_err + self.n_d > self.n_tot:
            raise ValueError("n_err + n_d cannot exceed n_tot")


def qber_estimate(t: QberTally) -> float:
    """Error rate with each ambiguous double click counted as half an error."""
    if t.n_tot == 0:
        raise ZeroDivisionError("cannot estimate QBER from zero used bits")
    return (t.n_err + t.n_d / 2) / t.n_tot


@dataclass(frozen=True)
class ConstantQber:
    e: float

    def __call__(self, p_sign: float, p_av: float, d_b: float) -> float:
        return self.e


@dataclass(frozen=True)
class DarkCountQber:
    """Misalignment floor on signal clicks plus coin-flip dark clicks."""

    e_det: float = 0.0248

    def __call__(self, p_sign: float, p_av: float, d_b: float) -> float:
        if p_av <= 0:
            return 0.5
        return min((self.e_det * p_sign + d_b) / p_av, 0.5)


QberModel = Callable[[float, float, float], float]


# --- secure gain -------------------------------------------------------------


@dataclass(frozen=True)
class GainReport:
    protocol: Protocol
    p_sign: float
    p_dark: float
    p_av: float
    yield_bound: float
    beta: float
    e: float
    tau_prime: float
    f_casc: float
    h_e: float
    g_sec: float
    mu_used: float
    total_path_km: float
    prefactor: float = 1.0

    @property
    def secure(self) -> bool:
        return self.beta > 0 and self.g_sec > 0

    def bracket(self) -> float:
        """Per-detected-bit secure fraction; negative means insecure.

        For ``beta <= 0`` this continues as ``beta - f*h`` so that it is
        continuous and increasing across the security boundary, which gives
        the optimizer a slope to follow in the insecure region.
        """
        if self.beta > 0:
            return self.beta * (1.0 - self.tau_prime) - self.f_casc * self.h_e
        return self.beta - self.f_casc * self.h_e

    def raw_gain(self) -> float:
        return self.prefactor * self.p_av * self.bracket()

    def recompute(self) -> float:
        """Gain rebuilt from the report's own fields."""
        if not self.beta > 0:
            return 0.0
        return max(self.raw_gain(), 0.0)

    def key_rate(self, rep_rate: float) -> float:
        return self.g_sec * rep_rate


def gain_report(
    protocol: Protocol,
    *,
    p_sign: float,
    p_dark: float,
    yield_: float,
    e: float,
    mu: float,
    total_path_km: float,
    prefactor: float,
    table: CascadeTable | None = None,
) -> GainReport:
    """Assemble a report from detection, yield and QBER figures."""
    _check_unit(e)
    p_av = p_sign + p_dark - p_sign * p_dark
    if p_av > 0:
        beta = (p_av - yield_) / p_av
    else:
        beta = -math.inf if yield_ > 0 else 0.0
    h_e = binary_entropy(e)
    f = f_cascade(e, table)
    if beta > 0:
        tp = tau(min(e / beta, 1.0))
    else:
        tp = math.nan
    report = GainReport(
        protocol=Protocol.parse(protocol),
        p_sign=p_sign,
        p_dark=p_dark,
        p_av=p_av,
        yield_bound=yield_,
        beta=beta,
        e=e,
        tau_prime=tp,
        f_casc=f,
        h_e=h_e,
        g_sec=0.0,
        mu_used=mu,
        total_path_km=total_path_km,
        prefactor=prefactor,
    )
    return replace(report, g_sec=report.recompute())


def prefactor(p: LinkParams, protocol: Protocol, account_cm: bool = False) -> float:
    """1/2 for BB84 sifting; 1 for LM05, or 1 - c with control-mode overhead."""
    if Protocol.parse(protocol) is Protocol.BB84:
        return 0.5
    return (1.0 - p.c) if account_cm else 1.0


def secure_gain(
    p: LinkParams,
    protocol: Protocol,
    e: float,
    *,
    account_cm: bool = False,
    table: CascadeTable | None = None,
) -> GainReport:
    protocol = Protocol.parse(protocol)
    dist = path_km(p, protocol)
    return gain_report(
        protocol,
        p_sign=signal_probability(p, dist),
        p_dark=2.0 * p.d_b,
        yield_=yield_bound(protocol, p.mu),
        e=e,
        mu=p.mu,
        total_path_km=dist,
        prefactor=prefactor(p, protocol, account_cm),
        table=table,
    )


def evaluate(
    p: LinkParams,
    protocol: Protocol,
    e_model: QberModel,
    *,
    account_cm: bool = False,
    table: CascadeTable | None = None,
) -> GainReport:
    """``secure_gain`` with the QBER supplied by ``e_model``."""
    protocol = Protocol.parse(protocol)
    p_sign = signal_probability(p, path_km(p, protocol))
    p_av = detection_probability(p_sign, p.d_b)
    e = e_model(p_sign, p_av, p.d_b)
    return secure_gain(p, protocol, e, account_cm=account_cm, table=table)


def security_margin(p: LinkParams, protocol: Protocol, t_link: float) -> float:
    """``p_sign(t_link) - Y(mu)``; positive inside the secure region."""
    if not 0 < t_link <= 1:
        raise ValueError(f"t_link must lie in (0, 1], got {t_link}")
    return signal_probability_t(p.mu, p.eta, t_link) - yield_bound(protocol, p.mu)


# --- optimisation ------------------------------------------------------------


MU_RANGE = (1e-4, 2.0)
_SCAN_POINTS = 400


def optimize_mu(
    p: LinkParams,
    protocol: Protocol,
    e_model: QberModel | None = None,
    *,
    account_cm: bool = False,
    table: CascadeTable | None = None,
    mu_range: tuple[float, float] = MU_RANGE,
    tol: float = 1e-5,
) -> tuple[float, float]:
    """Mean photon number maximising the secure gain at fixed distance.

    A geometric scan over ``mu_range`` brackets the peak and golden-section
    search (scipy's bounded Brent, golden-section with parabolic steps)
    refines it to ``tol`` in mu. The search follows the unclamped
    gain, so it also homes in on the least-insecure mu when nothing is
    secure. Returns ``(nan, 0.0)`` if no mu gives positive gain.
    """
    e_model = e_model or DarkCountQber()
    protocol = Protocol.parse(protocol)

    def raw(mu: float) -> float:
        return evaluate(
            p.with_(mu=mu), protocol, e_model, account_cm=account_cm, table=table
        ).raw_gain()

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", CascadeRangeWarning)
        grid = np.geomspace(mu_range[0], mu_range[1], _SCAN_POINTS)
        values = [raw(mu) for mu in grid]
        i = int(np.argmax(values))
        lo = grid[max(i - 1, 0)]
        hi = grid[min(i + 1, len(grid) - 1)]
        res = minimize_scalar(lambda mu: -raw(mu), bounds=(lo, hi), method="bounded",
                              options={"xatol": tol})
        mu_star, g_star = res.x, -res.fun
    if values[i] > g_star:
        mu_star, g_star = float(grid[i]), values[i]
    if not g_star > 0:
        return math.nan, 0.0
    return float(mu_star), float(g_star)


def max_secure_distance(
    p: LinkParams,
    protocol: Protocol,
    e_model: QberModel | None = None,
    *,
    account_cm: bool = False,
    table: CascadeTable | None = None,
    resolution_km: float = 0.01,
    l_cap: float = 1000.0,
) -> float:
    """Largest distance (to ``resolution_km``) with positive optimal gain."""

    def secure(l: float) -> bool:
        _, g = optimize_mu(
            p.with_(l=l), protocol, e_model, account_cm=account_cm, table=table
        )
        return g > 0

    if not secure(0.0):
        return 0.0
    lo, hi = 0.0, 1.0
    while secure(hi):
        lo, hi = hi, 2.0 * hi
        if hi > l_cap:
            return l_cap
    while hi - lo > resolution_km:
        mid = 0.5 * (lo + hi)
        if secure(mid):
            lo = mid
        else:
            hi = mid
    return lo


def gain_curve(
    p: LinkParams,
    protocol: Protocol,
    distances: Sequence[float],
    e_model: QberModel | None = None,
    **kwargs,
) -> list[tuple[float, float, float]]:
    """``(l, mu_star, g_star)`` for each distance."""
    return [
        (l, *optimize_mu(p.with_(l=l), protocol, e_model, **kwargs)) for l in distances
    ]
