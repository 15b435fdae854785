"""Tables behind the CLI commands: figure sweeps, experiment, simulation.

Each builder returns ``(header, rows)`` (plus text where the command prints
a human-readable report). Formatting to CSV happens in :func:`write_table`
so the numbers stay testable as floats.
"""

from __future__ import annotations

import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from . import analytics
from .analytics import CascadeTable, ConstantQber, DarkCountQber, GainReport, Protocol
from .engine import (
    SessionConfig,
    SessionStats,
    analytic_acceptance,
    analytic_detection,
    empirical_gain,
    run_session,
)
from .source import LinkParams

INSECURE = "insecure"

Row = Sequence[object]


@dataclass(frozen=True)
class SweepSpec:
    variable: str
    start: float
    stop: float
    points: int
    scale: str = "linear"

    def __post_init__(self):
        if self.variable not in ("t_link", "distance_km", "mu"):
            raise ValueError(f"unknown sweep variable {self.variable!r}")
        if not self.start < self.stop:
            raise ValueError("sweep start must be below stop")
        if self.points < 2:
            raise ValueError("a sweep needs at least two points")
        if self.scale not in ("linear", "log"):
            raise ValueError("scale must be 'linear' or 'log'")
        if self.scale == "log" and self.start <= 0:
            raise ValueError("log sweeps need a positive start")

    def values(self) -> np.ndarray:
        if self.scale == "log":
            return np.geomspace(self.start, self.stop, self.points)
        return np.linspace(self.start, self.stop, self.points)


def fmt(x: object) -> str:
    if isinstance(x, str):
        return x
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if math.isnan(x):
        return "nan"
    return format(x, ".10g")


def write_table(
    header: Sequence[str], rows: Iterable[Row], out: io.TextIOBase, style: str = "csv"
) -> None:
    """CSV (comma, LF, '.' decimals) or whitespace columns for gnuplot."""
    if style == "gnuplot":
        out.write("# " + " ".join(header) + "\n")
        for row in rows:
            out.write(" ".join(fmt(v) for v in row) + "\n")
        return
    out.write(",".join(header) + "\n")
    for row in rows:
        out.write(",".join(fmt(v) for v in row) + "\n")


def _secure_or_flag(value: float, secure: bool) -> object:
    return value if secure else INSECURE


# --- rate vs transmittance -------------------------------------------------

RATE_CURVE_HEADER = (
    "t_link",
    "margin_lm05",
    "margin_bb84",
    "log10_margin_lm05",
    "log10_margin_bb84",
)


def rate_curve(p: LinkParams, spec: SweepSpec) -> tuple[tuple[str, ...], list[Row]]:
    """Security margin of both protocols over a transmittance sweep."""
    if spec.variable != "t_link":
        raise ValueError("rate curve sweeps t_link")
    if spec.start <= 0 or spec.stop > 1:
        raise ValueError("t_link sweep must stay inside (0, 1]")
    rows = []
    for t in spec.values():
        m_lm = analytics.security_margin(p, Protocol.LM05, t)
        m_bb = analytics.security_margin(p, Protocol.BB84, t)
        rows.append(
            (
                t,
                m_lm,
                m_bb,
                _secure_or_flag(math.log10(m_lm) if m_lm > 0 else 0.0, m_lm > 0),
                _secure_or_flag(math.log10(m_bb) if m_bb > 0 else 0.0, m_bb > 0),
            )
        )
    return RATE_CURVE_HEADER, rows


def margin_crossing(p: LinkParams, protocol: Protocol) -> float:
    """Transmittance at which the security margin changes sign."""
    from scipy.optimize import brentq

    f = lambda t: analytics.security_margin(p, protocol, t)  # noqa: E731
    if f(1.0) <= 0:
        return math.nan
    lo = 1e-12
    if f(lo) > 0:
        return 0.0
    return brentq(f, lo, 1.0, xtol=1e-14)


# --- gain vs distance -------------------------------------------------------

GAIN_DISTANCE_HEADER = ("distance_km", "mu_star_lm05", "g_lm05", "mu_star_bb84", "g_bb84")

DEFAULT_DISTANCES = tuple(float(x) for x in np.arange(0.0, 8.01, 0.5))


def gain_distance(
    p: LinkParams,
    distances: Sequence[float],
    e_model=None,
    *,
    account_cm: bool = False,
    table: CascadeTable | None = None,
    threads: int = 1,
) -> tuple[tuple[str, ...], list[Row]]:
    """Optimal-mu secure gain per distance for both protocols."""
    if not distances or any(d < 0 or not math.isfinite(d) for d in distances):
        raise ValueError("distances must be finite and nonnegative")
    e_model = e_model or DarkCountQber()

    def point(l: float) -> Row:
        q = p.with_(l=float(l))
        row: list[object] = [float(l)]
        for proto in (Protocol.LM05, Protocol.BB84):
            mu, g = analytics.optimize_mu(
                q, proto, e_model, account_cm=account_cm, table=table
            )
            row += [_secure_or_flag(mu, g > 0), _secure_or_flag(g, g > 0)]
        return row

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(point, distances))
    else:
        rows = [point(l) for l in distances]
    return GAIN_DISTANCE_HEADER, rows


# --- experiment --------------------------------------------------------------

EXPERIMENT_HEADER = (
    "interpretation",
    "protocol",
    "p_sign",
    "p_av",
    "yield_bound",
    "beta",
    "e",
    "tau_prime",
    "f_casc",
    "h_e",
    "g_sec",
    "key_rate_bps",
    "ratio_lm05_bb84",
)


@dataclass(frozen=True)
class ExperimentResult:
    interpretation: str
    lm05: GainReport
    bb84: GainReport
    rep_rate: float

    @property
    def ratio(self) -> float:
        return self.lm05.g_sec / self.bb84.g_sec if self.bb84.g_sec > 0 else math.inf

    def rate(self, protocol: Protocol) -> float:
        r = self.lm05 if protocol is Protocol.LM05 else self.bb84
        return r.key_rate(self.rep_rate)


def experiment(
    mu: float = 0.118,
    e: float = 0.0248,
    t_link: float = 0.27,
    eta_b: float = 0.5,
    d_b: float = 2.4e-6,
    rep_rate: float = 20e6,
    *,
    account_cm: bool = False,
    c: float = 0.5,
    table: CascadeTable | None = None,
) -> list[ExperimentResult]:
    """Both readings of the measured transmissivity at the working point.

    ``eta-separate`` treats ``t_link`` as the channel alone and applies the
    detector efficiency on top. ``eta-in-gamma`` takes ``t_link`` to already
    include the detectors. The same ``t_link`` is used for both protocols.
    """
    if not 0 < t_link <= 1:
        raise ValueError("t_link must lie in (0, 1]")
    gamma_c = -10.0 * math.log10(t_link)
    out = []
    for name, folded in (("eta-separate", False), ("eta-in-gamma", True)):
        p = LinkParams(
            mu=mu,
            alpha=0.0,
            l=0.0,
            gamma_c=gamma_c,
            eta_b=eta_b,
            d_b=d_b,
            c=c,
            rep_rate=rep_rate,
            eta_in_gamma=folded,
        )
        lm, bb = (
            analytics.secure_gain(p, proto, e, account_cm=account_cm, table=table)
            for proto in (Protocol.LM05, Protocol.BB84)
        )
        out.append(ExperimentResult(name, lm, bb, rep_rate))
    return out


def experiment_table(results: Sequence[ExperimentResult]) -> list[Row]:
    rows = []
    for res in results:
        for proto, r in ((Protocol.LM05, res.lm05), (Protocol.BB84, res.bb84)):
            rows.append(
                (
                    res.interpretation,
                    proto.value,
                    r.p_sign,
                    r.p_av,
                    r.yield_bound,
                    r.beta,
                    r.e,
                    r.tau_prime,
                    r.f_casc,
                    r.h_e,
                    _secure_or_flag(r.g_sec, r.secure),
                    _secure_or_flag(res.rate(proto), r.secure),
                    res.ratio,
                )
            )
    return rows


def experiment_text(results: Sequence[ExperimentResult], selected: str) -> str:
    first = results[0].lm05
    lines = [
        "LM05 vs BB84 at the experimental working point",
        f"  mu={fmt(first.mu_used)}  e={fmt(first.e)}  p_dark={fmt(first.p_dark)}"
        f"  rep_rate={fmt(results[0].rep_rate)}/s",
        "",
        f"  {'reading':<14}{'protocol':<10}{'p_av':>12}{'beta':>10}{'tau_prime':>11}"
        f"{'g_sec':>12}{'kbit/s':>10}",
    ]
    for res in results:
        mark = "*" if res.interpretation == selected else " "
        for proto, r in ((Protocol.LM05, res.lm05), (Protocol.BB84, res.bb84)):
            lines.append(
                f"{mark} {res.interpretation:<14}{proto.value:<10}{r.p_av:>12.5g}"
                f"{r.beta:>10.4f}{r.tau_prime:>11.4f}{r.g_sec:>12.5g}"
                f"{res.rate(proto) / 1e3:>10.1f}"
            )
    lines.append("")
    for res in results:
        lines.append(f"  gain ratio LM05/BB84 ({res.interpretation}): {res.ratio:.3f}")
    lines.append("  (* = reading selected by --eta-in-gamma)")
    return "\n".join(lines) + "\n"


# --- simulation ----------------------------------------------------------------

SIMULATE_HEADER = (
    "protocol",
    "eve",
    *SessionStats.count_fields(),
    "qber",
    "detection_fraction",
    "detection_analytic",
    "detection_sigma",
    "acceptance_fraction",
    "acceptance_analytic",
    "acceptance_sigma",
    "g_sec",
)


@dataclass(frozen=True)
class SimulationResult:
    cfg: SessionConfig
    stats: SessionStats
    gain: GainReport | None

    @property
    def qber(self) -> float:
        if self.stats.n_tot == 0:
            return math.nan
        return analytics.qber_estimate(self.stats.tally)

    @property
    def detection_analytic(self) -> float:
        return analytic_detection(self.cfg)

    @property
    def acceptance_analytic(self) -> float:
        return analytic_acceptance(self.cfg)

    def _sigma(self, p: float) -> float:
        n = self.stats.sent
        return math.sqrt(max(p * (1 - p), 0.0) / n) if n else math.nan

    @property
    def detection_sigma(self) -> float:
        return self._sigma(self.detection_analytic)

    @property
    def acceptance_sigma(self) -> float:
        return self._sigma(self.acceptance_analytic)

    def z_score(self) -> float:
        """Deviation of the checked MC figure from its closed form, in sigma.

        Without Eve the click rate is checked; with Eve, her acceptance rate.
        """
        if self.cfg.strategy.active:
            diff = self.stats.acceptance_fraction - self.acceptance_analytic
            sigma = self.acceptance_sigma
        else:
            diff = self.stats.detection_fraction - self.detection_analytic
            sigma = self.detection_sigma
        if sigma == 0 or math.isnan(sigma):
            return 0.0 if diff == 0 else math.inf
        return abs(diff) / sigma

    def row(self) -> Row:
        s = self.stats
        eve = self.cfg.strategy.kind.value
        active = self.cfg.strategy.active
        return (
            self.cfg.protocol.value,
            eve,
            *s.counts().values(),
            self.qber,
            s.detection_fraction,
            self.detection_analytic,
            self.detection_sigma,
            s.acceptance_fraction if active else math.nan,
            self.acceptance_analytic if active else math.nan,
            self.acceptance_sigma if active else math.nan,
            _secure_or_flag(self.gain.g_sec, self.gain.secure) if self.gain else INSECURE,
        )


def simulate(
    cfg: SessionConfig,
    *,
    threads: int = 1,
    account_cm: bool = False,
    table: CascadeTable | None = None,
) -> SimulationResult:
    stats = run_session(cfg, threads)
    gain = None
    if stats.n_tot > 0:
        gain = empirical_gain(
            stats, cfg.link, cfg.protocol, account_cm=account_cm, table=table
        )
    return SimulationResult(cfg, stats, gain)


def simulate_text(res: SimulationResult) -> str:
    cfg, s = res.cfg, res.stats
    p = cfg.link
    lines = [
        f"{cfg.protocol.value} session: {cfg.n_pulses} pulses, seed {cfg.seed}, "
        f"eve={cfg.strategy.kind.value} ({cfg.strategy.placement.value})",
        f"  mu={fmt(p.mu)} alpha={fmt(p.alpha)} dB/km l={fmt(p.l)} km "
        f"gamma_c={fmt(p.gamma_c)} dB eta_b={fmt(p.eta)} d_b={fmt(p.d_b)} c={fmt(p.c)}",
        "",
    ]
    for k, v in s.counts().items():
        lines.append(f"  {k:<22}{v}")
    lines.append(f"  {'lost_forward':<22}{s.lost_forward}")
    lines.append(f"  {'lost_backward':<22}{s.lost_backward}")
    lines.append("")
    lines.append(f"  QBER                  {fmt(res.qber)}")
    lines.append(
        f"  detection MC/analytic {fmt(s.detection_fraction)} / "
        f"{fmt(res.detection_analytic)} (sigma {fmt(res.detection_sigma)})"
    )
    if cfg.strategy.active:
        lines.append(
            f"  acceptance MC/analytic {fmt(s.acceptance_fraction)} / "
            f"{fmt(res.acceptance_analytic)} (sigma {fmt(res.acceptance_sigma)})"
        )
    lines.append(f"  self-check deviation  {res.z_score():.2f} sigma")
    g = res.gain
    if g is None:
        lines.append("  empirical gain        n/a (no used bits)")
    else:
        lines.append(
            f"  empirical gain        {fmt(g.g_sec) if g.secure else INSECURE} "
            f"(p_av={fmt(g.p_av)} beta={fmt(g.beta)} e={fmt(g.e)})"
        )
    return "\n".join(lines) + "\n"


def e_model_from(kind: str, value: float):
    if kind == "constant":
        return ConstantQber(value)
    if kind == "dark":
        return DarkCountQber(value)
    raise ValueError(f"unknown QBER model {kind!r}")
