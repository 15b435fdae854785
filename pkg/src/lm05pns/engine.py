"""Monte Carlo sessions of LM05 and BB84 over the modelled link.

Pulses are processed in fixed-size chunks, each with its own generator
spawned from the session seed. Chunk boundaries do not depend on the number
of worker threads, so a given ``(config, seed)`` always yields the same
``SessionStats`` regardless of parallelism.

Within a chunk every pulse follows the per-pulse rules of the protocol, just
evaluated on arrays. States use the integer layout of :mod:`lm05pns.quantum`.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, fields, replace
from functools import reduce

import numpy as np

from . import analytics
from .adversary import (
    EveKind,
    EveStrategy,
    pns_m_conclusive_many,
    pns_m_prime_conclusive_many,
)
from .analytics import GainReport, Protocol, QberTally
from .source import LinkParams, detect_many, transmissivity

log = logging.getLogger(__name__)

CHUNK_SIZE = 1 << 16


@dataclass(frozen=True)
class SessionConfig:
    link: LinkParams
    protocol: Protocol = Protocol.LM05
    strategy: EveStrategy = EveStrategy()
    n_pulses: int = 100_000
    seed: int = 0
    gamma_split: float = 0.5
    # Alice's control-mode detectors; None means "same as Bob's"
    alice_eta: float | None = None
    alice_d_b: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "protocol", Protocol.parse(self.protocol))
        if self.n_pulses <= 0:
            raise ValueError("n_pulses must be positive")
        if not 0 <= self.gamma_split <= 1:
            raise ValueError("gamma_split must lie in [0, 1]")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")


@dataclass(frozen=True)
class SessionStats:
    """Integer tallies of one session; ``merge`` adds them field by field.

    For LM05, ``sent`` counts message-mode rounds only (control-mode rounds
    go to ``cm_rounds``) and ``n_tot`` is every message-mode round in which
    Bob's detectors fired. For BB84, ``n_tot`` counts clicks surviving
    sifting.
    """

    protocol: Protocol
    link: LinkParams
    pulses: int = 0
    sent: int = 0
    fwd_survived: int = 0
    bwd_survived: int = 0
    detected: int = 0
    n_tot: int = 0
    n_err: int = 0
    n_d: int = 0
    cm_rounds: int = 0
    cm_trials: int = 0
    cm_errors: int = 0
    eve_accepted: int = 0
    eve_blocked: int = 0
    eve_blocked_forward: int = 0
    eve_blocked_backward: int = 0
    eve_bit_errors: int = 0

    @classmethod
    def zero(cls, protocol: Protocol, link: LinkParams) -> "SessionStats":
        return cls(Protocol.parse(protocol), link)

    @staticmethod
    def count_fields() -> list[str]:
        return [f.name for f in fields(SessionStats) if f.name not in ("protocol", "link")]

    def counts(self) -> dict[str, int]:
        return {k: getattr(self, k) for k in self.count_fields()}

    @property
    def lost_forward(self) -> int:
        return self.sent - self.fwd_survived

    @property
    def lost_backward(self) -> int:
        return self.fwd_survived - self.bwd_survived

    @property
    def tally(self) -> QberTally:
        return QberTally(self.n_err, self.n_d, self.n_tot)

    @property
    def detection_fraction(self) -> float:
        return self.detected / self.sent if self.sent else float("nan")

    @property
    def acceptance_fraction(self) -> float:
        return self.eve_accepted / self.sent if self.sent else float("nan")


def merge(a: SessionStats, b: SessionStats) -> SessionStats:
    if a.protocol is not b.protocol or a.link != b.link:
        raise ValueError("cannot merge stats from different protocol/link settings")
    return replace(a, **{k: getattr(a, k) + getattr(b, k) for k in a.count_fields()})


# --- per-chunk kernels ------------------------------------------------------


def _lm05_chunk(cfg: SessionConfig, m: int, rng: np.random.Generator) -> SessionStats:
    link, eve = cfg.link, cfg.strategy
    fiber = transmissivity(link.alpha, link.l, 0.0)
    dev_f = transmissivity(0.0, 0.0, cfg.gamma_split * link.gamma_c)
    dev_b = transmissivity(0.0, 0.0, (1.0 - cfg.gamma_split) * link.gamma_c)
    eta = link.eta
    eta_a = eta if cfg.alice_eta is None else cfg.alice_eta
    d_a = link.d_b if cfg.alice_d_b is None else cfg.alice_d_b

    psi = rng.integers(0, 4, m)
    n = rng.poisson(link.mu, m)
    cm = rng.random(m) < link.c
    bit = rng.integers(0, 2, m)
    alice_basis = rng.integers(0, 2, m)

    # forward trip: Bob -> (Eve) -> Alice
    if eve.kind is EveKind.NONE:
        concl = np.zeros(m, dtype=bool)
        fwd = n
        n_a = rng.binomial(fwd, fiber * dev_f)
    else:
        if eve.kind is EveKind.PNS_M:
            concl = pns_m_conclusive_many(n, rng)
            fwd = concl.astype(np.int64)
        else:
            concl = pns_m_prime_conclusive_many(n, rng)
            fwd = (n >= 3).astype(np.int64)
        # discarded pulses Eve lets through to stop on the way back
        sneak = (fwd == 0) & (n >= 1) & (rng.random(m) < eve.split)
        fwd = np.where(sneak, 1, fwd)
        # Eve replaces the fiber; Alice's own equipment loss remains
        n_a = rng.binomial(fwd, dev_f)

    # control mode: BB84-style check by Alice
    a0, a1 = detect_many(n_a, psi, alice_basis, eta_a, d_a, rng)
    cm_ok = cm & (alice_basis == (psi >> 1)) & (a0 ^ a1)
    cm_err = cm_ok & (a1.astype(np.int64) != (psi & 1))

    # message mode: identity or flip
    enc = psi ^ bit

    # backward trip: Alice -> (Eve) -> Bob
    if eve.kind is EveKind.NONE:
        accepted = np.zeros(m, dtype=bool)
        eve_bit_err = accepted
        n_b = rng.binomial(n_a, fiber * dev_b)
    else:
        accepted = concl & (n_a >= 1)
        if eve.kind is EveKind.PNS_M:
            learned = (enc == (psi ^ 1)).astype(np.int64)
        else:
            # conclusive M' reveals the operation; p3 is encoded with it
            learned = bit
            enc = np.where(accepted, psi ^ learned, enc)
        eve_bit_err = accepted & (learned != bit)
        n_b = rng.binomial(accepted.astype(np.int64), dev_b)

    b0, b1 = detect_many(n_b, enc, psi >> 1, eta, link.d_b, rng)
    mm = ~cm
    clicked = mm & (b0 | b1)
    double = mm & b0 & b1
    single = mm & (b0 ^ b1)
    decoded = b1.astype(np.int64) ^ (psi & 1)
    err = single & (decoded != bit)

    sent = int(mm.sum())
    stats = dict(
        pulses=m,
        sent=sent,
        fwd_survived=int((mm & (n_a >= 1)).sum()),
        bwd_survived=int((mm & (n_b >= 1)).sum()),
        detected=int(clicked.sum()),
        n_tot=int(clicked.sum()),
        n_err=int(err.sum()),
        n_d=int(double.sum()),
        cm_rounds=int(cm.sum()),
        cm_trials=int(cm_ok.sum()),
        cm_errors=int(cm_err.sum()),
    )
    if eve.active:
        # photons lost inside Alice's equipment are neither accepted nor
        # blocked by Eve; they show up only in lost_forward
        blocked_fwd = int((mm & (fwd == 0)).sum())
        blocked_bwd = int((mm & ~accepted & (n_a >= 1)).sum())
        stats.update(
            eve_accepted=int((mm & accepted).sum()),
            eve_blocked=blocked_fwd + blocked_bwd,
            eve_blocked_forward=blocked_fwd,
            eve_blocked_backward=blocked_bwd,
            eve_bit_errors=int((mm & eve_bit_err).sum()),
        )
    return SessionStats(cfg.protocol, link, **stats)


def _bb84_chunk(cfg: SessionConfig, m: int, rng: np.random.Generator) -> SessionStats:
    link, eve = cfg.link, cfg.strategy
    fiber = transmissivity(link.alpha, link.l, 0.0)
    dev = transmissivity(0.0, 0.0, link.gamma_c)

    psi = rng.integers(0, 4, m)
    n = rng.poisson(link.mu, m)
    bob_basis = rng.integers(0, 2, m)

    if eve.active:
        # BB84 PNS: keep one photon of every multiphoton pulse, block the rest
        accepted = n >= 2
        n_b = rng.binomial(np.where(accepted, n - 1, 0), dev)
    else:
        accepted = np.zeros(m, dtype=bool)
        n_b = rng.binomial(n, fiber * dev)

    b0, b1 = detect_many(n_b, psi, bob_basis, link.eta, link.d_b, rng)
    clicked = b0 | b1
    sifted = clicked & (bob_basis == (psi >> 1))
    double = sifted & b0 & b1
    err = sifted & (b0 ^ b1) & (b1.astype(np.int64) != (psi & 1))

    survived = int((n_b >= 1).sum())
    stats = dict(
        pulses=m,
        sent=m,
        fwd_survived=survived,
        bwd_survived=survived,
        detected=int(clicked.sum()),
        n_tot=int(sifted.sum()),
        n_err=int(err.sum()),
        n_d=int(double.sum()),
    )
    if eve.active:
        stats.update(
            eve_accepted=int(accepted.sum()),
            eve_blocked=m - int(accepted.sum()),
            eve_blocked_forward=m - int(accepted.sum()),
        )
    return SessionStats(cfg.protocol, link, **stats)


def _chunk_sizes(n_pulses: int, chunk: int) -> list[int]:
    full, rest = divmod(n_pulses, chunk)
    return [chunk] * full + ([rest] if rest else [])


def run_session(
    cfg: SessionConfig, threads: int = 1, chunk_size: int = CHUNK_SIZE
) -> SessionStats:
    kernel = _lm05_chunk if cfg.protocol is Protocol.LM05 else _bb84_chunk
    sizes = _chunk_sizes(cfg.n_pulses, chunk_size)
    seeds = np.random.SeedSequence(cfg.seed).spawn(len(sizes))

    def work(job):
        m, ss = job
        return kernel(cfg, m, np.random.default_rng(ss))

    jobs = list(zip(sizes, seeds))
    log.debug("running %d chunks of %s on %d thread(s)", len(jobs), cfg.protocol.value, threads)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(work, jobs))
    else:
        parts = [work(j) for j in jobs]
    return reduce(merge, parts, SessionStats.zero(cfg.protocol, cfg.link))


def run_lm05(cfg: SessionConfig, threads: int = 1) -> SessionStats:
    if cfg.protocol is not Protocol.LM05:
        raise ValueError("run_lm05 needs protocol LM05")
    return run_session(cfg, threads)


def run_bb84(cfg: SessionConfig, threads: int = 1) -> SessionStats:
    if cfg.protocol is not Protocol.BB84:
        raise ValueError("run_bb84 needs protocol BB84")
    return run_session(cfg, threads)


def empirical_gain(
    stats: SessionStats,
    link: LinkParams,
    protocol: Protocol,
    *,
    account_cm: bool = False,
    table: analytics.CascadeTable | None = None,
) -> GainReport:
    """Secure gain using the measured QBER and click rate."""
    protocol = Protocol.parse(protocol)
    if stats.n_tot == 0 or stats.sent == 0:
        raise ValueError("empty session: no used bits to estimate from")
    e = analytics.qber_estimate(stats.tally)
    p_av = stats.detected / stats.sent
    p_dark = 2.0 * link.d_b
    p_sign = max((p_av - p_dark) / (1.0 - p_dark), 0.0)
    return analytics.gain_report(
        protocol,
        p_sign=p_sign,
        p_dark=p_dark,
        yield_=analytics.yield_bound(protocol, link.mu),
        e=e,
        mu=link.mu,
        total_path_km=analytics.path_km(link, protocol),
        prefactor=analytics.prefactor(link, protocol, account_cm),
        table=table,
    )


def analytic_detection(cfg: SessionConfig) -> float:
    """Closed-form click probability for a no-Eve session of ``cfg``."""
    p = cfg.link
    p_sign = analytics.signal_probability(p, analytics.path_km(p, cfg.protocol))
    return analytics.detection_probability(p_sign, p.d_b)


def analytic_acceptance(cfg: SessionConfig) -> float:
    """Expected eavesdropper acceptance fraction for ``cfg.strategy``.

    For LM05 the photon Eve forwards must also survive Alice's share of the
    equipment loss before she can read it on the way back.
    """
    mu = cfg.link.mu
    kind = cfg.strategy.kind
    if kind is EveKind.NONE:
        return 0.0
    if cfg.protocol is Protocol.BB84:
        return analytics.pns_yield_bb84(mu)
    dev_f = transmissivity(0.0, 0.0, cfg.gamma_split * cfg.link.gamma_c)
    if kind is EveKind.PNS_M:
        return analytics.pns_yield_lm05(mu) * dev_f
    return analytics.pns_yield_m_prime(mu) * dev_f
