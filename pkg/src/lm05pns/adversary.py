"""Photon-number-splitting eavesdroppers as per-pulse intercept rules.

The measurements Eve uses are represented only by their conclusive-outcome
probabilities, which is all the security argument needs:

* ``M`` (three copies of the same polarization): conclusive about the full
  state with probability 1/2 for n = 3, and taken as always conclusive for
  n > 3.
* ``M'`` (parallel vs antiparallel pair, nonlocal): conclusive about Alice's
  operation with probability 1/4. For reference, with p1, p2 the stored and
  returning photons, its conclusive projector is onto the antisymmetric state
  ``(|psi,psi_perp> - |psi_perp,psi>) / sqrt(2)``. A third photon p3 is kept
  so Eve can forward a correctly encoded copy to Bob.

Every helper has a scalar form returning the dataclasses below and an
``*_many`` array form used by the protocol engine.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Union

import numpy as np

from .quantum import EncodeOp, PolarizationState, apply_encode, orthogonal
from .source import Pulse

P_CONCLUSIVE_M = 0.5
P_CONCLUSIVE_M_PRIME = 0.25


class EveKind(str, Enum):
    NONE = "none"
    PNS_M = "pns-m"
    PNS_M_PRIME = "pns-m-prime"


class BlockPlacement(str, Enum):
    FORWARD_ONLY = "forward"
    SPLIT_BOTH_PATHS = "split"


@dataclass(frozen=True)
class EveStrategy:
    """Which attack runs and where discarded pulses are stopped.

    ``backward_fraction`` is the share of discarded pulses that Eve lets
    reach Alice (one original photon, so the polarization is untouched) and
    only stops on the way back. It is used with ``SPLIT_BOTH_PATHS``.
    """

    kind: EveKind = EveKind.NONE
    placement: BlockPlacement = BlockPlacement.FORWARD_ONLY
    backward_fraction: float = 0.5

    def __post_init__(self):
        if not 0 <= self.backward_fraction <= 1:
            raise ValueError("backward_fraction must lie in [0, 1]")

    @property
    def active(self) -> bool:
        return self.kind is not EveKind.NONE

    @property
    def split(self) -> float:
        if self.placement is BlockPlacement.SPLIT_BOTH_PATHS:
            return self.backward_fraction
        return 0.0


@dataclass(frozen=True)
class Block:
    pass


@dataclass(frozen=True)
class ForwardFresh:
    """Eve sends a single photon she prepared (or encoded) herself."""

    state: PolarizationState
    knows_psi: bool


@dataclass(frozen=True)
class ForwardSubset:
    kept: Pulse
    sent: Pulse


ForwardDecision = Union[Block, ForwardFresh, ForwardSubset]


@dataclass(frozen=True)
class EveKnowledge:
    psi: PolarizationState | None = None
    conclusive: bool = False
    learned_bit: int | None = None


def qnd_count(pulse: Pulse) -> int:
    """Photon number, read without touching the polarization."""
    return pulse.n


# --- vectorized kernels ------------------------------------------------------


def pns_m_conclusive_many(n: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Outcome of QND + ``M`` for each pulse: True where Eve learns psi."""
    n = np.asarray(n)
    coin = rng.random(n.shape) < P_CONCLUSIVE_M
    return (n > 3) | ((n == 3) & coin)


def pns_m_prime_conclusive_many(
    n: np.ndarray, rng: np.random.Generator
) -> np.ndarray:
    """Outcome of ``M'`` for each pulse; only n >= 3 pulses can succeed."""
    n = np.asarray(n)
    coin = rng.random(n.shape) < P_CONCLUSIVE_M_PRIME
    return (n >= 3) & coin


# --- scalar API -------------------------------------------------------------


def pns_m_forward(
    pulse: Pulse, rng: np.random.Generator
) -> tuple[ForwardDecision, EveKnowledge]:
    conclusive = bool(pns_m_conclusive_many(np.array([pulse.n]), rng)[0])
    if not conclusive:
        return Block(), EveKnowledge()
    return (
        ForwardFresh(pulse.state, knows_psi=True),
        EveKnowledge(psi=pulse.state, conclusive=True),
    )


def pns_m_backward(
    encoded: PolarizationState, k: EveKnowledge
) -> tuple[int, PolarizationState]:
    """Read Alice's bit off the returning photon and pass it on unchanged."""
    if not k.conclusive or k.psi is None:
        raise ValueError("pns_m_backward needs a conclusive forward measurement")
    bit = int(encoded == orthogonal(k.psi))
    return bit, PolarizationState(encoded)


@dataclass(frozen=True)
class PrimeStages:
    forward: ForwardDecision
    backward: ForwardDecision


def pns_m_prime(
    pulse: Pulse, alice_op: EncodeOp, rng: np.random.Generator
) -> tuple[PrimeStages, EveKnowledge]:
    """Pair-discrimination attack over one round trip.

    Eve keeps p1 and p3, forwards p2 to Alice, recaptures it and runs ``M'``
    on (p1, p2). A conclusive outcome reveals ``alice_op``; she then applies
    it to p3 and forwards that to Bob. ``alice_op`` is only consulted on the
    conclusive branch, where ``M'`` reveals it.
    """
    if pulse.n < 3:
        # a single pair cannot tell Bob's absolute psi, so nothing to forward
        rng.random()  # keep stream use independent of n
        return PrimeStages(Block(), Block()), EveKnowledge()
    forward = ForwardSubset(
        kept=Pulse(pulse.n - 1, pulse.state), sent=Pulse(1, pulse.state)
    )
    conclusive = bool(pns_m_prime_conclusive_many(np.array([pulse.n]), rng)[0])
    if not conclusive:
        return PrimeStages(forward, Block()), EveKnowledge()
    bit = int(alice_op)
    p3 = apply_encode(EncodeOp(bit), pulse.state)
    return (
        PrimeStages(forward, ForwardFresh(p3, knows_psi=False)),
        EveKnowledge(psi=None, conclusive=True, learned_bit=bit),
    )
