"""Four-state polarization algebra shared by the LM05 and BB84 engines.

States are stored as small integers so that the same helpers work on a
single state or on a numpy array of states:

    H = 0, V = 1  (Z basis)
    D = 2, A = 3  (X basis)

With this layout the basis of a state is ``s >> 1``, its orthogonal partner
is ``s ^ 1`` and the detector it fires in its own basis is ``s & 1``.
"""

from __future__ import annotations

from enum import IntEnum

import numpy as np


class Basis(IntEnum):
    Z = 0
    X = 1


class PolarizationState(IntEnum):
    H = 0  # |0>
    V = 1  # |1>
    D = 2  # |+>
    A = 3  # |->

    @property
    def basis(self) -> Basis:
        return Basis(self >> 1)


class EncodeOp(IntEnum):
    """Alice's message-mode operation; the value is the logical bit."""

    IDENTITY = 0
    FLIP = 1  # i*sigma_y, the equatorial NOT


def basis_of(s):
    """Basis containing ``s`` (scalar state or int array)."""
    if isinstance(s, np.ndarray):
        return s >> 1
    return Basis(int(s) >> 1)


def orthogonal(s):
    """Orthogonal partner of ``s`` within its own basis (H<->V, D<->A)."""
    if isinstance(s, np.ndarray):
        return s ^ 1
    return PolarizationState(int(s) ^ 1)


def apply_encode(op, s):
    """Apply Alice's operation: identity keeps ``s``, flip returns its partner.

    i*sigma_y maps every one of the four equatorial states onto its orthogonal
    state, so Alice can flip without knowing which state she holds.
    """
    if isinstance(s, np.ndarray) or isinstance(op, np.ndarray):
        return np.asarray(s) ^ np.asarray(op)
    return PolarizationState(int(s) ^ int(op))


def measure(s, b, rng: np.random.Generator):
    """Projective measurement of state(s) ``s`` in basis(es) ``b``.

    Same-basis states are returned unchanged; conjugate-basis states collapse
    to either state of ``b`` with probability 1/2. One uniform bit is drawn
    per input regardless of the branch so the stream consumption depends only
    on the input shape.
    """
    s_arr = np.asarray(s)
    b_arr = np.asarray(b)
    coin = rng.integers(0, 2, size=np.broadcast(s_arr, b_arr).shape)
    out = np.where((s_arr >> 1) == b_arr, s_arr, 2 * b_arr + coin)
    if out.ndim == 0:
        return PolarizationState(int(out))
    return out


def decode_bit(prepared, received):
    """Logical bit Bob reads from a state measured in his preparation basis."""
    if isinstance(prepared, np.ndarray) or isinstance(received, np.ndarray):
        return np.asarray(prepared) ^ np.asarray(received)
    return int(prepared) ^ int(received)
