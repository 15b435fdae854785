import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lm05pns.quantum import (
    Basis,
    EncodeOp,
    PolarizationState as S,
    apply_encode,
    basis_of,
    decode_bit,
    measure,
    orthogonal,
)

from conftest import within_sigma

states = st.sampled_from(list(S))


@pytest.mark.parametrize("s, expected", [(S.H, S.V), (S.D, S.A), (S.V, S.H), (S.A, S.D)])
def test_orthogonal(s, expected):
    assert orthogonal(s) is expected


def test_orthogonal_involution():
    assert orthogonal(orthogonal(S.A)) is S.A


def test_basis_membership():
    assert {s for s in S if s.basis is Basis.Z} == {S.H, S.V}
    assert {s for s in S if s.basis is Basis.X} == {S.D, S.A}


@pytest.mark.parametrize(
    "op, s, expected",
    [(EncodeOp.IDENTITY, S.H, S.H), (EncodeOp.FLIP, S.D, S.A), (EncodeOp.FLIP, S.V, S.H)],
)
def test_apply_encode(op, s, expected):
    assert apply_encode(op, s) is expected


@given(states)
def test_flip_is_orthogonal_and_involutive(s):
    assert apply_encode(EncodeOp.FLIP, s) == orthogonal(s)
    assert apply_encode(EncodeOp.FLIP, apply_encode(EncodeOp.FLIP, s)) == s


@given(states, st.sampled_from(list(EncodeOp)), st.integers(0, 2**32 - 1))
def test_deterministic_decoding(s, op, seed):
    rng = np.random.default_rng(seed)
    out = measure(apply_encode(op, s), basis_of(s), rng)
    assert decode_bit(s, out) == int(op)


@given(states, st.sampled_from(list(Basis)), st.integers(0, 2**32 - 1))
def test_measure_lands_in_requested_basis(s, b, seed):
    out = measure(s, b, np.random.default_rng(seed))
    assert out.basis is b
    if s.basis is b:
        assert out is s


def test_conjugate_basis_is_fair(rng):
    n = 100_000
    out = measure(np.full(n, int(S.D)), np.full(n, int(Basis.Z)), rng)
    assert set(np.unique(out)) == {int(S.H), int(S.V)}
    assert within_sigma(int((out == S.H).sum()), n, 0.5)


def test_same_basis_is_deterministic(rng):
    assert measure(S.H, Basis.Z, rng) is S.H
    assert measure(S.A, Basis.X, rng) is S.A
    arr = measure(np.full(1000, int(S.A)), np.full(1000, int(Basis.X)), rng)
    assert np.all(arr == S.A)


def test_array_and_scalar_agree():
    arr = np.arange(4)
    assert list(orthogonal(arr)) == [int(orthogonal(S(i))) for i in range(4)]
    assert list(basis_of(arr)) == [int(S(i).basis) for i in range(4)]
    assert list(apply_encode(np.ones(4, dtype=int), arr)) == [1, 0, 3, 2]
