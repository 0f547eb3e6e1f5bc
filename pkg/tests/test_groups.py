import numpy as np
import pytest
from hypothesis import given, strategies as st

from qualm_lab.errors import PreconditionError, SizeError
from qualm_lab.groups import (SeededStream, canonical_J, check_symplectic, derive_seed, sample_haar,
                              sample_haar_batch, sample_haar_orthogonal, sample_haar_symplectic,
                              sample_haar_unitary, splitmix64)
from qualm_lab.linalg import is_unitary

IY = np.array([[0, 1], [-1, 0]])


def test_splitmix_reference_values():
    # first outputs of the reference splitmix64 generator seeded with 0
    assert splitmix64(0) == 0xE220A8397B1DCDAF
    assert splitmix64(0x9E3779B97F4A7C15) == 0x6E789E6AA1B965F4


def test_stream_reproducible():
    a = SeededStream(42, 3).generator.standard_normal(5)
    b = SeededStream(42, 3).generator.standard_normal(5)
    c = SeededStream(42, 4).generator.standard_normal(5)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)
    assert SeededStream(42).child(1) == SeededStream(derive_seed(42, 1))


def test_stream_rejects_bad_seed():
    with pytest.raises(PreconditionError):
        SeededStream(-1)
    with pytest.raises(PreconditionError):
        SeededStream(2**64)


def test_same_stream_same_unitary():
    assert np.array_equal(sample_haar_unitary(4, SeededStream(9)), sample_haar_unitary(4, SeededStream(9)))


def test_d1_unitary_is_phase(rng):
    for _ in range(10):
        assert abs(abs(sample_haar_unitary(1, rng)[0, 0]) - 1) < 1e-12


def test_d1_orthogonal_signs(rng):
    n = 10_000
    s = np.array([sample_haar_orthogonal(1, rng)[0, 0] for _ in range(n)])
    assert set(np.round(s.real).astype(int)) <= {-1, 1}
    assert abs((s.real > 0).mean() - 0.5) <= 5 * np.sqrt(0.25 / n)


@given(st.integers(1, 12), st.integers(0, 2**32 - 1))
def test_samples_in_group(D, seed):
    g = np.random.default_rng(seed)
    assert is_unitary(sample_haar_unitary(D, g))
    O = sample_haar_orthogonal(D, g)
    assert np.all(O.imag == 0)
    assert np.allclose(O @ O.T, np.eye(D), atol=1e-10)
    if D % 2 == 0:
        S = sample_haar_symplectic(D // 2, g)
        assert is_unitary(S)
        assert check_symplectic(S)
        J = canonical_J(D // 2)
        assert np.allclose(-J @ S.T @ J, np.linalg.inv(S), atol=1e-10)


def test_sp1_is_su2(rng):
    for _ in range(200):
        S = sample_haar_symplectic(1, rng)
        assert is_unitary(S)
        assert abs(np.linalg.det(S) - 1) < 1e-10


def test_canonical_J():
    assert np.array_equal(canonical_J(1), IY)
    for h in (1, 2, 4):
        J = canonical_J(h).real.astype(int)
        assert np.array_equal(J @ J, -np.eye(2 * h, dtype=int))
        assert np.array_equal(J.T, -J)
    for ell in (1, 2, 3):
        assert np.array_equal(canonical_J(2 ** (ell - 1)), np.kron(IY, np.eye(2 ** (ell - 1))))


def test_size_cap(rng):
    with pytest.raises(SizeError):
        sample_haar_unitary(2**13, rng)


def test_first_moment_vanishes(rng):
    U = sample_haar_batch("U", 4, 100_000, rng)
    m = U.mean(axis=0)
    se = U.std(axis=0) / np.sqrt(len(U))
    assert np.all(np.abs(m) <= 5 * np.sqrt(2) * se)


def test_orthogonal_second_moment(rng):
    O = sample_haar_batch("O", 4, 100_000, rng).real
    x = O**2
    assert np.all(np.abs(x.mean(axis=0) - 0.25) <= 5 * x.std(axis=0) / np.sqrt(len(x)))


@pytest.mark.parametrize("group", ["U", "O", "Sp"])
def test_batch_matches_group(group, rng):
    G = sample_haar_batch(group, 6, 50, rng)
    for x in G:
        assert is_unitary(x)
        if group == "Sp":
            assert check_symplectic(x)
        if group == "O":
            assert np.all(x.imag == 0)


def test_dispatch(rng):
    with pytest.raises(PreconditionError):
        sample_haar("Q", 4, rng)
    with pytest.raises(PreconditionError):
        sample_haar("Sp", 3, rng)
