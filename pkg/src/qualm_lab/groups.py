"""Haar sampling on U(D), O(D) and Sp(D/2), and reproducible random streams."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import PreconditionError, SizeError
from .linalg import MAX_STATE_DIM, as_generator

MAX_GROUP_DIM = MAX_STATE_DIM
_MASK64 = (1 << 64) - 1


def splitmix64(x: int) -> int:
    """One step of the splitmix64 mixer (used to derive per-trial seeds)."""
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def derive_seed(seed: int, index: int) -> int:
    return splitmix64((int(seed) ^ int(index)) & _MASK64)


@dataclass(frozen=True)
class SeededStream:
    """A reproducible random stream identified by ``(seed, stream_id)``.

    Two streams with equal identifiers produce bit-identical sample sequences.
    """

    seed: int
    stream_id: int = 0
    generator: np.random.Generator = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not (0 <= self.seed <= _MASK64 and 0 <= self.stream_id <= _MASK64):
            raise PreconditionError("seed and stream id must be 64-bit unsigned")
        ss = np.random.SeedSequence(entropy=self.seed, spawn_key=(self.stream_id,))
        object.__setattr__(self, "generator", np.random.Generator(np.random.PCG64(ss)))

    def child(self, index: int) -> "SeededStream":
        """Stream for trial ``index``, derived from the seed through splitmix64."""
        return SeededStream(derive_seed(self.seed, index), self.stream_id)


def _check_dim(D: int) -> None:
    if D < 1:
        raise PreconditionError(f"dimension must be positive, got {D}")
    if D > MAX_GROUP_DIM:
        raise SizeError(f"dimension {D} exceeds {MAX_GROUP_DIM}")


def sample_haar_unitary(D: int, rng) -> np.ndarray:
    """Haar-random U(D) via QR of a complex Ginibre matrix with phase correction."""
    _check_dim(D)
    g = as_generator(rng)
    x = g.standard_normal((2, D, D))
    z = (x[0] + 1j * x[1]) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diagonal(r)
    return q * (d / np.abs(d))


def sample_haar_orthogonal(D: int, rng) -> np.ndarray:
    """Haar-random O(D) via QR of a real Gaussian matrix with sign correction."""
    _check_dim(D)
    g = as_generator(rng)
    q, r = np.linalg.qr(g.standard_normal((D, D)))
    return (q * np.sign(np.diagonal(r))).astype(complex)


def canonical_J(halfD: int) -> np.ndarray:
    """The block matrix [[0, I], [-I, 0]] of size 2*halfD."""
    if halfD < 1:
        raise PreconditionError("halfD must be positive")
    n = halfD
    j = np.zeros((2 * n, 2 * n), dtype=complex)
    j[:n, n:] = np.eye(n)
    j[n:, :n] = -np.eye(n)
    return j


def sample_haar_symplectic(halfD: int, rng) -> np.ndarray:
    """Haar-random element of Sp(halfD) = U(2 halfD) ∩ Sp(2 halfD, C).

    Quaternionic Gram-Schmidt: each new column u is a complex Gaussian vector
    orthogonalized against all earlier columns and their partners J conj(u'),
    and its own partner J conj(u) fills the column halfD positions later.
    The resulting S satisfies S J S^T = J by construction.
    """
    if halfD < 1:
        raise PreconditionError("halfD must be positive")
    D = 2 * halfD
    _check_dim(D)
    g = as_generator(rng)
    J = canonical_J(halfD)
    S = np.zeros((D, D), dtype=complex)
    for j in range(halfD):
        v = (g.standard_normal(D) + 1j * g.standard_normal(D)) / np.sqrt(2)
        for _ in range(2):
            if j:
                done = np.concatenate([S[:, :j], S[:, halfD:halfD + j]], axis=1)
                v = v - done @ (done.conj().T @ v)
        u = v / np.linalg.norm(v)
        S[:, j] = u
        S[:, halfD + j] = -J @ u.conj()
    return S


def check_symplectic(S: np.ndarray, tol: float = 1e-10) -> bool:
    D = S.shape[0]
    if D % 2:
        return False
    J = canonical_J(D // 2)
    return float(np.max(np.abs(S @ J @ S.T - J))) < tol


def sample_haar(group: str, D: int, rng) -> np.ndarray:
    """Dispatch on group name ``"U"``, ``"O"`` or ``"Sp"`` (D is the full dimension)."""
    if group == "U":
        return sample_haar_unitary(D, rng)
    if group == "O":
        return sample_haar_orthogonal(D, rng)
    if group == "Sp":
        if D % 2:
            raise PreconditionError("symplectic group needs even D")
        return sample_haar_symplectic(D // 2, rng)
    raise PreconditionError(f"unknown group {group!r}")


def sample_haar_batch(group: str, D: int, n: int, rng) -> np.ndarray:
    """``n`` independent Haar samples stacked as an (n, D, D) array.

    Same constructions as the single-sample functions, vectorized over the
    batch; the random stream is consumed differently, so batch and single
    draws from equal seeds do not coincide.
    """
    _check_dim(D)
    g = as_generator(rng)
    if group == "U":
        x = g.standard_normal((2, n, D, D))
        q, r = np.linalg.qr((x[0] + 1j * x[1]) / np.sqrt(2))
        d = np.diagonal(r, axis1=-2, axis2=-1)
        return q * (d / np.abs(d))[:, None, :]
    if group == "O":
        q, r = np.linalg.qr(g.standard_normal((n, D, D)))
        return (q * np.sign(np.diagonal(r, axis1=-2, axis2=-1))[:, None, :]).astype(complex)
    if group != "Sp":
        raise PreconditionError(f"unknown group {group!r}")
    if D % 2:
        raise PreconditionError("symplectic group needs even D")
    h = D // 2
    J = canonical_J(h)
    S = np.zeros((n, D, D), dtype=complex)
    for j in range(h):
        x = g.standard_normal((2, n, D))
        v = (x[0] + 1j * x[1]) / np.sqrt(2)
        if j:
            done = np.concatenate([S[:, :, :j], S[:, :, h:h + j]], axis=2)
            for _ in range(2):
                v = v - np.einsum("nij,nj->ni", done, np.einsum("nij,ni->nj", done.conj(), v))
        u = v / np.linalg.norm(v, axis=1, keepdims=True)
        S[:, :, j] = u
        S[:, :, h + j] = -(u.conj() @ J.T)
    return S
