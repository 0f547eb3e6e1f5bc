"""Dense complex linear algebra: states, tensor products, partial traces, measurements.

Basis ordering is big-endian: in a register of several qubits the first qubit is
the most significant bit of the computational-basis index.
"""

from __future__ import annotations

from typing import Iterable, Sequence

import numpy as np

from .errors import ShapeError, SizeError, ValidationError

MAX_KRON_ENTRIES = 2**24
MAX_STATE_QUBITS = 12
MAX_STATE_DIM = 2**MAX_STATE_QUBITS

NORM_TOL = 1e-12
HERMITIAN_TOL = 1e-10
TRACE_TOL = 1e-10
EIG_FLOOR = -1e-9
COMPLETENESS_TOL = 1e-9
UNITARY_TOL = 1e-10


def as_generator(rng) -> np.random.Generator:
    """Accept a numpy Generator or anything exposing one as ``.generator``."""
    if isinstance(rng, np.random.Generator):
        return rng
    gen = getattr(rng, "generator", None)
    if isinstance(gen, np.random.Generator):
        return gen
    raise TypeError(f"expected a random stream, got {type(rng).__name__}")


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=complex, copy=True)
    a.setflags(write=False)
    return a


def check_finite(a: np.ndarray, what: str = "matrix") -> None:
    if not np.all(np.isfinite(a)):
        raise ValidationError(f"{what} has non-finite entries")


def is_unitary(u: np.ndarray, tol: float = UNITARY_TOL) -> bool:
    u = np.asarray(u)
    if u.ndim != 2 or u.shape[0] != u.shape[1]:
        return False
    return float(np.max(np.abs(u @ u.conj().T - np.eye(u.shape[0])))) < tol


class PureState:
    """A normalized state vector. Immutable after construction."""

    __slots__ = ("_v",)

    def __init__(self, amplitudes, *, validate: bool = True):
        v = np.asarray(amplitudes, dtype=complex).reshape(-1)
        if validate:
            check_finite(v, "state")
            if v.size > MAX_STATE_DIM:
                raise SizeError(f"state dimension {v.size} exceeds {MAX_STATE_DIM}")
            n = np.linalg.norm(v)
            if abs(n - 1.0) > NORM_TOL:
                raise ValidationError(f"state norm {n!r} differs from 1")
        self._v = _frozen(v)

    @classmethod
    def basis(cls, dim: int, index: int) -> "PureState":
        v = np.zeros(dim, dtype=complex)
        v[index] = 1.0
        return cls(v)

    @classmethod
    def normalized(cls, amplitudes) -> "PureState":
        v = np.asarray(amplitudes, dtype=complex).reshape(-1)
        return cls(v / np.linalg.norm(v))

    @property
    def vector(self) -> np.ndarray:
        return self._v

    @property
    def dim(self) -> int:
        return self._v.size

    def projector(self) -> np.ndarray:
        return np.outer(self._v, self._v.conj())

    def density(self) -> "DensityMatrix":
        return DensityMatrix(self.projector(), validate=False)

    def __repr__(self) -> str:
        return f"PureState(dim={self.dim})"


class DensityMatrix:
    """A positive semidefinite, unit-trace Hermitian matrix. Immutable after construction.

    Validation uses the tolerances above; violations raise ``ValidationError``.
    """

    __slots__ = ("_m",)

    def __init__(self, entries, *, validate: bool = True):
        m = np.asarray(entries, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ShapeError(f"density matrix must be square, got {m.shape}")
        if validate:
            if m.shape[0] > MAX_STATE_DIM:
                raise SizeError(f"density matrix dimension {m.shape[0]} exceeds {MAX_STATE_DIM}")
            check_finite(m, "density matrix")
            if np.max(np.abs(m - m.conj().T)) > HERMITIAN_TOL:
                raise ValidationError("density matrix is not Hermitian")
            tr = np.trace(m).real
            if abs(tr - 1.0) > TRACE_TOL:
                raise ValidationError(f"density matrix trace {tr!r} differs from 1")
            lo = np.linalg.eigvalsh((m + m.conj().T) / 2)[0]
            if lo < EIG_FLOOR:
                raise ValidationError(f"density matrix has eigenvalue {lo!r} below {EIG_FLOOR}")
        self._m = _frozen(m)

    @classmethod
    def from_pure(cls, psi) -> "DensityMatrix":
        v = psi.vector if isinstance(psi, PureState) else np.asarray(psi, dtype=complex)
        return cls(np.outer(v, v.conj()))

    @classmethod
    def maximally_mixed(cls, dim: int) -> "DensityMatrix":
        return cls(np.eye(dim, dtype=complex) / dim)

    @property
    def matrix(self) -> np.ndarray:
        return self._m

    @property
    def dim(self) -> int:
        return self._m.shape[0]

    def __repr__(self) -> str:
        return f"DensityMatrix(dim={self.dim})"


def as_density(state) -> DensityMatrix:
    if isinstance(state, DensityMatrix):
        return state
    if isinstance(state, PureState):
        return state.density()
    a = np.asarray(state, dtype=complex)
    if a.ndim == 1:
        return DensityMatrix.from_pure(PureState(a))
    return DensityMatrix(a)


def kron(a, b) -> np.ndarray:
    """Kronecker product with a cap of ``MAX_KRON_ENTRIES`` output entries."""
    a = np.atleast_2d(np.asarray(a, dtype=complex))
    b = np.atleast_2d(np.asarray(b, dtype=complex))
    n = a.shape[0] * b.shape[0] * a.shape[1] * b.shape[1]
    if n > MAX_KRON_ENTRIES:
        raise SizeError(f"kron result has {n} entries, cap is {MAX_KRON_ENTRIES}")
    return np.kron(a, b)


def kron_all(mats: Sequence) -> np.ndarray:
    out = np.ones((1, 1), dtype=complex)
    for m in mats:
        out = kron(out, m)
    return out


def partial_trace(rho, dims: Sequence[int], keep: Iterable[int]) -> DensityMatrix:
    """Reduced state on the factors listed in ``keep`` (returned in ascending order)."""
    m = rho.matrix if isinstance(rho, DensityMatrix) else np.asarray(rho, dtype=complex)
    dims = [int(d) for d in dims]
    if any(d < 1 for d in dims) or int(np.prod(dims)) != m.shape[0] or m.shape[0] != m.shape[1]:
        raise ShapeError(f"dims {dims} do not match a {m.shape} matrix")
    keep = sorted(set(int(i) for i in keep))
    if any(i < 0 or i >= len(dims) for i in keep):
        raise ShapeError(f"keep {keep} out of range for {len(dims)} factors")
    n = len(dims)
    t = m.reshape(dims + dims)
    letters = [chr(ord("a") + i) for i in range(n)]
    upper = [chr(ord("A") + i) for i in range(n)]
    cols = [upper[i] if i in keep else letters[i] for i in range(n)]
    out = "".join(letters[i] for i in keep) + "".join(upper[i] for i in keep)
    red = np.einsum("".join(letters) + "".join(cols) + "->" + out, t)
    dk = int(np.prod([dims[i] for i in keep])) if keep else 1
    return DensityMatrix(red.reshape(dk, dk), validate=False)


def _basis_matrix(basis) -> np.ndarray:
    if isinstance(basis, np.ndarray):
        return np.asarray(basis, dtype=complex)
    cols = [b.vector if isinstance(b, PureState) else np.asarray(b, dtype=complex) for b in basis]
    return np.stack(cols, axis=1)


def born_measure(state, basis, rng) -> tuple[int, PureState]:
    """Projective measurement in an orthonormal basis.

    ``basis`` is a sequence of ``PureState`` or a matrix whose columns are the
    basis vectors. Returns the outcome index and the post-measurement state.
    """
    y = _basis_matrix(basis)
    rho = as_density(state).matrix
    if y.shape[0] != rho.shape[0]:
        raise ShapeError("basis and state dimensions differ")
    if y.shape[1] != y.shape[0] or np.max(np.abs(y.conj().T @ y - np.eye(y.shape[1]))) > COMPLETENESS_TOL:
        raise ValidationError("measurement basis is not orthonormal and complete")
    p = np.einsum("ij,ik,kj->j", y.conj(), rho, y).real
    i = _sample_index(p, rng)
    return i, PureState(y[:, i], validate=False)


class Povm:
    """Rank-one POVM {lambda_j |y_j><y_j|}; vectors are stored as matrix columns."""

    __slots__ = ("weights", "vectors")

    def __init__(self, weights, vectors, *, validate: bool = True):
        w = np.asarray(weights, dtype=float).reshape(-1)
        y = _basis_matrix(vectors)
        if y.ndim != 2 or y.shape[1] != w.size:
            raise ShapeError("one vector per weight is required")
        if validate:
            check_finite(y, "POVM vectors")
            if np.any(w <= 0) or np.any(w > 1 + 1e-12):
                raise ValidationError("POVM weights must lie in (0, 1]")
            if np.max(np.abs(np.linalg.norm(y, axis=0) - 1)) > 1e-9:
                raise ValidationError("POVM vectors must be normalized")
            s = (y * w) @ y.conj().T
            if np.max(np.abs(s - np.eye(y.shape[0]))) > COMPLETENESS_TOL:
                raise ValidationError("POVM is not complete")
        w.setflags(write=False)
        y = np.array(y, copy=True)
        y.setflags(write=False)
        self.weights = w
        self.vectors = y

    @classmethod
    def computational(cls, dim: int) -> "Povm":
        return cls(np.ones(dim), np.eye(dim, dtype=complex), validate=False)

    @classmethod
    def from_basis(cls, u) -> "Povm":
        u = np.asarray(u, dtype=complex)
        if not is_unitary(u, 1e-9):
            raise ValidationError("basis matrix is not unitary")
        return cls(np.ones(u.shape[1]), u, validate=False)

    @classmethod
    def from_pairs(cls, pairs) -> "Povm":
        pairs = list(pairs)
        return cls([lam for lam, _ in pairs], [y for _, y in pairs])

    @property
    def dim(self) -> int:
        return self.vectors.shape[0]

    @property
    def size(self) -> int:
        return self.weights.size

    def probabilities(self, rho: np.ndarray) -> np.ndarray:
        y = self.vectors
        if rho.ndim == 1:
            return self.weights * np.abs(y.conj().T @ rho) ** 2
        return self.weights * np.einsum("ij,ik,kj->j", y.conj(), rho, y).real

    def element(self, j: int) -> np.ndarray:
        """B = lambda_j |y_j><y_j| as a matrix."""
        v = self.vectors[:, j]
        return self.weights[j] * np.outer(v, v.conj())


def _sample_index(p: np.ndarray, rng) -> int:
    p = np.clip(np.asarray(p, dtype=float), 0.0, None)
    c = np.cumsum(p)
    u = as_generator(rng).random() * c[-1]
    return int(min(np.searchsorted(c, u, side="right"), p.size - 1))


def povm_measure(state, povm, rng) -> int:
    if not isinstance(povm, Povm):
        povm = Povm.from_pairs(povm)
    rho = as_density(state).matrix
    if povm.dim != rho.shape[0]:
        raise ShapeError("POVM and state dimensions differ")
    return _sample_index(povm.probabilities(rho), rng)
