"""Second and fourth Haar moments: closed forms, Weingarten tensors and Monte Carlo checks.

An index tuple (i1, j1, i2, j2) addresses E[G_{i1 j1} conj(G_{i2 j2})]; a tuple
(i1, j1, i2, j2, i3, j3, i4, j4) addresses
E[G_{i1 j1} G_{i2 j2} conj(G_{i3 j3}) conj(G_{i4 j4})].
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .errors import PreconditionError
from .groups import canonical_J, sample_haar_batch
from .linalg import as_generator
from .weingarten import elements, group_name, pairing_operator, permutation_operator, wg_table


def closed_form_second(group: str, D: int, idx) -> float:
    i1, j1, i2, j2 = idx
    return float(i1 == i2 and j1 == j2) / D


def closed_form_fourth(group: str, D: int, idx) -> float:
    i1, j1, i2, j2, i3, j3, i4, j4 = idx

    def d(a, b):
        return float(a == b)

    g = group_name(group)
    direct = d(i1, i3) * d(i2, i4)
    crossed = d(i1, i4) * d(i2, i3)
    jd = d(j1, j3) * d(j2, j4)
    jc = d(j1, j4) * d(j2, j3)
    if g == "unitary":
        return (direct * jd + crossed * jc) / (D * D - 1) - (direct * jc + crossed * jd) / (D * (D * D - 1))
    if g == "orthogonal":
        ip = d(i1, i2) * d(i3, i4)
        jp = d(j1, j2) * d(j3, j4)
        a = (D + 1) / (D * (D - 1) * (D + 2))
        b = 1 / (D * (D - 1) * (D + 2))
        return a * (ip * jp + direct * jd + crossed * jc) - b * (
            direct * jc + ip * jc + crossed * jd + ip * jd + crossed * jp + direct * jp
        )
    J = canonical_J(D // 2).real
    ip = J[i1, i2] * J[i3, i4]
    jp = J[j1, j2] * J[j3, j4]
    a = (D - 1) / (D * (D + 1) * (D - 2))
    b = 1 / (D * (D + 1) * (D - 2))
    return a * (ip * jp + direct * jd + crossed * jc) - b * (
        direct * jc - ip * jc + crossed * jd + ip * jd - crossed * jp + direct * jp
    )


def moment_tensor(group: str, k: int, D: int) -> np.ndarray:
    """M[I, I', J, J'] = E[(G^{⊗k})_{IJ} conj((G^{⊗k})_{I'J'})] from the Weingarten table."""
    g = group_name(group)
    els = elements(g, k)
    W = wg_table(g, k, D).float_matrix()
    if g == "unitary":
        ops = [permutation_operator(s, D) for s in els]
        left, right = ops, [P.conj() for P in ops]
    else:
        link = None if g == "orthogonal" else canonical_J(D // 2)
        ops = [pairing_operator(m, D, link) for m in els]
        if g == "symplectic":
            Jk = np.ones((1, 1), dtype=complex)
            for _ in range(k):
                Jk = np.kron(Jk, canonical_J(D // 2))
            ops = [P @ Jk.T for P in ops]
        left, right = ops, ops
    L = np.stack(left)
    R = np.stack(right)
    return np.einsum("ab,aij,bkl->ijkl", W, L, R)


def fourth_entry_from_tensor(M: np.ndarray, D: int, idx) -> complex:
    i1, j1, i2, j2, i3, j3, i4, j4 = idx
    return M[i1 * D + i2, i3 * D + i4, j1 * D + j2, j3 * D + j4]


# below this many samples the per-entry sample variance is too noisy to divide by
MIN_SAMPLE_VAR_N = 1000


def entry_power_moment(group: str, D: int, p: int) -> float:
    """E|G_11|^{2p}. Every column is uniform on the unit sphere (complex for U and Sp, real for O)."""
    if group_name(group) == "orthogonal":
        num, den = 1, 1
        for j in range(p):
            num *= 2 * j + 1
            den *= D + 2 * j
        return num / den
    return math.factorial(p) * math.factorial(D - 1) / math.factorial(D + p - 1)


@dataclass(frozen=True)
class MomentCheck:
    group: str
    D: int
    order: int
    samples: int
    entries: int
    max_abs_deviation: float
    max_z: float
    threshold: float

    @property
    def passed(self) -> bool:
        return self.max_z <= self.threshold


def _fourth_entries(group: str, D: int, n_zero: int, rng) -> tuple:
    """All index tuples with a nonzero closed form plus ``n_zero`` random zero ones."""
    nonzero, zero = [], []
    for idx in itertools.product(range(D), repeat=8):
        (nonzero if closed_form_fourth(group, D, idx) != 0 else zero).append(idx)
    g = as_generator(rng)
    pick = g.choice(len(zero), size=min(n_zero, len(zero)), replace=False) if zero else []
    return nonzero + [zero[i] for i in sorted(pick)]


def mc_moment_check(group: str, D: int, samples: int, rng, order: int, n_zero: int = 1000,
                    threshold: float = 5.0, chunk: int = 128) -> MomentCheck:
    """Compare sample means of moment entries with their closed forms.

    Real and imaginary parts are tested separately; z is the deviation in
    units of the standard error of the mean. With fewer than
    ``MIN_SAMPLE_VAR_N`` samples the standard deviation is replaced by the
    Hoelder bound sqrt(E|G_11|^{2 order}), which dominates the true one.
    """
    if order not in (2, 4):
        raise PreconditionError("order must be 2 or 4")
    if samples < 2:
        raise PreconditionError("need at least two samples")
    g = as_generator(rng)
    if order == 2:
        idx = np.array(list(itertools.product(range(D), repeat=4)))
        exact = np.array([closed_form_second(group, D, t) for t in idx])
    else:
        ent = _fourth_entries(group, D, n_zero, g)
        idx = np.array(ent)
        exact = np.array([closed_form_fourth(group, D, t) for t in ent])
    # an entry is a * conj(b) with a, b entries (order 2) or products of two entries (order 4)
    flat = idx[:, 0::2] * D + idx[:, 1::2]
    if order == 2:
        ia, ib = flat[:, 0], flat[:, 1]
    else:
        ia, ib = flat[:, 0] * D * D + flat[:, 1], flat[:, 2] * D * D + flat[:, 3]
    s1 = np.zeros(len(idx), dtype=complex)
    s2r = np.zeros(len(idx))
    s2i = np.zeros(len(idx))
    done = 0
    while done < samples:
        n = min(chunk, samples - done)
        G = sample_haar_batch(group, D, n, g).reshape(n, D * D)
        A = G if order == 2 else (G[:, :, None] * G[:, None, :]).reshape(n, -1)
        x = A[:, ia] * A[:, ib].conj()
        s1 += x.sum(axis=0)
        xr, xi = x.real, x.imag
        s2r += np.einsum("ij,ij->j", xr, xr)
        s2i += np.einsum("ij,ij->j", xi, xi)
        done += n
    mean = s1 / samples
    var_r = np.maximum(s2r / samples - mean.real**2, 0) * samples / (samples - 1)
    var_i = np.maximum(s2i / samples - mean.imag**2, 0) * samples / (samples - 1)
    if samples < MIN_SAMPLE_VAR_N:
        var_r = var_i = np.full(len(idx), entry_power_moment(group, D, order))
    se_r = np.sqrt(var_r / samples)
    se_i = np.sqrt(var_i / samples)
    dev_r = np.abs(mean.real - exact)
    dev_i = np.abs(mean.imag)
    # entries that vanish identically (zero variance) must match to rounding
    z_r = np.where(se_r > 1e-14, dev_r / np.where(se_r > 1e-14, se_r, 1), np.where(dev_r < 1e-12, 0, np.inf))
    z_i = np.where(se_i > 1e-14, dev_i / np.where(se_i > 1e-14, se_i, 1), np.where(dev_i < 1e-12, 0, np.inf))
    return MomentCheck(group_name(group), D, order, samples, len(idx),
                       float(max(dev_r.max(), dev_i.max())), float(max(z_r.max(), z_i.max())), threshold)
