"""Permutations, pair partitions, coset types and the trace contractions built on them.

Internally every index is 0-based. ``PairPartition.from_one_based`` and the
string forms use the usual 1-based notation, e.g. ``{13}{24}``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache
from math import comb, factorial
from typing import Sequence

import numpy as np

from .errors import PreconditionError, ShapeError, SizeError, ValidationError

MAX_PERM_K = 8
MAX_PAIR_K = 6


@dataclass(frozen=True, order=True)
class CycleType:
    """Weakly decreasing parts summing to k."""

    parts: tuple

    def __post_init__(self):
        p = tuple(sorted((int(x) for x in self.parts), reverse=True))
        if any(x < 1 for x in p):
            raise ValidationError(f"cycle type parts must be positive: {p}")
        object.__setattr__(self, "parts", p)

    @property
    def k(self) -> int:
        return sum(self.parts)

    @property
    def nontrivial_length(self) -> int:
        return sum(x for x in self.parts if x > 1)

    @property
    def num_parts(self) -> int:
        return len(self.parts)

    @property
    def length(self) -> int:
        """|sigma| = k minus the number of parts (minimal number of transpositions)."""
        return self.k - len(self.parts)

    def __str__(self) -> str:
        return "(" + ",".join(map(str, self.parts)) + ")"


@dataclass(frozen=True, order=True)
class Permutation:
    """A bijection of {0..k-1} in one-line notation: ``image[i]`` is sigma(i)."""

    image: tuple

    def __post_init__(self):
        im = tuple(int(x) for x in self.image)
        if sorted(im) != list(range(len(im))):
            raise ValidationError(f"not a permutation: {im}")
        object.__setattr__(self, "image", im)

    @classmethod
    def identity(cls, k: int) -> "Permutation":
        return cls(tuple(range(k)))

    @classmethod
    def from_one_line(cls, image: Sequence[int]) -> "Permutation":
        """Build from 1-based one-line notation, e.g. [2, 1, 3]."""
        return cls(tuple(int(x) - 1 for x in image))

    @classmethod
    def from_cycles(cls, k: int, cycles: Sequence[Sequence[int]]) -> "Permutation":
        """Build from 1-based cycles, e.g. ``from_cycles(3, [(1, 2, 3)])``."""
        im = list(range(k))
        for c in cycles:
            c = [int(x) - 1 for x in c]
            for a, b in zip(c, c[1:] + c[:1]):
                im[a] = b
        return cls(tuple(im))

    @property
    def k(self) -> int:
        return len(self.image)

    def __call__(self, i: int) -> int:
        return self.image[i]

    def compose(self, other: "Permutation") -> "Permutation":
        """self ∘ other, i.e. i -> self(other(i))."""
        return Permutation(tuple(self.image[j] for j in other.image))

    def inverse(self) -> "Permutation":
        inv = [0] * self.k
        for i, j in enumerate(self.image):
            inv[j] = i
        return Permutation(tuple(inv))

    def cycles(self) -> list:
        """Cycles as tuples (b, sigma(b), sigma^2(b), ...), each starting at its minimum."""
        seen = [False] * self.k
        out = []
        for s in range(self.k):
            if seen[s]:
                continue
            c = []
            i = s
            while not seen[i]:
                seen[i] = True
                c.append(i)
                i = self.image[i]
            out.append(tuple(c))
        return out

    def num_cycles(self) -> int:
        return len(self.cycles())

    def cycle_type(self) -> CycleType:
        return CycleType(tuple(len(c) for c in self.cycles()))

    def sign(self) -> int:
        return -1 if (self.k - self.num_cycles()) % 2 else 1

    def __str__(self) -> str:
        cs = [c for c in self.cycles() if len(c) > 1]
        if not cs:
            return "e"
        return "".join("(" + " ".join(str(i + 1) for i in c) + ")" for c in cs)


@dataclass(frozen=True, order=True)
class PairPartition:
    """A perfect matching of {0..2k-1} stored canonically.

    Pairs are ordered so that each pair is increasing and the first elements
    increase from pair to pair.
    """

    pairs: tuple

    def __post_init__(self):
        ps = tuple(sorted(tuple(sorted((int(a), int(b)))) for a, b in self.pairs))
        flat = [x for p in ps for x in p]
        if sorted(flat) != list(range(len(flat))):
            raise ValidationError(f"not a pair partition of {{0..{len(flat) - 1}}}: {ps}")
        object.__setattr__(self, "pairs", ps)

    @classmethod
    def identity(cls, k: int) -> "PairPartition":
        return cls(tuple((2 * i, 2 * i + 1) for i in range(k)))

    @classmethod
    def from_one_based(cls, pairs) -> "PairPartition":
        return cls(tuple((a - 1, b - 1) for a, b in pairs))

    @property
    def k(self) -> int:
        return len(self.pairs)

    def partner(self) -> list:
        p = [0] * (2 * self.k)
        for a, b in self.pairs:
            p[a] = b
            p[b] = a
        return p

    def sigma(self) -> Permutation:
        """sigma_m in S_2k with sigma_m(i) = m(i), the i-th entry of the flattened pair list."""
        return Permutation(tuple(x for p in self.pairs for x in p))

    def sign(self) -> int:
        return self.sigma().sign()

    def __str__(self) -> str:
        return "".join("{" + f"{a + 1}{b + 1}" + "}" for a, b in self.pairs)


@lru_cache(maxsize=None)
def enumerate_permutations(k: int) -> tuple:
    """All k! permutations in lexicographic order."""
    if k < 0:
        raise PreconditionError("k must be non-negative")
    if k > MAX_PERM_K:
        raise SizeError(f"k={k} exceeds permutation cap {MAX_PERM_K}")
    return tuple(Permutation(p) for p in itertools.permutations(range(k)))


def _matchings(items: tuple):
    if not items:
        yield ()
        return
    a = items[0]
    for j in range(1, len(items)):
        rest = items[1:j] + items[j + 1:]
        for m in _matchings(rest):
            yield ((a, items[j]),) + m


@lru_cache(maxsize=None)
def enumerate_pair_partitions(k: int) -> tuple:
    """All (2k-1)!! canonical pair partitions of {0..2k-1}."""
    if k < 0:
        raise PreconditionError("k must be non-negative")
    if k > MAX_PAIR_K:
        raise SizeError(f"k={k} exceeds pair-partition cap {MAX_PAIR_K}")
    return tuple(PairPartition(m) for m in _matchings(tuple(range(2 * k))))


def coset_type(m: PairPartition) -> CycleType:
    """Coset type of m via the alternating f_e / f_m walk.

    Starting from the smallest unused element i, the walk
    i, f_e(i), f_m(f_e(i)), f_e(...), ... closes into a block B_j of even size b_j;
    the coset type is (b_1/2, b_2/2, ...) sorted in decreasing order.
    """
    n = 2 * m.k
    fm = m.partner()
    used = [False] * n
    sizes = []
    for i in range(n):
        if used[i]:
            continue
        b = 0
        x = i
        step_e = True
        while True:
            used[x] = True
            b += 1
            x = (x ^ 1) if step_e else fm[x]
            step_e = not step_e
            if x == i and step_e:
                break
        if b % 2:
            raise ValidationError("odd block in coset construction")
        sizes.append(b // 2)
    return CycleType(tuple(sizes))


def pairing_loops(m: PairPartition, n: PairPartition) -> CycleType:
    """Loop type of the graph m ∪ n: one part per loop, equal to its number of m-edges."""
    if m.k != n.k:
        raise ShapeError("pairings of different sizes")
    fm, fn = m.partner(), n.partner()
    used = [False] * (2 * m.k)
    sizes = []
    for i in range(2 * m.k):
        if used[i]:
            continue
        c = 0
        x = i
        while True:
            used[x] = True
            y = fm[x]
            used[y] = True
            c += 1
            x = fn[y]
            if x == i:
                break
        sizes.append(c)
    return CycleType(tuple(sizes))


def _check_square_same(mats) -> int:
    if not mats:
        return 1
    D = None
    for a in mats:
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ShapeError("matrices must be square")
        if D is None:
            D = a.shape[0]
        elif a.shape[0] != D:
            raise ShapeError("matrices must share one dimension")
    return D


def permutation_trace(mats, sigma: Permutation) -> complex:
    """tr(P_sigma (A_1 ⊗ ... ⊗ A_k)) as a product over cycles.

    P_sigma sends tensor factor a to slot sigma(a). A cycle (b, sigma b, ...) of
    length r contributes tr(A_{sigma^{r-1} b} ... A_{sigma b} A_b).
    """
    mats = [np.asarray(a) for a in mats]
    if len(mats) != sigma.k:
        raise ShapeError("need one matrix per permuted factor")
    _check_square_same(mats)
    out = 1.0 + 0j
    for c in sigma.cycles():
        if len(c) == 1:
            out *= np.trace(mats[c[0]])
            continue
        prod = mats[c[-1]]
        for i in reversed(c[:-1]):
            prod = prod @ mats[i]
        out *= np.trace(prod)
    return complex(out)


def pair_partition_trace(mats, m: PairPartition, flavor: str = "orthogonal", J=None) -> complex:
    """Contraction sum_x Delta_m(x) prod_a (A_a)[x_{2a}, x_{2a+1}] (0-based positions).

    Orthogonal flavor links each pair {p<q} of m with delta(x_p, x_q); symplectic
    flavor with J[x_p, x_q]. Evaluated loop by loop: a factor entered through its
    column index contributes its transpose, and a link walked from q back to p
    contributes J^T.
    """
    mats = [np.asarray(a) for a in mats]
    if len(mats) != m.k:
        raise ShapeError("need one matrix per pair")
    D = _check_square_same(mats)
    if flavor == "symplectic":
        if J is None:
            raise ValidationError("symplectic contraction needs J")
        J = np.asarray(J)
        if J.shape != (D, D):
            raise ShapeError("J has the wrong dimension")
        JT = J.T
    elif flavor != "orthogonal":
        raise ValidationError(f"unknown flavor {flavor!r}")
    partner = m.partner()
    seen = [False] * m.k
    out = 1.0 + 0j
    for a in range(m.k):
        if seen[a]:
            continue
        start = 2 * a
        cur = start
        M = None
        while True:
            f = cur // 2
            seen[f] = True
            if cur % 2 == 0:
                step, ex = mats[f], cur + 1
            else:
                step, ex = mats[f].T, cur - 1
            M = step if M is None else M @ step
            q = partner[ex]
            if flavor == "symplectic":
                M = M @ (J if ex < q else JT)
            cur = q
            if cur == start:
                break
        out *= np.trace(M)
    return complex(out)


def derangements(n: int) -> int:
    return sum((-1) ** j * comb(n, j) * factorial(n - j) for j in range(n + 1))


def double_factorial(n: int) -> int:
    out = 1
    while n > 1:
        out *= n
        n -= 2
    return out


def pairings_without_trivial_pair(L: int) -> int:
    """Pairings of {1..2L} containing none of the pairs {2i-1, 2i}, by inclusion-exclusion."""
    return sum((-1) ** j * comb(L, j) * double_factorial(2 * (L - j) - 1) for j in range(L + 1))


def count_by_nontrivial_length(k: int, L: int) -> tuple:
    """(N(k, L), N_pair(2k, L)).

    N(k, L) counts permutations of S_k whose non-fixed points number L.
    N_pair(2k, L) counts pairings of {1..2k} whose coset type has exactly k-L
    parts equal to 1.
    """
    if not 0 <= L <= k:
        raise PreconditionError("need 0 <= L <= k")
    c = comb(k, L)
    return c * derangements(L), c * pairings_without_trivial_pair(L)


# Vectorized helpers used to build and check large Gram matrices.

def _cycle_lengths(q: np.ndarray) -> np.ndarray:
    """Cycle length of every point under each row permutation in ``q`` (last axis)."""
    n = q.shape[-1]
    start = np.broadcast_to(np.arange(n), q.shape)
    cur = q
    length = np.zeros(q.shape, dtype=np.int64)
    for t in range(1, n + 1):
        hit = (cur == start) & (length == 0)
        length[hit] = t
        if t < n:
            cur = np.take_along_axis(q, cur, axis=-1)
    return length


def type_matrix(rows, cols, chunk: int = 128):
    """Types of all pairs (a, b) with a in ``rows`` and b in ``cols``.

    For permutations the type is the cycle type of a^{-1} b. For pair partitions
    it is the loop type of a ∪ b, read off the permutation f_b ∘ f_a, which splits
    every loop with r edges of a into two cycles of length r. Returns
    ``(codes, types)`` where ``codes[i, j]`` indexes into the list ``types``.
    """
    rows, cols = list(rows), list(cols)
    is_perm = isinstance(rows[0], Permutation)
    if is_perm:
        A = np.array([r.inverse().image for r in rows], dtype=np.int64)
        B = np.array([c.image for c in cols], dtype=np.int64)
        k = B.shape[1]
    else:
        A = np.array([r.partner() for r in rows], dtype=np.int64)
        B = np.array([c.partner() for c in cols], dtype=np.int64)
        k = B.shape[1] // 2
    base = k + 1
    codes = np.empty((len(rows), len(cols)), dtype=np.int64)
    for s in range(0, len(rows), chunk):
        a = A[s:s + chunk]
        shape = (a.shape[0], len(cols), B.shape[1])
        if is_perm:
            q = np.take_along_axis(np.broadcast_to(a[:, None, :], shape), np.broadcast_to(B[None], shape), axis=-1)
        else:
            q = np.take_along_axis(np.broadcast_to(B[None], shape), np.broadcast_to(a[:, None, :], shape), axis=-1)
        ln = _cycle_lengths(q)
        code = np.zeros(shape[:2], dtype=np.int64)
        for r in range(1, k + 1):
            cnt = (ln == r).sum(axis=-1) // (r if is_perm else 2 * r)
            code += cnt * base ** (r - 1)
        codes[s:s + chunk] = code
    uniq, inv = np.unique(codes, return_inverse=True)
    types = []
    for c in uniq:
        parts = []
        c = int(c)
        for r in range(1, k + 1):
            parts += [r] * (c % base)
            c //= base
        types.append(CycleType(tuple(parts)))
    return inv.reshape(codes.shape), types
