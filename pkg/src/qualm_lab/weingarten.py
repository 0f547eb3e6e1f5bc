"""Exact Weingarten functions for U(D), O(D) and Sp(D/2), Haar twirls and sum identities.

Every value is an exact ``fractions.Fraction`` at a fixed integer D, obtained by
inverting the Gram matrix of the relevant commutant basis:

* unitary:    G(sigma, tau) = D^{#cycles(sigma^{-1} tau)} over S_k;
* orthogonal: G(m, n) = D^{#loops(m ∪ n)} over pair partitions of {1..2k};
* symplectic: G'(m, n) = sum_x Delta'_m(x) Delta'_n(x) with J links, which is
  +-D^{#loops(m ∪ n)} with a sign fixed by the link orientations.

Small systems (up to ``FULL_SOLVE_LIMIT`` rows) are solved over all group
elements and then grouped by cycle or coset type, which checks the class-function
property. A singular unitary or orthogonal Gram matrix (D too small for k) is
handled with its exact Moore-Penrose inverse. Larger ones solve the reduced per-type system and then verify every row
of G x = e exactly, plus nonsingularity of G modulo two primes.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from math import comb, factorial, isqrt
from types import MappingProxyType
from typing import Mapping

import numpy as np

from .combinatorics import (
    CycleType,
    PairPartition,
    Permutation,
    enumerate_pair_partitions,
    enumerate_permutations,
    pair_partition_trace,
    pairing_loops,
    permutation_trace,
    type_matrix,
)
from .errors import ConsistencyError, PreconditionError, RankError, ShapeError, SizeError
from .groups import canonical_J
from .linalg import MAX_KRON_ENTRIES

GROUPS = ("unitary", "orthogonal", "symplectic")
_ALIASES = {"U": "unitary", "O": "orthogonal", "Sp": "symplectic"}
MAX_GRAM_K = {"unitary": 6, "orthogonal": 5, "symplectic": 5}
FULL_SOLVE_LIMIT = 120
_PRIMES = (2147483629, 2147483587)


def group_name(group: str) -> str:
    g = _ALIASES.get(group, group)
    if g not in GROUPS:
        raise PreconditionError(f"unknown group {group!r}")
    return g


# ---------------------------------------------------------------------------
# exact linear algebra

def bareiss_solve(A, b) -> list:
    """Solve A x = b over the rationals by fraction-free elimination.

    ``A`` is a square list of integer rows and ``b`` an integer vector. Raises
    ``RankError`` when A is singular.
    """
    n = len(A)
    M = [list(map(int, row)) + [int(b[i])] for i, row in enumerate(A)]
    prev = 1
    for c in range(n):
        piv = next((r for r in range(c, n) if M[r][c] != 0), None)
        if piv is None:
            raise RankError("singular matrix")
        if piv != c:
            M[c], M[piv] = M[piv], M[c]
        pc = M[c][c]
        rowc = M[c]
        for r in range(c + 1, n):
            rowr = M[r]
            f = rowr[c]
            if f == 0:
                for j in range(c + 1, n + 1):
                    rowr[j] = rowr[j] * pc // prev
            else:
                for j in range(c + 1, n + 1):
                    rowr[j] = (rowr[j] * pc - f * rowc[j]) // prev
            rowr[c] = 0
        prev = pc
    x = [Fraction(0)] * n
    for r in range(n - 1, -1, -1):
        s = Fraction(M[r][n])
        for j in range(r + 1, n):
            if M[r][j]:
                s -= M[r][j] * x[j]
        x[r] = s / M[r][r]
    return x


def bareiss_inverse(A) -> list:
    """Exact inverse of an integer matrix as a list of Fraction rows."""
    n = len(A)
    cols = [bareiss_solve(A, [1 if i == j else 0 for i in range(n)]) for j in range(n)]
    return [[cols[j][i] for j in range(n)] for i in range(n)]


def _rref(M) -> tuple:
    """Reduced row echelon form over the rationals and the pivot columns."""
    R = [[Fraction(v) for v in row] for row in M]
    n, m = len(R), len(R[0]) if R else 0
    piv = []
    r = 0
    for c in range(m):
        p = next((i for i in range(r, n) if R[i][c] != 0), None)
        if p is None:
            continue
        R[r], R[p] = R[p], R[r]
        inv = 1 / R[r][c]
        R[r] = [v * inv for v in R[r]]
        for i in range(n):
            if i != r and R[i][c] != 0:
                f = R[i][c]
                R[i] = [a - f * b for a, b in zip(R[i], R[r])]
        piv.append(c)
        r += 1
        if r == n:
            break
    return R[:r], piv


def _inverse_small(A) -> list:
    n = len(A)
    R, piv = _rref([list(row) + [int(i == j) for j in range(n)] for i, row in enumerate(A)])
    if piv[:n] != list(range(n)):
        raise RankError("singular matrix")
    return [row[n:] for row in R]


def pseudo_inverse_row(G, i: int = 0) -> list:
    """Row ``i`` of the Moore-Penrose inverse of a symmetric rational matrix.

    Uses the rank factorization G = B C, G^+ = C^T (C C^T)^{-1} (B^T B)^{-1} B^T.
    """
    C, piv = _rref(G)
    B = [[Fraction(row[j]) for j in piv] for row in G]
    r = len(piv)
    n = len(G)
    CCt = [[sum(C[a][t] * C[b][t] for t in range(n)) for b in range(r)] for a in range(r)]
    BtB = [[sum(B[t][a] * B[t][b] for t in range(n)) for b in range(r)] for a in range(r)]
    X, Y = _inverse_small(CCt), _inverse_small(BtB)
    v = [sum(C[a][i] * X[a][b] for a in range(r)) for b in range(r)]
    w = [sum(v[a] * Y[a][b] for a in range(r)) for b in range(r)]
    return [sum(w[a] * B[j][a] for a in range(r)) for j in range(n)]


def rank_mod_p(M: np.ndarray, p: int) -> int:
    """Rank of an integer matrix modulo a prime below 2^31 (numpy int64 elimination)."""
    A = np.array(np.mod(np.asarray(M, dtype=object), p), dtype=np.int64)
    n, m = A.shape
    r = 0
    for c in range(m):
        if r == n:
            break
        nz = np.nonzero(A[r:, c])[0]
        if nz.size == 0:
            continue
        piv = r + nz[0]
        if piv != r:
            A[[r, piv]] = A[[piv, r]]
        inv = pow(int(A[r, c]), p - 2, p)
        A[r] = (A[r] * inv) % p
        rows = r + 1 + np.nonzero(A[r + 1:, c])[0]
        if rows.size:
            A[rows] = (A[rows] - np.outer(A[rows, c], A[r]) % p) % p
        r += 1
    return r


def _lcm(a: int, b: int) -> int:
    from math import gcd

    return a // gcd(a, b) * b


# ---------------------------------------------------------------------------
# Gram matrices

def _check_k(group: str, k: int) -> None:
    if k < 1:
        raise PreconditionError("k must be positive")
    if k > MAX_GRAM_K[group]:
        raise SizeError(f"k={k} exceeds the {group} Gram cap {MAX_GRAM_K[group]}")


def gram_unitary(k: int, D: int) -> list:
    """Integer matrix D^{#cycles(sigma^{-1} tau)} indexed by ``enumerate_permutations(k)``."""
    _check_k("unitary", k)
    perms = enumerate_permutations(k)
    return [[D ** s.inverse().compose(t).num_cycles() for t in perms] for s in perms]


def gram_orthogonal(k: int, D: int) -> list:
    """Integer matrix D^{#loops(m ∪ n)} indexed by ``enumerate_pair_partitions(k)``.

    D may be negative; the symplectic relation evaluates it at -D.
    """
    _check_k("orthogonal", k)
    ps = enumerate_pair_partitions(k)
    return [[D ** pairing_loops(m, n).num_parts for n in ps] for m in ps]


def symplectic_gram_entry(m: PairPartition, n: PairPartition, D: int) -> int:
    """sum_x Delta'_m(x) Delta'_n(x) evaluated loop by loop.

    A loop with 2r links contributes tr(L_1 ... L_2r), where each L is J for a link
    walked from its smaller to its larger endpoint and J^T = -J otherwise. Since
    J^2 = -I this is (-1)^(r + reversed links) D.
    """
    fm, fn = m.partner(), n.partner()
    used = [False] * (2 * m.k)
    val = 1
    for i in range(2 * m.k):
        if used[i]:
            continue
        r = 0
        rev = 0
        x = i
        while True:
            used[x] = True
            y = fm[x]
            used[y] = True
            rev += y < x
            z = fn[y]
            rev += z < y
            r += 1
            x = z
            if x == i:
                break
        val *= (-1) ** ((r + rev) % 2) * D
    return val


def gram_symplectic(k: int, halfD: int) -> list:
    _check_k("symplectic", k)
    D = 2 * halfD
    ps = enumerate_pair_partitions(k)
    return [[symplectic_gram_entry(m, n, D) for n in ps] for m in ps]


# ---------------------------------------------------------------------------
# tables

@dataclass(frozen=True)
class WgTable:
    """Exact Weingarten values for one (group, k, D).

    ``values`` maps a cycle type (unitary) or coset type (orthogonal, symplectic)
    to a Fraction. For the symplectic group the stored value f(mu) is
    (-1)^k Wg^O(mu, -D), and the value on a pair (m, n) is eps(m) eps(n) f(mu),
    where eps is the sign of sigma_m in S_2k.
    """

    group: str
    k: int
    D: int
    values: Mapping = field(repr=False)

    def __post_init__(self):
        object.__setattr__(self, "values", MappingProxyType(dict(self.values)))

    @property
    def halfD(self) -> int:
        return self.D // 2

    def __getitem__(self, key) -> Fraction:
        if not isinstance(key, CycleType):
            key = CycleType(tuple(key))
        return self.values[key]

    def value(self, a, b=None) -> Fraction:
        """Wg(a, b); with ``b`` omitted, Wg(identity, a)."""
        if self.group == "unitary":
            if b is None:
                return self.values[a.cycle_type()]
            return self.values[a.inverse().compose(b).cycle_type()]
        if b is None:
            b, a = a, PairPartition.identity(self.k)
        mu = pairing_loops(a, b)
        if self.group == "orthogonal":
            return self.values[mu]
        return a.sign() * b.sign() * self.values[mu]

    def row(self) -> list:
        """Wg(identity, x) for every element x in enumeration order."""
        if self.group == "unitary":
            return [self.value(p) for p in enumerate_permutations(self.k)]
        return [self.value(m) for m in enumerate_pair_partitions(self.k)]

    def float_matrix(self) -> np.ndarray:
        els = elements(self.group, self.k)
        return np.array([[float(self.value(a, b)) for b in els] for a in els])

    def to_json(self) -> dict:
        entries = [
            {"type": list(t.parts), "num": str(v.numerator), "den": str(v.denominator)}
            for t, v in sorted(self.values.items(), key=lambda kv: kv[0].parts, reverse=True)
        ]
        return {"group": self.group, "k": self.k, "D": self.D, "entries": entries}

    @classmethod
    def from_json(cls, doc: dict) -> "WgTable":
        vals = {CycleType(tuple(e["type"])): Fraction(int(e["num"]), int(e["den"])) for e in doc["entries"]}
        return cls(group_name(doc["group"]), int(doc["k"]), int(doc["D"]), vals)


def elements(group: str, k: int) -> tuple:
    return enumerate_permutations(k) if group_name(group) == "unitary" else enumerate_pair_partitions(k)


def _type_of(group: str, x) -> CycleType:
    if group == "unitary":
        return x.cycle_type()
    return pairing_loops(PairPartition.identity(x.k), x)


def _group_by_type(group: str, k: int, x: list) -> dict:
    """Group a solution vector by type; raise if it is not constant on types."""
    out: dict = {}
    for el, v in zip(elements(group, k), x):
        t = _type_of(group, el)
        if t in out and out[t] != v:
            raise ConsistencyError(f"{group} Weingarten values differ within type {t}")
        out[t] = v
    return out


def _gram_row_fn(group: str, D: int, signed: bool):
    if group == "unitary":
        return lambda a, b: D ** a.inverse().compose(b).num_cycles()
    if signed:
        return lambda a, b: symplectic_gram_entry(a, b, D)
    return lambda a, b: D ** pairing_loops(a, b).num_parts


@lru_cache(maxsize=8)
def _types(group: str, k: int):
    els = elements(group, k)
    return type_matrix(els, els)


def _gram_int(group: str, k: int, D: int, signed: bool) -> list:
    els = elements(group, k)
    if signed:
        return [[symplectic_gram_entry(a, b, D) for b in els] for a in els]
    codes, types = _types(group, k)
    vals = [D ** t.num_parts for t in types]
    return [[vals[c] for c in row] for row in codes.tolist()]


def _solve_reduced(group: str, k: int, D: int, signed: bool = False) -> dict:
    """Per-type system: one row per type representative, one unknown per type."""
    els = elements(group, k)
    codes, types = _types(group, k)
    te = codes[0]
    reps = {}
    for j, t in enumerate(te.tolist()):
        reps.setdefault(t, j)
    order = sorted(reps)
    pos = {t: i for i, t in enumerate(order)}
    A = []
    for t in order:
        r = reps[t]
        row = [0] * len(order)
        for j, tj in enumerate(te.tolist()):
            if signed:
                g = symplectic_gram_entry(els[r], els[j], D) * els[j].sign()
            else:
                g = D ** types[codes[r, j]].num_parts
            row[pos[tj]] += g
        A.append(row)
    ident = pos[types.index(CycleType((1,) * k))]
    x = bareiss_solve(A, [1 if i == ident else 0 for i in range(len(order))])
    return {types[t]: x[pos[t]] for t in order}


def _verify_rows(group: str, k: int, D: int, x: list, signed: bool = False) -> None:
    """Check sum_n G(m, n) x_n = delta(m, e) for every row m, in exact integers."""
    els = elements(group, k)
    L = 1
    for v in x:
        L = _lcm(L, v.denominator)
    X = [int(v * L) for v in x]
    if signed:
        for i, a in enumerate(els):
            s = sum(symplectic_gram_entry(a, b, D) * X[j] for j, b in enumerate(els) if X[j])
            if s != (L if i == 0 else 0):
                raise ConsistencyError(f"row {i} of G x = e fails for {group} k={k} D={D}")
        return
    codes, types = _types(group, k)
    T = len(types)
    te = codes[0]
    Xt = {}
    for j, t in enumerate(te.tolist()):
        if t in Xt and Xt[t] != X[j]:
            raise ConsistencyError("solution is not constant on types")
        Xt[t] = X[j]
    n = len(els)
    flat = (np.arange(n)[:, None] * T * T + codes * T + te[None, :]).ravel()
    counts = np.bincount(flat, minlength=n * T * T).reshape(n, T * T).astype(object)
    w = np.array([D ** types[t1].num_parts * Xt.get(t2, 0) for t1 in range(T) for t2 in range(T)], dtype=object)
    sums = counts.dot(w)
    if sums[0] != L or any(v != 0 for v in sums[1:]):
        raise ConsistencyError(f"G x = e fails for {group} k={k} D={D}")


def _check_nonsingular(group: str, k: int, D: int, signed: bool = False) -> None:
    els = elements(group, k)
    for p in _PRIMES:
        if signed:
            G = np.array(_gram_int(group, k, D, True), dtype=object)
        else:
            codes, types = _types(group, k)
            G = np.array([pow(D, t.num_parts, p) for t in types], dtype=np.int64)[codes]
        if rank_mod_p(G, p) == len(els):
            return
    raise RankError(f"{group} Gram matrix singular for k={k}, D={D}")


def _solve(group: str, k: int, D: int, signed: bool = False) -> list:
    """Row Wg(identity, .) over all elements."""
    els = elements(group, k)
    if len(els) <= FULL_SOLVE_LIMIT:
        G = _gram_int(group, k, D, signed)
        try:
            return bareiss_solve(G, [1] + [0] * (len(els) - 1))
        except RankError:
            if signed:
                raise
            # D below k: the Gram matrix is singular and the Weingarten function
            # is its pseudo-inverse, which still reproduces every Haar integral
            return pseudo_inverse_row(G)
    vals = _solve_reduced(group, k, D, signed)
    codes, types = _types(group, k)
    te = codes[0]
    if signed:
        x = [e.sign() * vals[types[t]] for e, t in zip(els, te.tolist())]
    else:
        x = [vals[types[t]] for t in te.tolist()]
    _verify_rows(group, k, D, x, signed)
    _check_nonsingular(group, k, D, signed)
    return x


@lru_cache(maxsize=None)
def wg_unitary(k: int, D: int) -> WgTable:
    """Unitary Weingarten function keyed by cycle type."""
    _check_k("unitary", k)
    if D < 1:
        raise PreconditionError("D must be positive")
    x = _solve("unitary", k, D)
    return WgTable("unitary", k, D, _group_by_type("unitary", k, x))


@lru_cache(maxsize=None)
def _orthogonal_values(k: int, D: int) -> dict:
    _check_k("orthogonal", k)
    x = _solve("orthogonal", k, D)
    return _group_by_type("orthogonal", k, x)


@lru_cache(maxsize=None)
def wg_orthogonal(k: int, D: int) -> WgTable:
    """Orthogonal Weingarten function keyed by coset type."""
    if D < 1:
        raise PreconditionError("D must be positive")
    return WgTable("orthogonal", k, D, _orthogonal_values(k, D))


@lru_cache(maxsize=None)
def wg_symplectic(k: int, halfD: int) -> WgTable:
    """Symplectic Weingarten function on Sp(halfD), D = 2 halfD.

    Route (a): Wg^Sp(e, m) = (-1)^k eps(sigma_m) Wg^O(m, -D).
    Route (b): the identity row of the inverse of the J-contraction Gram matrix.
    The two must agree exactly.
    """
    _check_k("symplectic", k)
    if halfD < 1:
        raise PreconditionError("halfD must be positive")
    D = 2 * halfD
    ovals = _orthogonal_values(k, -D)
    f = {t: (-1) ** k * v for t, v in ovals.items()}
    e = PairPartition.identity(k)
    route_a = [m.sign() * f[pairing_loops(e, m)] for m in enumerate_pair_partitions(k)]
    route_b = _solve("symplectic", k, D, signed=True)
    if route_a != route_b:
        raise ConsistencyError(f"symplectic Weingarten routes disagree at k={k}, D={D}")
    return WgTable("symplectic", k, D, f)


def wg_table(group: str, k: int, D: int) -> WgTable:
    """Dispatch on group; ``D`` is always the full matrix dimension."""
    g = group_name(group)
    if g == "unitary":
        return wg_unitary(k, D)
    if g == "orthogonal":
        return wg_orthogonal(k, D)
    if D % 2:
        raise PreconditionError("symplectic group needs even D")
    return wg_symplectic(k, D // 2)


def verify_inverse(table: WgTable) -> bool:
    """Exact check that the Weingarten matrix inverts the Gram matrix.

    Small tables are multiplied out in full. Both matrices are invariant under
    simultaneous left translation of rows and columns, so for large tables the
    identity row of G x = e, checked in exact integers, is equivalent.
    """
    els = elements(table.group, table.k)
    signed = table.group == "symplectic"
    if len(els) > FULL_SOLVE_LIMIT:
        try:
            _verify_rows(table.group, table.k, table.D, table.row(), signed)
        except ConsistencyError:
            return False
        return True
    g = _gram_row_fn(table.group, table.D, signed)
    W = np.array([[table.value(a, b) for b in els] for a in els], dtype=object)
    G = np.array([[g(a, b) for b in els] for a in els], dtype=object)
    P = W.dot(G)
    n = len(els)
    return all(P[i, j] == (1 if i == j else 0) for i in range(n) for j in range(n))


# ---------------------------------------------------------------------------
# disk cache

def cache_path(cache_dir: str, group: str, k: int, D: int) -> str:
    return os.path.join(cache_dir, f"{group_name(group)}-k{k}-D{D}.json")


def save_table(table: WgTable, cache_dir: str) -> str:
    os.makedirs(cache_dir, exist_ok=True)
    path = cache_path(cache_dir, table.group, table.k, table.D)
    tmp = path + ".tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        json.dump(table.to_json(), fh, indent=1)
    os.replace(tmp, path)
    return path


def load_table(path: str) -> WgTable:
    with open(path, encoding="utf-8") as fh:
        return WgTable.from_json(json.load(fh))


def get_table(group: str, k: int, D: int, cache_dir: str | None = None) -> WgTable:
    """Table from the disk cache when present, otherwise computed (and persisted)."""
    if cache_dir:
        path = cache_path(cache_dir, group, k, D)
        if os.path.exists(path):
            t = load_table(path)
            if (t.group, t.k, t.D) == (group_name(group), k, D):
                return t
    t = wg_table(group, k, D)
    if cache_dir:
        save_table(t, cache_dir)
    return t


# ---------------------------------------------------------------------------
# Haar twirls

def _as_full(A, k: int, D: int) -> np.ndarray:
    if isinstance(A, (list, tuple)):
        from .linalg import kron_all

        if len(A) != k:
            raise ShapeError("need k factors")
        return kron_all(A)
    A = np.asarray(A, dtype=complex)
    if A.shape != (D**k, D**k):
        raise ShapeError(f"expected a {D**k}x{D**k} operator")
    return A


def permutation_operator(sigma: Permutation, D: int) -> np.ndarray:
    """P_sigma on (C^D)^{⊗k}: factor a is moved to slot sigma(a)."""
    k = sigma.k
    idx = np.indices((D,) * k).reshape(k, -1)
    out_idx = np.empty_like(idx)
    for a in range(k):
        out_idx[sigma(a)] = idx[a]
    rows = np.ravel_multi_index(tuple(out_idx), (D,) * k)
    cols = np.ravel_multi_index(tuple(idx), (D,) * k)
    P = np.zeros((D**k, D**k), dtype=complex)
    P[rows, cols] = 1
    return P


def pairing_operator(m: PairPartition, D: int, link=None) -> np.ndarray:
    """Delta_m with row multi-index (x_0, x_2, ...) and column multi-index (x_1, x_3, ...).

    ``link`` is the matrix placed on each pair {p<q} as link[x_p, x_q]; the
    identity gives Delta_m and J gives Delta'_m.
    """
    k = m.k
    L = np.eye(D, dtype=complex) if link is None else np.asarray(link, dtype=complex)
    letters = [chr(ord("a") + i) for i in range(2 * k)]
    subs = ",".join(letters[p] + letters[q] for p, q in m.pairs)
    out = "".join(letters[0::2]) + "".join(letters[1::2])
    T = np.einsum(subs + "->" + out, *([L] * k))
    return T.reshape(D**k, D**k)


def haar_twirl(group: str, k: int, D: int, A) -> np.ndarray:
    """Exact Haar average of G^{⊗k} A G^{†⊗k} for G Haar on the given group."""
    g = group_name(group)
    if D ** (2 * k) > MAX_KRON_ENTRIES:
        raise SizeError("twirl operator too large")
    A = _as_full(A, k, D)
    table = wg_table(g, k, D)
    els = elements(g, k)
    W = table.float_matrix()
    if g == "unitary":
        ops = [permutation_operator(s, D) for s in els]
        b = np.array([np.trace(P.conj().T @ A) for P in ops])
        c = W @ b
        return sum(ci * P for ci, P in zip(c, ops))
    if g == "orthogonal":
        ops = [pairing_operator(m, D) for m in els]
        b = np.array([np.sum(P * A) for P in ops])
        c = W @ b
        return sum(ci * P for ci, P in zip(c, ops))
    J = canonical_J(D // 2)
    Jk = np.ones((1, 1), dtype=complex)
    for _ in range(k):
        Jk = np.kron(Jk, J)
    ops = [pairing_operator(m, D, J) for m in els]
    AJ = A @ Jk
    b = np.array([np.sum(P * AJ) for P in ops])
    c = W @ b
    return sum(ci * P for ci, P in zip(c, ops)) @ Jk.T


def input_traces(group: str, A_factors) -> np.ndarray:
    """Contractions of A = ⊗A_a against every element (index order of ``elements``)."""
    g = group_name(group)
    els = elements(g, len(A_factors))
    if g == "unitary":
        return np.array([permutation_trace(A_factors, s.inverse()) for s in els])
    if g == "orthogonal":
        return np.array([pair_partition_trace(A_factors, m) for m in els])
    J = canonical_J(np.asarray(A_factors[0]).shape[0] // 2)
    AJ = [x @ J for x in A_factors]
    return np.array([pair_partition_trace(AJ, m, "symplectic", J) for m in els])


def output_traces(group: str, B_factors) -> np.ndarray:
    """Contractions of B = ⊗B_a against every element (index order of ``elements``)."""
    g = group_name(group)
    els = elements(g, len(B_factors))
    if g == "unitary":
        return np.array([permutation_trace(B_factors, s) for s in els])
    if g == "orthogonal":
        BT = [np.asarray(x).T for x in B_factors]
        return np.array([pair_partition_trace(BT, m) for m in els])
    J = canonical_J(np.asarray(B_factors[0]).shape[0] // 2)
    JB = [(J.T @ x).T for x in B_factors]
    return np.array([pair_partition_trace(JB, m, "symplectic", J) for m in els])


def haar_expectation(group: str, D: int, A_factors, B_factors, table: WgTable | None = None) -> complex:
    """E tr(G^{⊗k} A G^{†⊗k} B) for product operators A = ⊗A_a, B = ⊗B_a.

    Uses trace contractions only; no D^k operator is formed.
    """
    g = group_name(group)
    k = len(A_factors)
    if len(B_factors) != k:
        raise ShapeError("A and B need the same number of factors")
    table = table or wg_table(g, k, D)
    W = table.float_matrix()
    return complex(output_traces(g, B_factors) @ W @ input_traces(g, A_factors))


# ---------------------------------------------------------------------------
# sum identities and bounds

def sum_abs_wg(group: str, k: int, D: int) -> Fraction:
    """Sum of |Wg| over all permutations (unitary) or pairings (orthogonal, symplectic)."""
    table = wg_table(group, k, D)
    return sum((abs(v) for v in table.row()), Fraction(0))


def candidate_sum_forms(group: str, k: int, D: int) -> dict:
    """Closed forms to compare against ``sum_abs_wg``.

    unitary: (D-k)!/D!. symplectic: prod 1/(D+2j) (as stated for the symplectic
    lemma) and prod 1/(D-2j). orthogonal: (D-2k)!!/D!! and, for even D,
    (D/2-k)!!/(D/2)!! (the form stated at argument 2D).
    """
    g = group_name(group)
    out = {}
    if g == "unitary":
        out["falling_factorial"] = Fraction(factorial(D - k), factorial(D)) if D >= k else None
    elif g == "symplectic":
        p_plus = Fraction(1)
        p_minus = Fraction(1)
        for j in range(k):
            p_plus /= D + 2 * j
            if p_minus is not None:
                p_minus = p_minus / (D - 2 * j) if D != 2 * j else None
        out["rising_by_two"] = p_plus
        out["falling_by_two"] = p_minus
    else:
        from .combinatorics import double_factorial

        out["df_D_minus_2k"] = Fraction(double_factorial(D - 2 * k), double_factorial(D)) if D >= 2 * k else None
        if D % 2 == 0 and D // 2 >= k:
            h = D // 2
            out["df_half_minus_k"] = Fraction(double_factorial(h - k), double_factorial(h))
    return out


def sign_pattern(group: str, k: int, D: int) -> dict:
    """Per type, whether the sign pattern used to evaluate sum |Wg| in closed form holds.

    unitary and orthogonal: (-1)^{|mu|} Wg(mu) >= 0. symplectic: the stored
    value (-1)^k Wg^O(mu, -D) is >= 0, so |Wg^Sp| equals it.
    """
    g = group_name(group)
    table = wg_table(g, k, D)
    if g == "symplectic":
        return {t: v >= 0 for t, v in table.values.items()}
    return {t: (-1) ** t.length * v >= 0 for t, v in table.values.items()}


def catalan(n: int) -> int:
    return comb(2 * n, n) // (n + 1)


def _sqrt_lower(k: int, digits: int = 40) -> Fraction:
    scale = 10**digits
    return Fraction(isqrt(k * scale * scale), scale)


@dataclass(frozen=True)
class BoundRow:
    type: CycleType
    ratio: Fraction
    lower: Fraction
    upper: Fraction
    lower_ok: bool
    upper_ok: bool


@dataclass(frozen=True)
class WgBoundReport:
    group: str
    k: int
    D: int
    rows: tuple
    identity_deviation: Fraction
    identity_allowance: Fraction
    identity_ok: bool

    @property
    def all_ok(self) -> bool:
        return self.identity_ok and all(r.lower_ok and r.upper_ok for r in self.rows)


def regime_ok(group: str, k: int, D: int) -> bool:
    """Validity regime of the sandwich bounds, decided in exact integer arithmetic."""
    g = group_name(group)
    if g == "unitary":
        return D**4 > 36 * k**7
    if g == "orthogonal":
        return D**2 > 144 * k**7
    return D**2 > 36 * k**7


def wg_bound_check(group: str, k: int, D: int) -> WgBoundReport:
    """Check the sandwich bounds on D^{k+|x|} |Wg(x)| / prod Catalan(mu_i - 1) per type.

    k^{7/2} enters through a rational lower bracket of sqrt(k); with that choice a
    reported pass is a proof that the inequality holds for the true value.
    """
    g = group_name(group)
    if not regime_ok(g, k, D):
        raise PreconditionError(f"(k={k}, D={D}) outside the {g} bound regime")
    table = wg_table(g, k, D)
    s = Fraction(k**3) * _sqrt_lower(k)
    Dq = Fraction(D)
    if g == "unitary":
        lower_c = 1 / (1 - Fraction(k - 1) / Dq**2)
        upper_c = 1 / (1 - 6 * s / Dq**2)
    elif g == "orthogonal":
        den = 1 - Fraction(144 * k**7) / Dq**2
        lower_c = (1 - 24 * s / Dq) / den
        upper_c = 1 / den
    else:
        h = Dq / 2
        lower_c = 1 / (1 - Fraction(k - 1) / h**2)
        upper_c = 1 / (1 - 6 * s / h**2)
    rows = []
    for t, v in sorted(table.values.items(), key=lambda kv: kv[0].parts, reverse=True):
        cat = 1
        for p in t.parts:
            cat *= catalan(p - 1)
        if g == "symplectic":
            ratio = Dq ** (k + t.length) * abs(v) / cat
        else:
            ratio = (-1) ** t.length * Dq ** (k + t.length) * v / cat
        rows.append(BoundRow(t, ratio, lower_c, upper_c, ratio >= lower_c, ratio <= upper_c))
    w_e = table[CycleType((1,) * k)]
    dev = abs(w_e - Dq ** (-k))
    allowance = Dq ** (-k) * max(abs(upper_c - 1), abs(1 - lower_c))
    return WgBoundReport(g, k, D, tuple(rows), dev, allowance, dev <= allowance)
