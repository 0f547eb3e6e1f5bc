"""Exact and empirical outcome distributions of simple-measurement strategies.

Distances use the 1-norm sum |p - q|, which is twice the usual total
variation distance; every bound in this module is stated in that norm.
"""

from __future__ import annotations

import csv
import itertools
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .combinatorics import count_by_nontrivial_length
from .errors import ConsistencyError, DependencyError, PreconditionError, RankError, ShapeError, SizeError, ValidationError
from .groups import sample_haar_unitary
from .linalg import DensityMatrix, as_density, as_generator
from .oracles import make_oracle
from .sm import SmPolicy, execute_sm
from .weingarten import elements, group_name, input_traces, output_traces, wg_table

MAX_TRANSCRIPTS = 10**6
SUM_TOL = 1e-9
NEG_TOL = 1e-12
WILSON_Z = 5.0


@dataclass
class OutcomeDistribution:
    """Probabilities of transcripts (s_0, ..., s_k), stored densely.

    ``halfwidth`` carries Wilson confidence half-widths when the
    distribution is empirical.
    """

    arity: int
    rounds: int
    probabilities: np.ndarray
    halfwidth: np.ndarray | None = None
    name: str = ""

    def __post_init__(self):
        p = np.asarray(self.probabilities, dtype=float)
        shape = (self.arity,) * (self.rounds + 1)
        if p.shape != shape:
            p = p.reshape(shape)
        if np.any(p < -NEG_TOL):
            raise ValidationError(f"probability {p.min()!r} below {-NEG_TOL}")
        p = np.clip(p, 0.0, None)
        if abs(p.sum() - 1.0) > SUM_TOL:
            raise ValidationError(f"probabilities sum to {p.sum()!r}")
        self.probabilities = p

    def __getitem__(self, transcript) -> float:
        return float(self.probabilities[tuple(transcript)])

    def items(self):
        for idx in itertools.product(range(self.arity), repeat=self.rounds + 1):
            yield idx, float(self.probabilities[idx])

    def marginal(self, keep) -> np.ndarray:
        """Marginal over the listed transcript positions (0 = s_0)."""
        keep = sorted(keep)
        drop = tuple(i for i in range(self.rounds + 1) if i not in keep)
        return self.probabilities.sum(axis=drop)

    def to_csv(self, path: str) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["transcript", "probability"])
            for idx, p in self.items():
                w.writerow(["-".join(map(str, idx)), "%.17g" % p])

    def to_json(self) -> dict:
        return {
            "arity": self.arity,
            "rounds": self.rounds,
            "name": self.name,
            "probabilities": {"-".join(map(str, i)): float("%.17g" % p) for i, p in self.items()},
        }


def _check_size(arity: int, k: int) -> None:
    if arity ** (k + 1) > MAX_TRANSCRIPTS:
        raise SizeError(f"{arity}^{k + 1} transcripts exceed {MAX_TRANSCRIPTS}")


def _zero(D: int) -> np.ndarray:
    v = np.zeros(D, dtype=complex)
    v[0] = 1
    return v


def _enumerate(policy: SmPolicy):
    """Walk the history tree.

    Yields (transcript, Pr(s0), prepared matrices, B factors). Prepared states
    and POVMs are evaluated once per history prefix.
    """
    k = policy.rounds
    D = policy.dim
    p0 = policy.povm(())
    pr0 = p0.probabilities(_zero(D))
    arity = p0.size

    def walk(hist, A, B):
        i = len(hist)
        if i == k + 1:
            yield tuple(hist), A, B
            return
        sigma = policy.prepare(hist).matrix
        povm = policy.povm(hist)
        if povm.size != arity:
            raise ShapeError("every round must use the same number of outcomes")
        for s in range(arity):
            yield from walk(hist + [s], A + [sigma], B + [povm.element(s)])

    for s0 in range(arity):
        for t, A, B in walk([s0], [], []):
            yield t, float(pr0[s0]), A, B


@dataclass
class _Terms:
    group: str
    arity: int
    k: int
    D: int
    pr0: np.ndarray
    a: np.ndarray
    b: np.ndarray
    trB: np.ndarray


def _terms(policy: SmPolicy, group: str) -> _Terms:
    g = group_name(group)
    k, D = policy.rounds, policy.dim
    arity = policy.arity
    _check_size(arity, k)
    n = arity ** (k + 1)
    m = len(elements(g, k))
    pr0 = np.empty(n)
    a = np.empty((n, m), dtype=complex)
    b = np.empty((n, m), dtype=complex)
    trB = np.empty(n)
    cache = {}
    for j, (t, p, A, B) in enumerate(_enumerate(policy)):
        key = tuple(id(x) for x in A)
        if key not in cache:
            cache[key] = input_traces(g, A)
        a[j] = cache[key]
        b[j] = output_traces(g, B)
        pr0[j] = p
        trB[j] = np.prod([np.trace(x).real for x in B])
    return _Terms(g, arity, k, D, pr0, a, b, trB)


def _check_policy(policy: SmPolicy, ell: int, k: int | None) -> None:
    if policy.dim != 2**ell:
        raise ShapeError(f"policy dimension {policy.dim} differs from 2^{ell}")
    if k is not None and k != policy.rounds:
        raise PreconditionError(f"policy has {policy.rounds} rounds, not {k}")


def _group_caps(group: str, k: int) -> None:
    g = group_name(group)
    if g == "unitary" and k > 4:
        raise PreconditionError("exact unitary analysis supports k <= 4")
    if g != "unitary" and k > 3:
        raise PreconditionError("exact orthogonal/symplectic analysis supports k <= 3")


def _table(group: str, k: int, D: int):
    try:
        return wg_table(group, k, D)
    except RankError as exc:
        raise DependencyError(f"no {group} Weingarten table for k={k}, D={D}: {exc}") from exc


def exact_qk_sm(policy: SmPolicy, group: str, ell: int, k: int | None = None) -> OutcomeDistribution:
    """Exact transcript distribution when every call applies one Haar element of ``group``."""
    _check_policy(policy, ell, k)
    _group_caps(group, policy.rounds)
    T = _terms(policy, group)
    W = _table(T.group, T.k, T.D).float_matrix()
    q = T.pr0 * np.einsum("nm,mj,nj->n", T.b, W, T.a).real
    return OutcomeDistribution(T.arity, T.k, q, name=f"Q_{T.k}^{group}")


def exact_pk(policy: SmPolicy, ell: int, k: int | None = None) -> OutcomeDistribution:
    """Exact transcript distribution under fresh Haar unitaries: Pr(s0) D^-k prod lambda."""
    _check_policy(policy, ell, k)
    k, D = policy.rounds, policy.dim
    arity = policy.arity
    _check_size(arity, k)
    p = np.empty(arity ** (k + 1))
    for j, (t, p0, A, B) in enumerate(_enumerate(policy)):
        p[j] = p0 * np.prod([np.trace(x).real for x in B]) / D**k
    return OutcomeDistribution(arity, k, p, name=f"P_{k}")


def exact_lod(policy: SmPolicy, ell: int) -> OutcomeDistribution:
    """Exact distribution under the completely depolarizing oracle (round by round)."""
    _check_policy(policy, ell, None)
    k, D = policy.rounds, policy.dim
    arity = policy.arity
    _check_size(arity, k)
    mixed = np.eye(D, dtype=complex) / D
    p = np.empty(arity ** (k + 1))
    for j, (t, p0, A, B) in enumerate(_enumerate(policy)):
        p[j] = p0 * np.prod([np.trace(mixed @ x).real for x in B])
    return OutcomeDistribution(arity, k, p, name=f"LOD_{k}")


def rotated_policy(policy: SmPolicy, rotations) -> SmPolicy:
    """Insert a fixed unitary R_i before the i-th oracle call (R_1 = identity).

    A correlated oracle U_i = U_1 R_i acting on a policy is the fixed oracle
    U_1 acting on the rotated policy.
    """
    rots = [np.asarray(r, dtype=complex) for r in rotations]

    def prep(h):
        i = len(h)
        sigma = policy.prepare(h).matrix
        if i - 1 < len(rots):
            R = rots[i - 1]
            sigma = R @ sigma @ R.conj().T
        return DensityMatrix(sigma, validate=False)

    return SmPolicy(policy.rounds, policy.dim, policy.povm_for, prep, adaptive=True, name=policy.name + "-rotated")


def exact_correlated(policy: SmPolicy, ell: int, rotations) -> OutcomeDistribution:
    """Exact distribution for the correlated oracle with the given relative rotations."""
    rots = [np.eye(2**ell, dtype=complex)] + [np.asarray(r, dtype=complex) for r in rotations]
    return exact_qk_sm(rotated_policy(policy, rots), "U", ell)


def tvd(p: OutcomeDistribution, q: OutcomeDistribution) -> float:
    """1-norm distance sum |p - q| (twice the conventional total variation distance)."""
    a = p.probabilities if isinstance(p, OutcomeDistribution) else np.asarray(p, dtype=float)
    b = q.probabilities if isinstance(q, OutcomeDistribution) else np.asarray(q, dtype=float)
    if a.shape != b.shape:
        raise ShapeError(f"supports differ: {a.shape} vs {b.shape}")
    return float(np.abs(a - b).sum())


def three_way_bias(dists) -> float:
    """Minimum pairwise 1-norm distance among three or more distributions."""
    dists = list(dists)
    return min(tvd(x, y) for x, y in itertools.combinations(dists, 2))


def bias(rho0, rho1) -> float:
    """Trace norm of the difference of two single-qubit states."""
    a = as_density(rho0).matrix
    b = as_density(rho1).matrix
    if a.shape != (2, 2) or b.shape != (2, 2):
        raise ShapeError("bias is defined for single-qubit outputs")
    return float(np.abs(np.linalg.eigvalsh(a - b)).sum())


def collision_free(transcript) -> bool:
    rounds = transcript[1:]
    return len(set(rounds)) == len(rounds)


def flatness(dist: OutcomeDistribution) -> float:
    """max - min of the probability over collision-free transcripts (per s_0 with mass)."""
    spread = 0.0
    p = dist.probabilities
    for s0 in range(dist.arity):
        vals = [p[(s0,) + r] for r in itertools.permutations(range(dist.arity), dist.rounds)]
        if vals and max(vals) > 0:
            spread = max(spread, max(vals) - min(vals))
    return spread


# ---------------------------------------------------------------------------
# bound chain

@dataclass(frozen=True)
class KeyRow:
    tau: str
    L: int
    worst: float
    bound: float
    ok: bool


@dataclass(frozen=True)
class BoundReport:
    c1: float
    c2: float
    T: float
    rhs: float
    lhs: float
    regime_ok: bool
    key_rows: tuple = ()
    key_ok: bool | None = None
    T_count_bound: float = math.nan
    T_closed_bound: float = math.nan
    T_bounds_ok: bool | None = None
    extra: dict = field(default_factory=dict)

    @property
    def chain_ok(self) -> bool:
        return self.lhs <= self.rhs + 1e-12


def regime(ell: int, k: int) -> bool:
    """k < (2^ell / sqrt 6)^{4/7}, decided exactly as 36 k^7 < D^4."""
    return 36 * k**7 < (2**ell) ** 4


def bound_quantities(policy: SmPolicy, ell: int, k: int | None = None, group: str = "U") -> BoundReport:
    """c1, c2 and T of the bound sum |Q - P| <= c1 + c2 T, with the per-tau check.

    T weights every transcript by Pr(s0), matching the Pr(s0) factor in
    both distributions; the per-tau inequality is checked for each s0.
    """
    _check_policy(policy, ell, k)
    k = policy.rounds
    _group_caps(group, k)
    g = group_name(group)
    D = 2**ell
    T_ = _terms(policy, g)
    table = _table(g, k, D)
    W = table.float_matrix()
    els = elements(g, k)
    wrow = np.array([float(v) for v in table.row()])
    # row() lists Wg(identity, x) over elements; index 0 is the identity
    c1 = D**k * abs(wrow[0] - D ** (-k)) + D**k * np.abs(wrow[1:]).sum()
    c2 = D**k * np.abs(wrow).sum()
    absb = np.abs(T_.b)
    T = float((T_.pr0[:, None] * absb[:, 1:]).sum() / D**k)
    q = T_.pr0 * np.einsum("nm,mj,nj->n", T_.b, W, T_.a).real
    p = T_.pr0 * T_.trB / D**k
    lhs = float(np.abs(q - p).sum())
    rhs = float(c1 + c2 * T)
    ok_regime = regime(ell, k)
    if ok_regime and lhs > rhs + 1e-12:
        raise ConsistencyError(f"bound violated in regime: {lhs} > {rhs}")
    rows = []
    key_ok = None
    t_count = t_closed = math.nan
    t_ok = None
    if g == "unitary":
        arity = T_.arity
        per_s0 = absb.reshape(arity, -1, len(els)).sum(axis=1)
        for j, tau in enumerate(els):
            if j == 0:
                continue
            Lt = tau.cycle_type().nontrivial_length
            bound = float(D ** (k - Lt // 2))
            worst = float(per_s0[:, j].max())
            rows.append(KeyRow(str(tau), Lt, worst, bound, worst <= bound * (1 + 1e-12)))
        key_ok = all(r.ok for r in rows)
        t_count = sum(count_by_nontrivial_length(k, L)[0] * D ** (k - L // 2) for L in range(2, k + 1)) / D**k
        x = k * k / D
        t_closed = (1 + k) * x / (1 - x) if x < 1 else math.inf
        t_ok = T <= t_count * (1 + 1e-12) and t_count <= t_closed * (1 + 1e-12)
    return BoundReport(c1, c2, T, rhs, lhs, ok_regime, tuple(rows), key_ok, t_count, t_closed, t_ok)


# ---------------------------------------------------------------------------
# Monte Carlo helpers

def wilson_interval(hits: int, n: int, z: float = WILSON_Z) -> tuple:
    if n <= 0:
        raise PreconditionError("need at least one trial")
    ph = hits / n
    den = 1 + z * z / n
    centre = (ph + z * z / (2 * n)) / den
    half = z * math.sqrt(ph * (1 - ph) / n + z * z / (4 * n * n)) / den
    return centre - half, centre + half


def empirical_distribution(run, trials: int, rng, arity: int, rounds: int, z: float = WILSON_Z) -> OutcomeDistribution:
    """Histogram of ``run(rng)`` transcripts with Wilson half-widths per cell."""
    if trials < 1:
        raise PreconditionError("trials must be positive")
    counts = np.zeros((arity,) * (rounds + 1))
    for _ in range(trials):
        counts[tuple(run(rng))] += 1
    p = counts / trials
    half = np.zeros_like(p)
    it = np.nditer(counts, flags=["multi_index"])
    for c in it:
        lo, hi = wilson_interval(int(c), trials, z)
        half[it.multi_index] = max(p[it.multi_index] - lo, hi - p[it.multi_index])
    return OutcomeDistribution(arity, rounds, p, half, name="empirical")


def within_wilson(emp: OutcomeDistribution, exact: OutcomeDistribution) -> bool:
    return bool(np.all(np.abs(emp.probabilities - exact.probabilities) <= emp.halfwidth))


@dataclass(frozen=True)
class CollisionReport:
    frequency: float
    stderr: float
    eps_P: float
    eps_Q_bound: float
    trials: int
    flatness: float | None


def collision_stats(ell: int, k: int, oracle_kind: str, trials: int, rng) -> CollisionReport:
    """Collision frequency among s_1..s_k for the computational-basis parallel policy.

    Fixed-unitary kinds draw a fresh oracle per trial so the frequency averages
    over the hidden unitary as well.
    """
    from .protocols import computational_policy

    if trials < 1:
        raise PreconditionError("trials must be positive")
    pol = computational_policy(ell, k)
    g = as_generator(rng)
    hits = 0
    oracle = make_oracle(oracle_kind, ell, int(g.integers(2**63)))
    for _ in range(trials):
        if oracle.deterministic:
            oracle = make_oracle(oracle_kind, ell, int(g.integers(2**63)))
        t = execute_sm(pol, oracle, g)
        hits += not collision_free(t)
    f = hits / trials
    D = 2**ell
    flat = None
    if D ** (k + 1) <= 4096 and k <= 3:
        flat = flatness(exact_qk_sm(pol, "U", ell))
    return CollisionReport(f, math.sqrt(max(f * (1 - f), 1.0 / trials) / trials),
                           math.comb(k, 2) / D, 2 * k * k * 2 ** (-ell / 4), trials, flat)


@dataclass(frozen=True)
class LevyRow:
    eps: float
    tail: float
    bound: float


@dataclass(frozen=True)
class LevyReport:
    ell: int
    trials: int
    mean: float
    stderr: float
    rows: tuple

    @property
    def ok(self) -> bool:
        return all(r.tail <= r.bound for r in self.rows)


def levy_check(ell: int, trials: int, rng, eps=None) -> LevyReport:
    """Tails of |<alpha|U|beta>|^2 around 1/D against 4 exp(-D eps^2 / (18 pi^2))."""
    if ell < 2:
        raise PreconditionError("ell must be at least 2")
    D = 2**ell
    beta = np.ones(D, dtype=complex) / math.sqrt(D)
    x = np.empty(trials)
    for i in range(trials):
        U = sample_haar_unitary(D, rng)
        x[i] = abs((U @ beta)[0]) ** 2
    eps = eps or (D ** -0.25, 0.1, 0.3)
    rows = tuple(LevyRow(float(e), float(np.mean(np.abs(x - 1 / D) >= e)), 4 * math.exp(-D * e * e / (18 * math.pi**2))) for e in eps)
    return LevyReport(ell, trials, float(x.mean()), float(x.std(ddof=1) / math.sqrt(trials)), rows)
