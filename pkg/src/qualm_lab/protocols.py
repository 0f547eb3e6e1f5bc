"""Ready-made distinguishing protocols.

Coherent side: the two-query SWAP test for fixed versus fresh unitaries and
the two-stage symmetry test telling U, O and Sp oracles apart. Incoherent
side: simple-measurement policies used as baselines. Plus majority-vote
amplification of any distinguisher.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .circuits import CSwap, OracleCall, QualmProgram, Swap, execute_coherent, gate
from .errors import PreconditionError, ShapeError
from .groups import SeededStream, derive_seed, sample_haar_unitary
from .linalg import Povm, as_generator, is_unitary
from .sm import SmPolicy, fixed_policy


@dataclass(frozen=True)
class DistinguisherVerdict:
    label: str
    raw_outcomes: tuple
    repetitions: int


# ---------------------------------------------------------------------------
# coherent programs

def _bell_pairs(a_wires, b_wires) -> list:
    out = []
    for a, b in zip(a_wires, b_wires):
        out += [gate("H", a), gate("CNOT", a, b)]
    return out


def swap_test_program(ell: int, entangled: bool = False) -> QualmProgram:
    """Oracle, swap L with W1, oracle, then a SWAP test of L against W1.

    With ``entangled`` each oracle acts on half of a maximally entangled pair
    (references R1, R2) and the test compares the two Choi states, so
    Pr[0] = (1 + |tr(U^dag U')/D|^2) / 2. The plain variant starts from
    |0^ell> and gives Pr[0] = (1 + |<0|U^dag U'|0>|^2) / 2.
    """
    if ell < 1:
        raise PreconditionError("ell must be at least 1")
    L = list(range(ell))
    W1 = [ell + i for i in range(ell)]
    ins = []
    if entangled:
        R1 = [2 * ell + i for i in range(ell)]
        R2 = [3 * ell + i for i in range(ell)]
        c = 4 * ell
        ins += _bell_pairs(L, R1) + _bell_pairs(W1, R2)
        pairs = list(zip(L, W1)) + list(zip(R2, R1))
    else:
        c = 2 * ell
        pairs = list(zip(L, W1))
    ins.append(OracleCall())
    ins += [Swap(a, b) for a, b in zip(L, W1)]
    ins.append(OracleCall())
    ins.append(gate("H", c))
    ins += [CSwap(c, a, b) for a, b in pairs]
    ins.append(gate("H", c))
    n_work = c - ell + 1
    name = "swap-test-entangled" if entangled else "swap-test"
    return QualmProgram(ell, n_work, ins, s_out=(c - ell,), name=name)


def swap_test_circuit(ell: int) -> QualmProgram:
    """The SWAP test of L against W1 alone (no oracle calls)."""
    c = 2 * ell
    ins = [gate("H", c)] + [CSwap(c, i, ell + i) for i in range(ell)] + [gate("H", c)]
    return QualmProgram(ell, ell + 1, ins, s_out=(ell,), name="swap-test-circuit")


def _symmetry_program(ell: int, stage: int) -> QualmProgram:
    if ell < 1:
        raise PreconditionError("ell must be at least 1")
    L = list(range(ell))
    W1 = [ell + i for i in range(ell)]
    W2 = [2 * ell + i for i in range(ell)]
    W3 = [3 * ell + i for i in range(ell)]
    c = 4 * ell
    ins = _bell_pairs(L, W1) + _bell_pairs(W2, W3) + [gate("H", c)]
    ins.append(OracleCall())
    if stage == 2:
        ins.append(gate("iY", 0))  # J = iY on the leading qubit of L
    ins += [Swap(a, b) for a, b in zip(L, W1)]
    if stage == 2:
        ins.append(gate("iY", 0))
    ins.append(OracleCall())
    ins += [CSwap(c, a, b) for a, b in zip(L + W1, W2 + W3)]
    ins.append(gate("H", c))
    return QualmProgram(ell, 3 * ell + 1, ins, s_out=(3 * ell,), name=f"symmetry-stage{stage}")


def symmetry_program_stage1(ell: int) -> QualmProgram:
    """Outcome 0 (``+``) with probability (1 + |tr(A A^T)/D|^2) / 2."""
    return _symmetry_program(ell, 1)


def symmetry_program_stage2(ell: int) -> QualmProgram:
    """Outcome 0 (``+``) with probability (1 + |tr(A (-J A^T J))/D|^2) / 2."""
    return _symmetry_program(ell, 2)


def _bits(program, oracle, reps: int, rng) -> list:
    """Outcome bits of ``reps`` independent runs of a one-qubit-output program."""
    if oracle.deterministic:
        res = execute_coherent(program, oracle, rng, shots=reps)
        return [o[0] for o in res.outcomes]
    return [execute_coherent(program, oracle, rng).outcome[0] for _ in range(reps)]


def decide_swap(bits) -> str:
    return "LOQ" if all(b == 0 for b in bits) else "LOP"


def swap_distinguish(ell: int, oracle, reps: int = 1, rng=None, entangled: bool = False) -> DistinguisherVerdict:
    """Label LOQ when every SWAP test returns 0, otherwise LOP."""
    if reps < 1:
        raise PreconditionError("reps must be positive")
    bits = _bits(swap_test_program(ell, entangled), oracle, reps, rng)
    return DistinguisherVerdict(decide_swap(bits), tuple(bits), reps)


def decide_symmetry(stage1, stage2) -> str:
    if all(b == 0 for b in stage1):
        return "O"
    if all(b == 0 for b in stage2):
        return "Sp"
    return "U"


def symmetry_distinguish(ell: int, oracle, reps: int = 20, rng=None) -> DistinguisherVerdict:
    """Stage 1 ``reps`` times; only if some run gives ``-``, stage 2 ``reps`` times.

    ``raw_outcomes`` holds (stage, bit) pairs in execution order.
    """
    if reps < 1:
        raise PreconditionError("reps must be positive")
    s1 = _bits(symmetry_program_stage1(ell), oracle, reps, rng)
    s2 = []
    if any(s1):
        s2 = _bits(symmetry_program_stage2(ell), oracle, reps, rng)
    raw = tuple((1, b) for b in s1) + tuple((2, b) for b in s2)
    return DistinguisherVerdict(decide_symmetry(s1, s2), raw, reps)


def label_from_raw(raw_outcomes) -> str:
    """Re-derive a symmetry label from recorded (stage, bit) pairs."""
    s1 = [b for st, b in raw_outcomes if st == 1]
    s2 = [b for st, b in raw_outcomes if st == 2]
    return decide_symmetry(s1, s2)


# ---------------------------------------------------------------------------
# incoherent baselines

def parallel_sm_policy(ell: int, k: int, Y=None, V=None) -> SmPolicy:
    """Every round prepares V|0> and measures in the basis given by the columns of Y."""
    D = 2**ell
    Y = np.eye(D, dtype=complex) if Y is None else np.asarray(Y, dtype=complex)
    V = np.eye(D, dtype=complex) if V is None else np.asarray(V, dtype=complex)
    if Y.shape != (D, D) or V.shape != (D, D):
        raise ShapeError(f"Y and V must be {D}x{D}")
    if not (is_unitary(Y, 1e-9) and is_unitary(V, 1e-9)):
        raise PreconditionError("Y and V must be unitary")
    return fixed_policy(k, Povm.from_basis(Y), V[:, 0], name="parallel")


def computational_policy(ell: int, k: int) -> SmPolicy:
    return parallel_sm_policy(ell, k)


def random_basis_policy(ell: int, k: int, rng) -> SmPolicy:
    """A parallel policy with Haar-random measurement basis and input state."""
    D = 2**ell
    Y = sample_haar_unitary(D, rng)
    V = sample_haar_unitary(D, rng)
    p = parallel_sm_policy(ell, k, Y, V)
    return SmPolicy(p.rounds, p.dim, p.povm_for, p.prepare_for, adaptive=False, name="random-basis")


def greedy_adaptive_policy(ell: int, k: int) -> SmPolicy:
    """Computational-basis measurements; each round re-prepares the last observed basis state.

    Under a fixed unitary this probes the row of |U_xy|^2 selected by the
    previous outcome, which is the natural adaptive guess for spotting repeats.
    """
    D = 2**ell
    povm = Povm.computational(D)
    eye = np.eye(D, dtype=complex)
    return SmPolicy(k, D, lambda h: povm, lambda h: eye[:, h[-1]], adaptive=True, name="greedy-adaptive")


# ---------------------------------------------------------------------------
# amplification

def _child_stream(rng, i: int) -> SeededStream:
    if isinstance(rng, SeededStream):
        return rng.child(i)
    seed = int(as_generator(rng).integers(2**63))
    return SeededStream(derive_seed(seed, i))


def amplify(distinguisher: Callable, m: int, rng) -> DistinguisherVerdict:
    """Majority label over ``m`` runs; run i receives its own derived stream.

    Ties (possible with three labels) go to the label seen first.
    """
    if m < 1 or m % 2 == 0:
        raise PreconditionError("m must be a positive odd integer")
    labels = []
    for i in range(m):
        v = distinguisher(_child_stream(rng, i))
        labels.append(v.label if isinstance(v, DistinguisherVerdict) else v)
    counts = Counter(labels)
    best = max(counts.values())
    label = next(lab for lab in labels if counts[lab] == best)
    return DistinguisherVerdict(label, tuple(labels), m)
