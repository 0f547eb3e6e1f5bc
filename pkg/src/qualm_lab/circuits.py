"""QUALM programs and a coherent executor.

Wires are numbered globally: the lab register L occupies wires 0..ell-1 and the
workspace W occupies wires ell..ell+|W|-1. ``s_in`` and ``s_out`` are given as
offsets inside W. Basis order is big-endian, so a gate matrix on wires
(a, b) has wire a as its most significant bit.

The executor keeps the state as a product of pure blocks and merges blocks
only when a gate couples them. SWAPs are wire relabelings and cost nothing.
Oracle calls either apply a unitary to L or (for non-unitary oracles) measure
L in the computational basis, discard the result and install the replacement
state; averaged over runs this reproduces the channel exactly.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .errors import PreconditionError, ShapeError, SizeError, ValidationError
from .linalg import DensityMatrix, _sample_index, as_generator, is_unitary

MAX_CIRCUIT_QUBITS = 24

H = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Z = np.array([[1, 0], [0, -1]], dtype=complex)
IY = np.array([[0, 1], [-1, 0]], dtype=complex)
CNOT = np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex)
STANDARD_GATES = {"H": H, "X": X, "Z": Z, "iY": IY, "CNOT": CNOT}


@dataclass(frozen=True)
class Gate:
    name: str
    qubits: tuple
    matrix: np.ndarray = field(repr=False, compare=False)

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        n = len(self.qubits)
        if m.shape != (2**n, 2**n):
            raise ShapeError(f"gate {self.name} on {n} qubits needs a {2**n}x{2**n} matrix")
        if len(set(self.qubits)) != n:
            raise ShapeError("gate qubits must be distinct")
        if not is_unitary(m, 1e-9):
            raise ValidationError(f"gate {self.name} is not unitary")
        object.__setattr__(self, "qubits", tuple(int(q) for q in self.qubits))
        object.__setattr__(self, "matrix", m)


@dataclass(frozen=True)
class Swap:
    a: int
    b: int


@dataclass(frozen=True)
class CSwap:
    control: int
    a: int
    b: int


@dataclass(frozen=True)
class OracleCall:
    pass


def gate(name: str, *qubits: int) -> Gate:
    return Gate(name, tuple(qubits), STANDARD_GATES[name])


def _wires(ins) -> tuple:
    if isinstance(ins, Gate):
        return ins.qubits
    if isinstance(ins, Swap):
        return (ins.a, ins.b)
    if isinstance(ins, CSwap):
        return (ins.control, ins.a, ins.b)
    return ()


@dataclass(frozen=True)
class QualmProgram:
    """An ordered instruction list over L (ell wires) and W (n_work wires)."""

    ell: int
    n_work: int
    instructions: tuple
    s_out: tuple
    s_in: tuple = ()
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "instructions", tuple(self.instructions))
        object.__setattr__(self, "s_out", tuple(int(i) for i in self.s_out))
        object.__setattr__(self, "s_in", tuple(int(i) for i in self.s_in))
        if self.ell < 1 or self.n_work < 1:
            raise PreconditionError("need ell >= 1 and a non-empty workspace")
        if self.ell + self.n_work > MAX_CIRCUIT_QUBITS:
            raise SizeError(f"{self.ell + self.n_work} wires exceed {MAX_CIRCUIT_QUBITS}")
        if not self.s_out:
            raise PreconditionError("s_out must be non-empty")
        for i in self.s_out + self.s_in:
            if not 0 <= i < self.n_work:
                raise ShapeError(f"register offset {i} lies outside W")
        if len(set(self.s_out)) != len(self.s_out):
            raise ShapeError("s_out has repeated wires")
        n = self.num_wires
        for ins in self.instructions:
            if not isinstance(ins, (Gate, Swap, CSwap, OracleCall)):
                raise TypeError(f"unknown instruction {ins!r}")
            w = _wires(ins)
            if any(not 0 <= q < n for q in w):
                raise ShapeError(f"{ins!r} touches a wire outside 0..{n - 1}")
            if len(set(w)) != len(w):
                raise ShapeError(f"{ins!r} repeats a wire")
        object.__setattr__(self, "_steps", tuple(_fused(self.instructions)))

    @property
    def num_wires(self) -> int:
        return self.ell + self.n_work

    def work(self, i: int) -> int:
        """Global wire of workspace offset ``i``."""
        return self.ell + i

    @property
    def query_complexity(self) -> int:
        return sum(isinstance(i, OracleCall) for i in self.instructions)

    @property
    def gate_complexity(self) -> int:
        return sum(not isinstance(i, OracleCall) for i in self.instructions)


@dataclass
class CoherentResult:
    """Outcome bits on s_out, their distribution and the reduced output state.

    For oracles with random hidden state the distribution is conditioned on
    the matrices sampled during this run.
    """

    outcomes: list
    probabilities: np.ndarray
    density: DensityMatrix

    @property
    def outcome(self) -> tuple:
        return self.outcomes[0]

    def prob_zero(self) -> float:
        return float(self.probabilities[0])


class _Blocks:
    """Product of pure blocks. Each block is (wire list, tensor with one axis per wire)."""

    def __init__(self, n: int):
        self.block_of = list(range(n))
        self.blocks = {q: ([q], np.array([1, 0], dtype=complex)) for q in range(n)}
        self._ids = itertools.count(n)

    def set_block(self, wires, vec) -> None:
        """Replace the state of unentangled wires by ``vec``."""
        for q in wires:
            bid = self.block_of[q]
            if self.blocks[bid][0] != [q]:
                raise PreconditionError("cannot overwrite an entangled wire")
            del self.blocks[bid]
        self.install(wires, vec)

    def merge(self, qs) -> int:
        """Fuse the blocks holding ``qs``; the block of qs[0] keeps the leading axes."""
        bids = []
        for q in qs:
            b = self.block_of[q]
            if b not in bids:
                bids.append(b)
        if len(bids) == 1:
            return bids[0]
        if sum(self.blocks[b][1].ndim for b in bids) > MAX_CIRCUIT_QUBITS:
            raise SizeError("state too large")
        # smallest factors first keeps the intermediate products small
        rest = sorted(bids[1:], key=lambda b: self.blocks[b][1].ndim)
        wires, t = self.blocks.pop(bids[0])
        wires = list(wires)
        for b in rest:
            w2, t2 = self.blocks.pop(b)
            t = np.multiply.outer(t, t2)
            wires += w2
        bid = bids[0]
        self.blocks[bid] = (wires, t)
        for q in wires:
            self.block_of[q] = bid
        return bid

    def apply(self, qs, U: np.ndarray) -> None:
        bid = self.merge(qs)
        wires, t = self.blocks[bid]
        m = len(qs)
        axes = [wires.index(q) for q in qs]
        if axes != list(range(m)):
            # move the targets to the front and keep that axis order afterwards
            order = axes + [i for i in range(t.ndim) if i not in axes]
            t = t.transpose(order)
            wires = [wires[i] for i in order]
        t = (U @ t.reshape(2**m, -1)).reshape(t.shape)
        self.blocks[bid] = (wires, t)

    def relabel(self, a: int, b: int) -> None:
        ba, bb = self.block_of[a], self.block_of[b]
        wa = self.blocks[ba][0]
        wa[wa.index(a)] = -1
        wb = self.blocks[bb][0]
        wb[wb.index(b)] = a
        wa[wa.index(-1)] = b
        self.block_of[a], self.block_of[b] = bb, ba

    def cswaps(self, control: int, pairs) -> None:
        bid = self.merge([control] + [q for p in pairs for q in p])
        wires, t = self.blocks[bid]
        c = wires.index(control)
        if c:
            order = [c] + [i for i in range(t.ndim) if i != c]
            t = t.transpose(order)
            wires = [wires[i] for i in order]
        sub = wires[1:]
        perm = list(range(len(sub)))
        for a, b in pairs:
            ia, ib = sub.index(a), sub.index(b)
            perm[ia], perm[ib] = perm[ib], perm[ia]
        out = np.empty(t.shape, dtype=complex)
        out[0] = t[0]
        out[1] = t[1].transpose(perm)
        self.blocks[bid] = (wires, out)

    def measure_and_remove(self, qs, rng) -> None:
        """Computational-basis measurement of wires ``qs``; their axes are removed."""
        for q in qs:
            bid = self.block_of[q]
            wires, t = self.blocks[bid]
            i = wires.index(q)
            t = np.moveaxis(t, i, 0)
            p = np.array([np.vdot(t[0], t[0]).real, np.vdot(t[1], t[1]).real])
            x = _sample_index(p, rng)
            rest = t[x] / np.sqrt(p[x])
            wires = wires[:i] + wires[i + 1:]
            del self.blocks[bid]
            if wires:
                nb = next(self._ids)
                self.blocks[nb] = (wires, rest)
                for w in wires:
                    self.block_of[w] = nb
            self.block_of[q] = None

    def install(self, qs, vec) -> None:
        bid = next(self._ids)
        self.blocks[bid] = (list(qs), np.asarray(vec, dtype=complex).reshape((2,) * len(qs)))
        for q in qs:
            self.block_of[q] = bid

    def reduced(self, qs) -> np.ndarray:
        """Reduced density matrix on wires ``qs`` (in that order)."""
        groups = {}
        for q in qs:
            groups.setdefault(self.block_of[q], []).append(q)
        rho = None
        order = []
        for bid, sub in groups.items():
            wires, t = self.blocks[bid]
            keep = [wires.index(q) for q in sub]
            other = [i for i in range(len(wires)) if i not in keep]
            if keep != list(range(len(keep))):
                t = np.transpose(t, keep + other)
            m = t.reshape(2 ** len(keep), -1)
            if m.shape[0] <= 16:
                r = np.array([[np.vdot(m[j], m[i]) for j in range(m.shape[0])] for i in range(m.shape[0])])
            else:
                r = m @ m.conj().T
            rho = r if rho is None else np.kron(rho, r)
            order += sub
        n = len(qs)
        if order != list(qs):
            perm = [order.index(q) for q in qs]
            rho = rho.reshape((2,) * (2 * n)).transpose(perm + [p + n for p in perm]).reshape(2**n, 2**n)
        return rho


def _fused(instructions):
    """Group runs of CSwap sharing a control into one step."""
    out = []
    for ins in instructions:
        if isinstance(ins, CSwap) and out and isinstance(out[-1], tuple) and out[-1][0] == ins.control:
            out[-1][1].append((ins.a, ins.b))
        elif isinstance(ins, CSwap):
            out.append((ins.control, [(ins.a, ins.b)]))
        else:
            out.append(ins)
    return out


def execute_coherent(program: QualmProgram, oracle, rng, x_in=None, shots: int = 1, init_states=None) -> CoherentResult:
    """Run ``program`` against ``oracle`` and measure s_out in the computational basis.

    ``x_in`` is the classical input written to s_in. ``init_states`` maps a
    tuple of global wires to a state vector and overrides their |0> start.
    ``shots`` > 1 draws that many outcomes from one simulation and is only
    allowed for oracles that apply one fixed unitary on every call; the call
    counter still advances once per marker per shot.
    """
    if oracle is not None and oracle.ell != program.ell:
        raise ShapeError(f"oracle acts on {oracle.ell} qubits, program expects {program.ell}")
    if program.query_complexity and oracle is None:
        raise PreconditionError("program calls an oracle but none was given")
    if shots < 1:
        raise PreconditionError("shots must be positive")
    if shots > 1 and not (oracle is None or oracle.deterministic):
        raise PreconditionError("several shots per simulation need a fixed-unitary oracle")
    g = as_generator(rng)
    st = _Blocks(program.num_wires)
    x_in = tuple(x_in or ())
    if len(x_in) != len(program.s_in):
        raise ShapeError("input string length differs from |s_in|")
    for off, bit in zip(program.s_in, x_in):
        if bit:
            st.apply([program.work(off)], X)
    for wires, vec in (init_states or {}).items():
        wires = tuple(wires)
        if np.asarray(vec).size != 2 ** len(wires):
            raise ShapeError("initial state has the wrong dimension")
        st.set_block(wires, vec)
    L = list(range(program.ell))
    for ins in program._steps:
        if isinstance(ins, Gate):
            st.apply(list(ins.qubits), ins.matrix)
        elif isinstance(ins, Swap):
            st.relabel(ins.a, ins.b)
        elif isinstance(ins, tuple):
            st.cswaps(ins[0], ins[1])
        else:
            act = oracle.draw()
            if act.unitary is not None:
                st.apply(L, act.unitary)
            else:
                st.measure_and_remove(L, g)
                st.install(L, act.state)
    if shots > 1 and oracle is not None:
        oracle.calls += program.query_complexity * (shots - 1)
    out = [program.work(i) for i in program.s_out]
    rho = st.reduced(out)
    p = np.clip(np.diagonal(rho).real, 0.0, None)
    p = p / p.sum()
    n = len(out)
    outcomes = []
    for _ in range(shots):
        i = _sample_index(p, g)
        outcomes.append(tuple((i >> (n - 1 - j)) & 1 for j in range(n)))
    return CoherentResult(outcomes, p, DensityMatrix(rho, validate=False))
