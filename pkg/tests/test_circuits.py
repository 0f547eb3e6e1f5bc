import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qualm_lab.circuits import CSwap, Gate, OracleCall, QualmProgram, Swap, execute_coherent, gate
from qualm_lab.errors import PreconditionError, ShapeError, SizeError, ValidationError
from qualm_lab.oracles import make_oracle


def _op_on(n, qubits, m):
    """Dense operator of a gate on ``qubits`` of an n-wire register (wire 0 most significant)."""
    k = len(qubits)
    rest = [q for q in range(n) if q not in qubits]
    order = list(qubits) + rest
    full = np.kron(m, np.eye(2 ** (n - k)))
    T = full.reshape([2] * (2 * n))
    inv = np.argsort(order)
    T = T.transpose(list(inv) + [n + i for i in inv])
    return T.reshape(2**n, 2**n)


SWAP = np.eye(4)[[0, 2, 1, 3]]
CSWAP = np.eye(8)[[0, 1, 2, 3, 4, 6, 5, 7]]


def _dense_run(prog, U):
    n = prog.num_wires
    psi = np.zeros(2**n, dtype=complex)
    psi[0] = 1
    for ins in prog.instructions:
        if isinstance(ins, Gate):
            psi = _op_on(n, ins.qubits, ins.matrix) @ psi
        elif isinstance(ins, Swap):
            psi = _op_on(n, (ins.a, ins.b), SWAP) @ psi
        elif isinstance(ins, CSwap):
            psi = _op_on(n, (ins.control, ins.a, ins.b), CSWAP) @ psi
        else:
            psi = _op_on(n, tuple(range(prog.ell)), U) @ psi
    out = [prog.work(i) for i in prog.s_out]
    T = np.abs(psi.reshape([2] * n)) ** 2
    drop = tuple(q for q in range(n) if q not in out)
    p = T.sum(axis=drop)
    # remaining axes are in ascending wire order; outcome bits follow s_out order
    p = p.transpose(np.argsort(np.argsort(out)))
    return p.reshape(-1)


def _instruction(draw, n):
    kinds = ["H", "X", "iY", "CNOT", "Swap", "CSwap", "Oracle"]
    kind = draw(st.sampled_from(kinds if n >= 3 else kinds[:5] + ["Oracle"]))
    wires = draw(st.permutations(range(n)))
    if kind in ("H", "X", "iY"):
        return gate(kind, wires[0])
    if kind == "CNOT":
        return gate("CNOT", wires[0], wires[1])
    if kind == "Swap":
        return Swap(wires[0], wires[1])
    if kind == "CSwap":
        return CSwap(wires[0], wires[1], wires[2])
    return OracleCall()


@settings(max_examples=150)
@given(st.data())
def test_matches_dense_simulation(data):
    ell = data.draw(st.integers(1, 2))
    n_work = data.draw(st.integers(1, 3))
    n = ell + n_work
    ins = [_instruction(data.draw, n) for _ in range(data.draw(st.integers(0, 10)))]
    s_out = tuple(data.draw(st.permutations(range(n_work)))[:data.draw(st.integers(1, min(2, n_work)))])
    prog = QualmProgram(ell, n_work, ins, s_out)
    seed = data.draw(st.integers(0, 2**32 - 1))
    oracle = make_oracle("LOQ", ell, seed)
    res = execute_coherent(prog, oracle, np.random.default_rng(0))
    ref = _dense_run(prog, oracle.hidden_unitary)
    assert np.allclose(res.probabilities, ref, atol=1e-10)
    assert np.allclose(np.diag(res.density.matrix).real, ref, atol=1e-10)
    assert oracle.calls == prog.query_complexity


def test_empty_program():
    prog = QualmProgram(1, 1, [], s_out=(0,))
    res = execute_coherent(prog, None, np.random.default_rng(0))
    assert res.outcome == (0,) and res.prob_zero() == 1


def test_lod_gives_uniform_output():
    prog = QualmProgram(1, 1, [OracleCall(), Swap(0, 1)], s_out=(0,))
    res = execute_coherent(prog, make_oracle("LOD", 1, 0), np.random.default_rng(0))
    assert res.probabilities[res.outcome[0]] == pytest.approx(1.0)
    counts = np.zeros(2)
    g = np.random.default_rng(1)
    o = make_oracle("LOD", 1, 2)
    n = 4000
    for _ in range(n):
        counts[execute_coherent(prog, o, g).outcome[0]] += 1
    assert abs(counts[0] / n - 0.5) <= 5 * np.sqrt(0.25 / n)


def test_complexity_counters():
    prog = QualmProgram(1, 2, [gate("H", 1), OracleCall(), Swap(0, 1), OracleCall(), CSwap(2, 0, 1)], s_out=(1,))
    assert prog.query_complexity == 2
    assert prog.gate_complexity == 3


def test_input_bits():
    prog = QualmProgram(1, 2, [gate("CNOT", 1, 2)], s_out=(1,), s_in=(0,))
    res = execute_coherent(prog, None, np.random.default_rng(0), x_in=(1,))
    assert res.outcome == (1,)


def test_validation():
    with pytest.raises(PreconditionError):
        QualmProgram(1, 1, [], s_out=())
    with pytest.raises(ShapeError):
        QualmProgram(1, 1, [], s_out=(1,))
    with pytest.raises(ShapeError):
        QualmProgram(1, 1, [Swap(0, 5)], s_out=(0,))
    with pytest.raises(SizeError):
        QualmProgram(12, 13, [], s_out=(0,))
    with pytest.raises(ValidationError):
        Gate("bad", (0,), np.ones((2, 2)))
    prog = QualmProgram(1, 1, [OracleCall()], s_out=(0,))
    with pytest.raises(PreconditionError):
        execute_coherent(prog, None, np.random.default_rng(0))
    with pytest.raises(PreconditionError):
        execute_coherent(prog, make_oracle("LOP", 1, 0), np.random.default_rng(0), shots=3)
    with pytest.raises(ShapeError):
        execute_coherent(prog, make_oracle("LOQ", 2, 0), np.random.default_rng(0))


def test_shots_count_calls():
    prog = QualmProgram(1, 1, [OracleCall(), OracleCall()], s_out=(0,))
    o = make_oracle("LOQ", 1, 0)
    res = execute_coherent(prog, o, np.random.default_rng(0), shots=5)
    assert len(res.outcomes) == 5
    assert o.calls == 10
