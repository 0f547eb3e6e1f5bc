import numpy as np
import pytest

from qualm_lab.errors import ConfigError, PreconditionError
from qualm_lab.groups import canonical_J, check_symplectic
from qualm_lab.linalg import DensityMatrix
from qualm_lab.oracles import make_oracle


def zero(D):
    v = np.zeros(D, dtype=complex)
    v[0] = 1
    return v


def test_loq_same_matrix_every_call():
    o = make_oracle("LOQ", 2, 5)
    a = o.channel(zero(4)).matrix
    b = o.channel(zero(4)).matrix
    assert np.allclose(a, b, atol=1e-12)
    U = o.hidden_unitary
    assert np.allclose(a, np.outer(U[:, 0], U[:, 0].conj()))
    assert o.calls == 2


def test_reproducible_hidden_unitary():
    assert np.array_equal(make_oracle("LOQ", 2, 9).hidden_unitary, make_oracle("LOQ", 2, 9).hidden_unitary)
    assert not np.array_equal(make_oracle("LOQ", 2, 9).hidden_unitary, make_oracle("LOQ", 2, 10).hidden_unitary)


def test_symmetry_oracles():
    O = make_oracle("LO^O", 3, 1).hidden_unitary
    assert np.all(O.imag == 0) and np.allclose(O @ O.T, np.eye(8), atol=1e-10)
    S = make_oracle("LO^Sp", 3, 1).hidden_unitary
    J = canonical_J(4)
    assert np.allclose(-J @ S.T @ J, np.linalg.inv(S), atol=1e-10)
    assert check_symplectic(S)


def test_lop_fresh_each_call():
    o = make_oracle("LOP", 2, 3)
    a, b = o.draw().unitary, o.draw().unitary
    assert not np.allclose(a, b)


def test_lop_overlap_moment():
    D, n = 4, 20000
    o = make_oracle("LOP", 2, 12)
    x = np.empty(n)
    for i in range(n):
        a = o.draw().unitary[:, 0]
        b = o.draw().unitary[:, 0]
        x[i] = abs(np.vdot(a, b)) ** 2
    assert abs(x.mean() - 1 / D) <= 5 * x.std() / np.sqrt(n)


def test_lod_maximally_mixed():
    o = make_oracle("LOD", 2, 0)
    out = o.channel(DensityMatrix.from_pure(zero(4)))
    assert np.array_equal(out.matrix, np.eye(4) / 4)
    assert o.calls == 1
    assert not o.is_unitary and not o.deterministic


def test_state_ensemble_replaces_state():
    o = make_oracle("state_ensemble", 2, 4, {"mode": "fixed"})
    psi = o.hidden["states"][0]
    out = o.channel(np.eye(4)[:, 3])
    assert np.allclose(out.matrix, np.outer(psi, psi.conj()))
    fresh = make_oracle("LOS", 2, 4, {"mode": "fresh"})
    a, b = fresh.draw().state, fresh.draw().state
    assert not np.allclose(a, b)


def test_correlated_rotations():
    R = np.diag([1, 1j, -1, -1j])
    o = make_oracle("correlated", 2, 8, {"rotations": [R]})
    U = o.hidden_unitary
    assert np.allclose(o.draw().unitary, U)
    assert np.allclose(o.draw().unitary, U @ R)
    with pytest.raises(PreconditionError):
        o.draw()
    g = make_oracle("correlated", 2, 8, {"rotation_seed": 3, "rotation_angle": 0.0})
    assert np.allclose(g.draw().unitary, g.draw().unitary)


def test_hidden_unitary_hook():
    o = make_oracle("LOQ", 1, 0, {"hidden_unitary": np.eye(2)})
    assert np.array_equal(o.hidden_unitary, np.eye(2))
    with pytest.raises(ConfigError):
        make_oracle("LOP", 1, 0, {"hidden_unitary": np.eye(2)})
    with pytest.raises(ConfigError):
        make_oracle("LOQ", 1, 0, {"hidden_unitary": np.ones((2, 2))})


def test_unknown_kind():
    with pytest.raises(ConfigError):
        make_oracle("LOX", 2, 0)
    with pytest.raises(ConfigError):
        make_oracle("state_ensemble", 2, 0, {"mode": "odd"})
