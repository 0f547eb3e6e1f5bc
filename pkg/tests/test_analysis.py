import itertools

import numpy as np
import pytest

from qualm_lab.analysis import (OutcomeDistribution, bias, bound_quantities, collision_free, collision_stats,
                                empirical_distribution, exact_correlated, exact_lod, exact_pk, exact_qk_sm, flatness,
                                levy_check, three_way_bias, tvd, within_wilson)
from qualm_lab.errors import DependencyError, ShapeError, ValidationError
from qualm_lab.groups import sample_haar_batch, sample_haar_unitary
from qualm_lab.oracles import make_oracle
from qualm_lab.protocols import computational_policy, greedy_adaptive_policy, random_basis_policy
from qualm_lab.sm import execute_sm


def test_distribution_validation():
    with pytest.raises(ValidationError):
        OutcomeDistribution(2, 0, [0.5, 0.6])
    with pytest.raises(ValidationError):
        OutcomeDistribution(2, 0, [1.1, -0.1])
    d = OutcomeDistribution(2, 0, [1 + 1e-13, -1e-13])
    assert d[(1,)] == 0.0


def test_tvd_examples():
    p = OutcomeDistribution(2, 0, [1, 0])
    q = OutcomeDistribution(2, 0, [0, 1])
    assert tvd(p, p) == 0
    assert tvd(p, q) == 2
    with pytest.raises(ShapeError):
        tvd(p, OutcomeDistribution(3, 0, [1, 0, 0]))
    assert three_way_bias([p, q, OutcomeDistribution(2, 0, [0.5, 0.5])]) == 1


def test_bias_examples():
    z, o = np.diag([1, 0]), np.diag([0, 1])
    assert bias(z, z) == pytest.approx(0)
    assert bias(z, o) == pytest.approx(2)
    assert bias(z, np.eye(2) / 2) == pytest.approx(1)
    with pytest.raises(ShapeError):
        bias(np.eye(4) / 4, np.eye(4) / 4)


@pytest.mark.parametrize("ell", [1, 2, 3])
def test_k1_is_uniform(ell):
    D = 2**ell
    q = exact_qk_sm(random_basis_policy(ell, 1, np.random.default_rng(ell)), "U", ell)
    p0 = q.marginal([0])
    assert np.allclose(q.probabilities, p0[:, None] / D, atol=1e-12)


def test_exact_pk_masses():
    pol = random_basis_policy(2, 2, np.random.default_rng(0))
    p = exact_pk(pol, 2)
    p0 = p.marginal([0])
    assert np.allclose(p.probabilities, p0[:, None, None] / 16, atol=1e-15)
    assert abs(exact_pk(computational_policy(2, 3), 2).probabilities.sum() - 1) < 1e-15


def test_qk_l1k2_monte_carlo():
    n = 10**6
    U = sample_haar_batch("U", 2, n, np.random.default_rng(1))
    w = np.abs(U[:, :, 0]) ** 2
    q = exact_qk_sm(computational_policy(1, 2), "U", 1)
    for a, b in itertools.product(range(2), repeat=2):
        x = w[:, a] * w[:, b]
        assert abs(x.mean() - q[(0, a, b)]) <= 5 * x.std() / np.sqrt(n)


def test_tvd_direct_summation():
    for ell in (2, 3):
        D = 2**ell
        pol = computational_policy(ell, 2)
        got = tvd(exact_pk(pol, ell), exact_qk_sm(pol, "U", ell))
        # E |U_x0|^2 |U_y0|^2 = (1 + delta_xy) / (D (D + 1))
        direct = sum(abs((1 + (x == y)) / (D * (D + 1)) - 1 / D**2) for x in range(D) for y in range(D))
        assert got == pytest.approx(direct, abs=1e-14)
        assert got == pytest.approx(2 * (D - 1) / (D * (D + 1)), abs=1e-14)


@pytest.mark.parametrize("ell,k", [(1, 3), (2, 2), (2, 3), (3, 3)])
def test_flatness_and_normalization(ell, k):
    q = exact_qk_sm(computational_policy(ell, k), "U", ell)
    assert abs(q.probabilities.sum() - 1) < 1e-9
    assert flatness(q) < 1e-12


@pytest.mark.parametrize("group", ["O", "Sp"])
def test_other_groups_normalized(group):
    q = exact_qk_sm(computational_policy(2, 2), group, 2)
    assert abs(q.probabilities.sum() - 1) < 1e-9


def test_symplectic_singular_table_is_dependency_error():
    with pytest.raises(DependencyError):
        exact_qk_sm(computational_policy(2, 3), "Sp", 2)


def test_qk_matches_monte_carlo_adaptive():
    ell, k, n = 2, 2, 20000
    pol = greedy_adaptive_policy(ell, k)
    exact = exact_qk_sm(pol, "U", ell)
    g = np.random.default_rng(2)
    emp = empirical_distribution(lambda r: execute_sm(pol, make_oracle("LOQ", ell, int(r.integers(2**62))), r),
                                 n, g, 4, k)
    assert within_wilson(emp, exact)


def test_pk_matches_monte_carlo():
    ell, k, n = 2, 2, 20000
    pol = computational_policy(ell, k)
    o = make_oracle("LOP", ell, 1)
    emp = empirical_distribution(lambda r: execute_sm(pol, o, r), n, np.random.default_rng(3), 4, k)
    assert within_wilson(emp, exact_pk(pol, ell))


def test_empirical_distribution_trivial(rng):
    d = empirical_distribution(lambda r: (1,), 100, rng, 2, 0)
    assert d[(1,)] == 1
    n = 100_000
    c = empirical_distribution(lambda r: (int(r.random() < 0.5),), n, rng, 2, 0)
    assert abs(c[(0,)] - 0.5) <= 5 * np.sqrt(0.25 / n)
    assert c.halfwidth[0] > 0


@pytest.mark.parametrize("pol", [computational_policy(2, 2), greedy_adaptive_policy(2, 3)])
def test_lod_equals_lop(pol):
    assert tvd(exact_lod(pol, 2), exact_pk(pol, 2)) == 0


def test_correlated_not_above_loq():
    ell = 3
    pol = computational_policy(ell, 2)
    P = exact_pk(pol, ell)
    loq = tvd(P, exact_qk_sm(pol, "U", ell))
    R = sample_haar_unitary(8, np.random.default_rng(4))
    assert tvd(P, exact_correlated(pol, ell, [R])) <= loq * 1.01
    # R = identity reproduces LOQ
    assert tvd(P, exact_correlated(pol, ell, [np.eye(8)])) == pytest.approx(loq, abs=1e-12)


def test_bound_chain_l4():
    rep = bound_quantities(computational_policy(4, 2), 4)
    assert rep.regime_ok and rep.chain_ok
    assert rep.key_ok
    trans = [r for r in rep.key_rows if r.L == 2]
    assert trans and all(r.worst <= 4 ** 1 * 4 for r in trans)
    assert all(r.bound == 16 for r in trans)


def test_c2_scaling():
    rep = bound_quantities(computational_policy(6, 2), 6)
    assert abs(rep.c2 - 1) < 4 * 4 / 64


def test_collision_stats():
    rep = collision_stats(4, 2, "LOP", 20000, np.random.default_rng(5))
    assert abs(rep.frequency - 1 / 16) <= 5 * rep.stderr
    assert collision_stats(3, 1, "LOQ", 200, np.random.default_rng(0)).frequency == 0
    rep = collision_stats(5, 3, "LOQ", 2000, np.random.default_rng(6))
    assert rep.frequency <= rep.eps_Q_bound
    assert collision_free((0, 1, 2)) and not collision_free((0, 1, 1))


def test_levy():
    rep = levy_check(6, 5000, np.random.default_rng(7), eps=(0.3, 1.0))
    assert rep.ok
    assert rep.rows[1].tail == 0
    assert abs(rep.mean - 1 / 64) <= 5 * rep.stderr
