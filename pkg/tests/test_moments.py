import itertools

import numpy as np
import pytest

from qualm_lab.errors import PreconditionError
from qualm_lab.moments import (closed_form_fourth, closed_form_second, fourth_entry_from_tensor, mc_moment_check,
                               moment_tensor)


@pytest.mark.parametrize("group", ["U", "O", "Sp"])
def test_closed_forms_match_weingarten_tensor(group):
    D = 4
    M = moment_tensor(group, 2, D)
    for idx in itertools.product(range(D), repeat=8):
        assert abs(fourth_entry_from_tensor(M, D, idx) - closed_form_fourth(group, D, idx)) < 1e-14
    M1 = moment_tensor(group, 1, D)
    for i1, j1, i2, j2 in itertools.product(range(D), repeat=4):
        assert abs(M1[i1, i2, j1, j2] - closed_form_second(group, D, (i1, j1, i2, j2))) < 1e-14


def test_orthogonal_coefficients():
    D = 4
    assert closed_form_fourth("O", D, (0, 0, 0, 0, 0, 0, 0, 0)) == pytest.approx(3 * (D + 1) / (D * (D - 1) * (D + 2)) - 6 / (D * (D - 1) * (D + 2)))
    assert closed_form_fourth("O", D, (0, 0, 1, 1, 0, 0, 1, 1)) == pytest.approx((D + 1) / (D * (D - 1) * (D + 2)))
    assert closed_form_fourth("O", D, (0, 0, 1, 1, 0, 1, 1, 0)) == pytest.approx(-1 / (D * (D - 1) * (D + 2)))


def test_symplectic_coefficient():
    D = 4
    assert closed_form_fourth("Sp", D, (0, 0, 1, 1, 0, 0, 1, 1)) == pytest.approx((D - 1) / (D * (D + 1) * (D - 2)))


def test_unitary_fourth_is_haar_k2():
    D = 4
    assert closed_form_fourth("U", D, (0, 0, 1, 1, 0, 0, 1, 1)) == pytest.approx(1 / (D * D - 1))
    assert closed_form_fourth("U", D, (0, 0, 1, 1, 1, 0, 0, 1)) == pytest.approx(-1 / (D * (D * D - 1)))


@pytest.mark.parametrize("group", ["U", "O", "Sp"])
@pytest.mark.parametrize("order", [2, 4])
def test_mc_small(group, order):
    chk = mc_moment_check(group, 4, 20000, np.random.default_rng(11), order, n_zero=200)
    assert chk.passed, chk


def test_mc_detects_wrong_group():
    # orthogonal samples violate the unitary fourth moment
    from qualm_lab import moments

    orig = moments.sample_haar_batch
    try:
        moments.sample_haar_batch = lambda group, D, n, g: orig("O", D, n, g)
        chk = mc_moment_check("U", 4, 20000, np.random.default_rng(3), 4, n_zero=200)
    finally:
        moments.sample_haar_batch = orig
    assert not chk.passed


def test_mc_bad_order():
    with pytest.raises(PreconditionError):
        mc_moment_check("U", 4, 100, np.random.default_rng(0), 3)


@pytest.mark.parametrize("group", ["U", "O", "Sp"])
def test_entry_power_moment(group):
    from qualm_lab.groups import sample_haar_batch
    from qualm_lab.moments import entry_power_moment

    G = sample_haar_batch(group, 4, 100_000, np.random.default_rng(2))
    for p in (1, 2, 4):
        x = np.abs(G[:, 0, 0]) ** (2 * p)
        assert abs(x.mean() - entry_power_moment(group, 4, p)) <= 5 * x.std() / np.sqrt(len(x))
    assert entry_power_moment(group, 4, 1) == pytest.approx(1 / 4)


def test_small_sample_check_passes():
    for seed in range(5):
        for group in ("U", "O", "Sp"):
            assert mc_moment_check(group, 4, 10, np.random.default_rng(seed), 4, n_zero=100).passed
