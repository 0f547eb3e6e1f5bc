"""Acceptance criteria 1-10, each at its stated tolerance and runtime budget.

Every test records one PASS/FAIL line; the lines are printed in the pytest
terminal summary (see conftest.py) and, with ``-s``, as each test finishes.
"""

import filecmp
import time
from fractions import Fraction
from math import factorial

import numpy as np

from qualm_lab.analysis import (bound_quantities, empirical_distribution, exact_correlated, exact_lod, exact_pk,
                                exact_qk_sm, flatness, tvd, within_wilson)
from qualm_lab.circuits import execute_coherent
from qualm_lab.cli import main
from qualm_lab.combinatorics import CycleType
from qualm_lab.experiments import ExperimentConfig, cmd_incoherent_vs_coherent, cmd_distinguish
from qualm_lab.groups import sample_haar_unitary
from qualm_lab.moments import mc_moment_check
from qualm_lab.oracles import make_oracle
from qualm_lab.protocols import (computational_policy, greedy_adaptive_policy, random_basis_policy,
                                 swap_distinguish, swap_test_program, symmetry_program_stage1,
                                 symmetry_program_stage2)
from qualm_lab.sm import execute_sm
from qualm_lab.weingarten import candidate_sum_forms, sum_abs_wg, wg_orthogonal, wg_unitary

RESULTS: dict = {}


class Timer:
    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.seconds = time.perf_counter() - self.t0


def report(n: int, ok: bool, seconds: float, budget: float | None, detail: str = "") -> None:
    in_time = budget is None or seconds < budget
    verdict = "PASS" if ok and in_time else "FAIL"
    limit = "" if budget is None else f" / {budget:.0f} s"
    line = f"criterion {n:2d}: {verdict}  ({seconds:.1f} s{limit}) {detail}".rstrip()
    RESULTS[n] = line
    print(line)
    assert ok, line
    assert in_time, line


def test_criterion_01_exact_weingarten():
    with Timer() as t:
        ok = True
        for D in (4, 8, 16):
            tab = wg_unitary(2, D)
            ok &= tab[CycleType((1, 1))] == Fraction(1, D * D - 1)
            ok &= tab[CycleType((2,))] == Fraction(-1, D * (D * D - 1))
    report(1, ok, t.seconds, 1)


def test_criterion_02_sum_identities():
    notes = []
    with Timer() as t:
        unitary_ok = all(sum_abs_wg("U", k, D) == Fraction(factorial(D - k), factorial(D))
                         for k in range(1, 6) for D in (8, 16))
        sp_ok = True
        for k in range(1, 5):
            for D in (8, 16):
                stated = candidate_sum_forms("Sp", k, D)["rising_by_two"]
                if sum_abs_wg("Sp", k, D) != stated:
                    sp_ok = False
                    notes.append(f"Sp k={k} D={D}: {sum_abs_wg('Sp', k, D)} != stated {stated}")
        wg_orthogonal(5, 16)
        for k in range(1, 6):
            for D in (8, 16):
                s = sum_abs_wg("O", k, D)
                match = [n for n, v in candidate_sum_forms("O", k, D).items() if v == s]
                notes.append(f"O k={k} D={D}: sum={s} matches {match or 'neither form'}")
    for n in notes:
        print(n)
    report(2, unitary_ok and sp_ok, t.seconds, 60,
           f"unitary={'ok' if unitary_ok else 'mismatch'} symplectic_stated={'ok' if sp_ok else 'mismatch'}")


def test_criterion_03_moment_monte_carlo():
    zs = {}
    with Timer() as t:
        ok = True
        for gi, group in enumerate(("U", "O", "Sp")):
            for order in (2, 4):
                chk = mc_moment_check(group, 4, 10**5, np.random.default_rng(100 + 2 * gi + order), order)
                zs[f"{group}{order}"] = round(chk.max_z, 2)
                ok &= chk.passed
    report(3, ok, t.seconds, 30, f"max z {zs}")


def test_criterion_04_swap_test():
    ell, D, n = 4, 16, 10**5
    prog = swap_test_program(ell)
    with Timer() as t:
        loq = max(abs(execute_coherent(prog, make_oracle("LOQ", ell, s), np.random.default_rng(s)).prob_zero() - 1)
                  for s in range(200))
        g = np.random.default_rng(44)
        zeros = sum(execute_coherent(prog, make_oracle("LOP", ell, 10**6 + s), g).outcome == (0,)
                    for s in range(n))
        p = zeros / n
        target = 0.5 + 0.5 / D
        sigma = np.sqrt(target * (1 - target) / n)
        # single-shot (2 query) distinguisher: LOQ always answers 0, LOP answers 1 w.p. 1/2 - 1/(2D)
        error = 0.5 * target
        trials = 500
        hits = sum(swap_distinguish(ell, make_oracle(kind, ell, 7 * s + c), 1, np.random.default_rng(s)).label == kind
                   for c, kind in enumerate(("LOQ", "LOP")) for s in range(trials))
        emp_error = 1 - hits / (2 * trials)
    ok = loq < 1e-9 and abs(p - target) <= 5 * sigma and error < 1 / 3 and emp_error < 1 / 3
    report(4, ok, t.seconds, 60,
           f"LOQ |Pr0-1|={loq:.1e} LOP Pr0={p:.4f} (target {target:.4f}, z={(p - target) / sigma:.2f}) "
           f"error={error:.4f} empirical={emp_error:.4f}")


def test_criterion_05_symmetry_distinction():
    ell = 5
    with Timer() as t:
        analytic = 0.0
        for s in range(10):
            o = make_oracle("LO_O", ell, s)
            analytic = max(analytic, abs(execute_coherent(symmetry_program_stage1(ell), o,
                                                          np.random.default_rng(s)).prob_zero() - 1))
            o = make_oracle("LO_Sp", ell, s)
            analytic = max(analytic, abs(execute_coherent(symmetry_program_stage2(ell), o,
                                                          np.random.default_rng(s)).prob_zero() - 1))
        cfg = ExperimentConfig("symmetry", ell, None, 500, seed=5, reps=20)
        recs, _ = cmd_distinguish(cfg)
        acc = {r.group: r.value for r in recs}
    ok = analytic < 1e-9 and all(v >= 0.99 for v in acc.values())
    report(5, ok, t.seconds, 300, f"accuracy {acc} analytic dev {analytic:.1e}")


def test_criterion_06_exact_distributions():
    with Timer() as t:
        norm = flat = 0.0
        for ell in (1, 2, 3):
            for k in (1, 2, 3):
                for pol in (computational_policy(ell, k), random_basis_policy(ell, k, np.random.default_rng(ell + k)),
                            greedy_adaptive_policy(ell, k)):
                    q = exact_qk_sm(pol, "U", ell)
                    norm = max(norm, abs(q.probabilities.sum() - 1))
                q = exact_qk_sm(computational_policy(ell, k), "U", ell)
                flat = max(flat, flatness(q))
        ell, k = 2, 2
        pol = greedy_adaptive_policy(ell, k)
        emp = empirical_distribution(lambda r: execute_sm(pol, make_oracle("LOQ", ell, int(r.integers(2**62))), r),
                                     10**5, np.random.default_rng(6), 4, k)
        wilson = within_wilson(emp, exact_qk_sm(pol, "U", ell))
    ok = norm < 1e-9 and flat < 1e-12 and wilson
    report(6, ok, t.seconds, 120, f"max |sum-1|={norm:.1e} flatness={flat:.1e} wilson={wilson}")


def test_criterion_07_bound_chain():
    parts = []
    with Timer() as t:
        ok = True
        for ell in (3, 4, 5):
            rep = bound_quantities(computational_policy(ell, 2), ell)
            ok &= rep.chain_ok and bool(rep.key_ok)
            parts.append(f"ell={ell}: {rep.lhs:.4f} <= {rep.rhs:.4f} key={rep.key_ok}")
    report(7, ok, t.seconds, 120, "; ".join(parts))


def test_criterion_08_separation_trend():
    with Timer() as t:
        vals = []
        for ell in range(2, 6):
            pol = computational_policy(ell, 2)
            vals.append(tvd(exact_pk(pol, ell), exact_qk_sm(pol, "U", ell)))
        ratios = [b / a for a, b in zip(vals, vals[1:])]
        cfg = ExperimentConfig("incoherent_vs_coherent", 5, 2, 500, seed=8)
        recs, _ = cmd_incoherent_vs_coherent(cfg)
        coherent = [r.value for r in recs if r.metric == "coherent_bias"]
    ok = (all(b < a for a, b in zip(vals, vals[1:])) and all(0.3 <= r <= 0.7 for r in ratios)
          and all(c >= 0.4 for c in coherent))
    report(8, ok, t.seconds, 120,
           f"tvd {[round(v, 4) for v in vals]} ratios {[round(r, 3) for r in ratios]} "
           f"coherent bias {[round(c, 3) for c in coherent]}")


def test_criterion_09_corollaries():
    with Timer() as t:
        lod_equal = True
        for ell, k in ((2, 2), (2, 3), (3, 2)):
            for pol in (computational_policy(ell, k), greedy_adaptive_policy(ell, k),
                        random_basis_policy(ell, k, np.random.default_rng(k))):
                lod_equal &= np.array_equal(exact_lod(pol, ell).probabilities, exact_pk(pol, ell).probabilities)
        ell = 3
        pol = computational_policy(ell, 2)
        P = exact_pk(pol, ell)
        loq = tvd(P, exact_qk_sm(pol, "U", ell))
        g = np.random.default_rng(9)
        worst = max(tvd(P, exact_correlated(pol, ell, [sample_haar_unitary(8, g)])) for _ in range(5))
    ok = lod_equal and worst <= 1.01 * loq
    report(9, ok, t.seconds, 60, f"LOD==P {lod_equal}; correlated {worst:.5f} vs LOQ {loq:.5f}")


DETERMINISM_RUNS = [
    ("moments", ["--ell", "2", "--trials", "300"]),
    ("wg", ["--ell", "3", "--k", "3"]),
    ("distinguish", ["--ell", "3", "--trials", "40"]),
    ("tvd_scan", ["--ell", "4"]),
    ("incoherent_vs_coherent", ["--ell", "3", "--trials", "60"]),
]


def test_criterion_10_determinism(tmp_path):
    with Timer() as t:
        same = {}
        for command, args in DETERMINISM_RUNS:
            dirs = []
            for i, threads in enumerate((1, 3)):
                out = tmp_path / f"{command}-{i}"
                main([command, "--seed", "11", "--out", str(out), "--threads", str(threads), *args])
                dirs.append(out)
            csvs = [sorted(d.glob("*.csv")) for d in dirs]
            same[command] = (len(csvs[0]) == 1 and [p.name for p in csvs[0]] == [p.name for p in csvs[1]]
                             and filecmp.cmp(csvs[0][0], csvs[1][0], shallow=False))
    report(10, all(same.values()), t.seconds, None, f"identical CSV {same}")

