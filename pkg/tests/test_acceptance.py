"""Acceptance suite: every quantitative exit criterion at its stated tolerance.

Each test prints one PASS/FAIL line.  Criteria 1-9 drive the check
implementations shared with the `demo` subcommand and re-assert the pinned
tolerances explicitly; criterion 10 runs the demo twice and compares the
output trees byte for byte.
"""

import filecmp
import math
import os

import pytest

from softbrems import checks, cli

SEED = 20260810


def report(name, result):
    status = "PASS" if result else "FAIL"
    print(f"\n[acceptance] {status} {name}")
    return result


def test_criterion_01_soft_spectrum_law():
    r = checks.check_soft_spectrum_law(SEED)
    assert r.metrics["max_flatness_dev"] <= 1e-3
    assert r.metrics["fit_residual"] < 0.01
    assert r.metrics["runtime_ok"] and r.elapsed < 10.0
    assert report("1 soft-spectrum-law (omega dN/domega flat to 0.1%)", r.passed)


def test_criterion_02_log_divergence():
    r = checks.check_log_divergence(SEED)
    assert r.metrics["r_squared"] > 0.999
    assert r.metrics["c_coefficient"] > 0.0
    assert r.metrics["halving_dev"] <= 0.01
    assert report("2 log-divergence (N ~ a + c ln(omega_max/omega_min))", r.passed)


def test_criterion_03_vacuum_overlap():
    r = checks.check_vacuum_overlap(SEED)
    assert r.metrics["identity_gap"] <= 1e-10
    assert r.metrics["fock_rel_gap"] <= 0.01
    assert r.metrics["runtime_ok"] and r.elapsed < 60.0
    assert report("3 vacuum-overlap (exp(-N/2), Fock build to 1%)", r.passed)


def test_criterion_04_displacement_convention():
    r = checks.check_displacement_convention(SEED)
    assert r.metrics["max_residual"] < 1e-8
    assert r.metrics["edge_full_block"] > r.metrics["edge_restricted"]
    assert report("4 displacement-convention (residual < 1e-8, |alpha| <= 2)", r.passed)


def test_criterion_05_interference_suppression():
    r = checks.check_interference_suppression(SEED)
    assert r.metrics["bound_trials"] >= 1000
    assert r.metrics["bound_violations"] == 0
    assert abs(r.metrics["branch_dalpha_sq"] - 20.0) < 1e-6
    assert r.metrics["branch_max_it"] < 1e-7
    assert report("5 interference-suppression (bound always; branch IT < 1e-7)", r.passed)


def test_criterion_06_collapse_sweep():
    r = checks.check_collapse_sweep(SEED)
    assert r.metrics["monotone"]
    assert r.metrics["offdiag_ratio"] < 1e-3
    assert report("6 collapse-sweep (monotone off-diagonals, 1e-3 suppression)", r.passed)


def test_criterion_07_telescoping():
    r = checks.check_telescoping(SEED)
    assert r.metrics["chains"] >= 1000
    assert r.metrics["worst_rel_gap"] <= 1e-12
    assert report("7 telescoping (1000 chains equal endpoint to 1e-12)", r.passed)


def test_criterion_08_return_probability():
    r = checks.check_return_probability(SEED)
    assert abs(r.metrics["slope"] - 1.0) <= 0.05
    assert r.metrics["runtime_ok"] and r.elapsed < 120.0
    for row in r.rows:
        assert row["ci_low"] <= row["delta"] <= row["ci_high"]
    assert report("8 return-probability (log-log slope 1.00 +- 0.05)", r.passed)


def test_criterion_09_detector_model():
    r = checks.check_detector_model(SEED)
    assert r.metrics["abs_gap"] <= 0.005
    assert report("9 detector-model (Poisson MC matches 1 - exp(-N_tail) to 0.5%)", r.passed)


def _tree_files(root):
    out = []
    for base, _, files in os.walk(root):
        for f in files:
            out.append(os.path.relpath(os.path.join(base, f), root))
    return sorted(out)


def test_criterion_10_demo_determinism(tmp_path, capsys):
    d1, d2 = str(tmp_path / "run1"), str(tmp_path / "run2")
    code1 = cli.main(["demo", "--out", d1, "--seed", str(SEED)])
    code2 = cli.main(["demo", "--out", d2, "--seed", str(SEED)])
    capsys.readouterr()
    assert code1 == 0 and code2 == 0
    files1, files2 = _tree_files(d1), _tree_files(d2)
    assert files1 == files2 and files1
    identical = True
    for rel in files1:
        if not filecmp.cmp(os.path.join(d1, rel), os.path.join(d2, rel), shallow=False):
            identical = False
    assert report("10 determinism (demo trees byte-identical)", identical)
