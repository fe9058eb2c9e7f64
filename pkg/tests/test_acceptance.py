"""The twelve acceptance criteria at their stated tolerances.

The suite runs twice (once per module) so criterion 12 can compare the two
reports byte for byte; each test prints its PASS/FAIL line.
"""
import math
import time

import pytest

from tamegeom import acceptance as ac

SEED = 0


@pytest.fixture(scope="module")
def suite():
    runs, seconds = [], []
    for _ in range(2):
        t = time.perf_counter()
        runs.append(ac.run_acceptance(SEED))
        seconds.append(time.perf_counter() - t)
    c12 = ac.determinism(runs[0], runs[1], sum(seconds))
    return runs[0], c12, ac.timing_report(runs[0], seconds)


def _show(capsys, crit):
    with capsys.disabled():
        print("\n" + crit.line())


def test_criterion_1_convex_sum_formula(suite, capsys):
    c = suite[0].by_number(1)
    _show(capsys, c)
    d = c.detail
    assert d["pairs"] == 20 and d["s_values"] == 11 and d["points"] == 50
    assert d["max_rel_err_analytic"] <= 1e-6
    assert d["max_rel_err_fd"] <= 5e-3
    assert suite[2]["criterion_1"]["analytic_seconds"] <= 60.0
    assert c.passed


def test_criterion_2_curvature_bound(suite, capsys):
    c = suite[0].by_number(2)
    _show(capsys, c)
    for pair in c.detail["per_pair"]:
        assert len(pair["per_s"]) == 11
        for row in pair["per_s"]:
            assert row["sup_norm_Rs"] <= row["bound"] * (1 + 1e-12)
    assert c.passed


def test_criterion_3_pinching(suite, capsys):
    c = suite[0].by_number(3)
    _show(capsys, c)
    d = c.detail
    assert d["runs"] == 1 + 3 * 50
    assert d["max_prediction_residual"] <= 1e-10
    assert d["all_in_envelope"] and d["min_reciprocal"] >= 0.5 - 1e-10
    assert d["diag_example"]["upper_bound"] == 1.125
    assert abs(max(d["diag_example"]["value_at_half"]) - 1.125) <= 1e-10
    assert c.passed


def test_criterion_4_matrix_identity(suite, capsys):
    c = suite[0].by_number(4)
    _show(capsys, c)
    assert c.detail["max_identity_residual"] <= 1e-10
    assert c.passed


def test_criterion_5_J_path_invariants(suite, capsys):
    c = suite[0].by_number(5)
    _show(capsys, c)
    d = c.detail
    assert d["vectors_per_t"] == 10_000
    assert d["max_J_squared"] <= 1e-10 and d["max_symplectic_defect"] <= 1e-10
    assert d["min_taming"] > 0 and d["sandwich_violations"] == 0
    assert c.passed


def test_criterion_6_retraction(suite, capsys):
    c = suite[0].by_number(6)
    _show(capsys, c)
    assert c.detail["structures"] == 100 and c.detail["max_residual"] <= 1e-10
    assert c.passed


def test_criterion_7_jordan(suite, capsys):
    c = suite[0].by_number(7)
    _show(capsys, c)
    assert c.detail["matrices"] == 1000 and c.detail["failures"] == 0
    assert c.detail["max_mismatch"] <= 1e-8
    assert c.passed


def test_criterion_8_geodesics(suite, capsys):
    c = suite[0].by_number(8)
    _show(capsys, c)
    d = c.detail
    assert max(d["max_drift"].values()) <= 1e-8 * 10
    assert abs(d["sphere"]["lower_bound"] - math.pi) <= 0.02 * math.pi
    assert abs(d["cylinder"]["lower_bound"] - math.pi) <= 0.02 * math.pi
    assert d["disk"]["capped"]
    assert c.passed


def test_criterion_9_ift(suite, capsys):
    c = suite[0].by_number(9)
    _show(capsys, c)
    d = c.detail
    assert d["exact"]
    cert = d["certificate"]
    assert cert["constants"]["R2"] == pytest.approx(1 / 3)
    assert cert["pairs"] == 10_000 and cert["collisions"] == 0
    assert isinstance(d["lipschitz_2L_recorded"], bool)
    assert c.passed


def test_criterion_10_transition_second_derivatives(suite, capsys):
    c = suite[0].by_number(10)
    _show(capsys, c)
    d = c.detail
    assert len(d["per_point"]) == 5
    for row in d["per_point"]:
        assert math.isfinite(row["coarse"]) and math.isfinite(row["fine"])
        assert abs(row["fine"] - row["coarse"]) <= 0.1 * row["coarse"] + 1e-6
    assert c.passed


def test_criterion_11_injectivity_paths(suite, capsys):
    c = suite[0].by_number(11)
    _show(capsys, c)
    for path in c.detail["paths"]:
        assert path["max_adjacent_change"] <= 0.1
        assert path["path_min"] >= 0.5 * path["endpoint_min"]
    assert c.passed


def test_criterion_12_determinism_and_runtime(suite, capsys):
    _, c12, timing = suite
    _show(capsys, c12)
    assert c12.detail["identical"]
    assert max(timing["suite_seconds"]) <= 600.0
    assert c12.passed
