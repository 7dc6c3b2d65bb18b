import json

import numpy as np
import pytest

from blochframes.models import builtin, eval_hamiltonian
from blochframes.verifysuite import (EXACT_TOLERANCE, REGISTERED_GRIDS, TOLERANCE_CONSTANTS, _guarded,
                                     check_3deg_equals_minus_c2, check_3deg_periodic, check_deg_equals_c1,
                                     check_frame, check_graded_cyclicity, check_power_odd,
                                     eta_twisted_projector, report_json, restrict_model, run_suite)
from blochframes.errors import GapClosed


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_exact_algebra_checks(seed):
    for check in (check_graded_cyclicity, check_power_odd):
        res = check(seed)
        assert res.passed
        assert res.measured["residual"] < EXACT_TOLERANCE


def test_cell_independence_is_exact():
    res = check_3deg_periodic()
    assert res.passed


@pytest.mark.parametrize("u,expected", [(-1.0, -1), (1.0, 1)])
def test_degree_equals_c1_check(u, expected):
    res = check_deg_equals_c1(builtin("qwz", {"u": u}), 32)
    assert res.passed
    assert res.measured["12"] == {"degree": expected, "curvature": expected, "fhs": expected}


def test_twisted_projector_three_degree():
    n = 20
    res = check_3deg_equals_minus_c2(eta_twisted_projector(n), n, label="twisted")
    assert res.passed
    assert res.measured["three_degree"] == 1 and res.measured["c2"] == -1


def test_restricted_model_matches_slice():
    model = builtin("dirac4d")
    sub = restrict_model(model, {3: 0.7})
    k = np.array([0.2, -0.4, 1.1])
    assert np.allclose(eval_hamiltonian(sub, k), eval_hamiltonian(model, np.append(k, 0.7)))


def test_registered_tables_agree():
    assert set(REGISTERED_GRIDS) == set(TOLERANCE_CONSTANTS)
    assert all(b == 2 * a for a, b in REGISTERED_GRIDS.values())


def test_guarded_check_turns_errors_into_failures():
    def boom():
        raise GapClosed((0.0, 0.0), 0.0)
    res = _guarded("demo", "model", 8, boom)
    assert not res.passed
    assert res.measured["error"] == "GapClosed" and res.measured["exit_code"] == 2


def test_frame_check(projector_cache):
    assert check_frame(builtin("weak3d", {"u": 1.0}), 16, parseval=True).passed


def test_coarse_grid_override_reports_failures():
    results = run_suite("degrees", grid=4)
    failed = [r for r in results if not r.passed]
    assert failed
    assert {r.measured.get("exit_code") for r in failed} == {3}


def test_unknown_suite():
    with pytest.raises(ValueError):
        run_suite("everything")


def test_report_json_is_plain():
    data = json.loads(report_json([check_graded_cyclicity(0)]))
    assert data[0]["name"] == "graded_cyclic"
    assert data[0]["passed"] is True
