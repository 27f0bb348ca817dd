import json
import math
import os
import subprocess

import pytest

import blowuplab


def test_constants():
    t = blowuplab.constants(4)
    assert abs(t["kappa1"] - 6.0) < 1e-10
    assert abs(blowuplab.constants(6)["kappa1"] - 0.625) < 1e-10
    assert all(e["rel_error"] <= 1e-10 for e in blowuplab.closed_form_check(5))


def test_predicted_lambda():
    assert blowuplab.predicted_lambda(6, 1.0, 1e-4) == pytest.approx(math.sqrt(6250.0), rel=1e-12)
    assert blowuplab.predicted_lambda(5, -1.0, 1e-4) is None


def test_kirchhoff():
    n = 5
    hess = [[-2.0 if i == j else 0.0 for j in range(n)] for i in range(n)]
    found = blowuplab.kirchhoff_critical(hess, 2)
    assert len(found) == 1
    assert found[0]["min_pair_distance"] == pytest.approx(3.0 ** 0.2, rel=1e-8)


def test_solve_balancing():
    n = 6
    out = blowuplab.solve_balancing(n, 1e-4, {"type": "constant", "v0": 1.0}, [[0.0] * n], [5.0])
    assert out["status"] == "converged"
    assert out["lambdas"][0] == pytest.approx(math.sqrt(6250.0), rel=1e-10)


def test_radial_and_projection():
    fit = blowuplab.rate_experiment(5, [1e-2, 1e-3])
    assert fit["solved"] == 2
    p = blowuplab.project_bubble_radial(5, 100.0)
    assert p["residual"] <= 1e-8
    assert p["ordering_ok"]


@pytest.mark.skipif("BLOWUPLAB_BIN" not in os.environ, reason="CLI path not provided")
def test_cli_constants():
    r = subprocess.run([os.environ["BLOWUPLAB_BIN"], "constants", "--dim", "4"], capture_output=True, text=True)
    assert r.returncode == 0
    assert json.loads(r.stdout)["table"]["kappa1"] == pytest.approx(6.0)
    bad = subprocess.run([os.environ["BLOWUPLAB_BIN"], "constants", "--dim", "3"], capture_output=True, text=True)
    assert bad.returncode == 1
