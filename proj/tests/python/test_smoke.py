import csv
import io
import json
import math
from pathlib import Path

import numpy as np
import pytest

import smflow

CONFIGS = Path(__file__).resolve().parents[2] / "configs"


def test_catalogues():
    assert "weak-error" in smflow.available_commands()
    assert set(smflow.available_models()) >= {"shift", "scale", "network"}


def test_linear_oracle_matches_formulas():
    eta, T, x = 0.1, 1.0, 1.0
    o = smflow.linear_oracle(eta, T, x)
    n = round(T / eta)
    a = 1 + eta / 2
    assert o["sgd_mean"] == pytest.approx((1 - eta) ** n * x, rel=1e-14)
    assert o["flow_mean"] == pytest.approx(math.exp(-a * T) * x, rel=1e-14)
    assert o["sgd_var"] == pytest.approx(eta * (1 - (1 - eta) ** (2 * n)) / (2 - eta), rel=1e-12)
    assert o["flow_var"] == pytest.approx(eta * (1 - math.exp(-2 * a * T)) / (2 * a), rel=1e-12)


def test_closed_form_orders():
    etas = [0.1, 0.05, 0.025, 0.0125]
    second = smflow.weak_error_closed_form(etas, 1.0, [1.0])
    first = smflow.weak_error_closed_form(etas, 1.0, [1.0], first_order=True)
    assert 1.9 <= smflow.fit_order(etas, second["errors"])[0] <= 2.1
    assert 0.9 <= smflow.fit_order(etas, first["errors"])[0] <= 1.1


def test_wasserstein_matches_sorted_matching():
    rng = np.random.default_rng(0)
    a = rng.normal(size=(6, 1))
    b = rng.normal(size=(6, 1))
    expected = math.sqrt(np.mean((np.sort(a[:, 0]) - np.sort(b[:, 0])) ** 2))
    assert smflow.wasserstein2(a, b) == pytest.approx(expected, rel=1e-14)
    assert smflow.wasserstein2(a, a) == 0.0


def test_assignment_is_a_permutation():
    cost = np.array([[4.0, 1.0, 3.0], [2.0, 0.0, 5.0], [3.0, 2.0, 2.0]])
    assignment = smflow.min_cost_assignment(cost)
    assert sorted(assignment) == [0, 1, 2]
    assert sum(cost[i, j] for i, j in enumerate(assignment)) == 5.0


def test_sgd_chain_shares_one_atom_per_step():
    out = smflow.sgd_chain("shift", np.array([[0.5], [-2.0]]), 0.1, 25, seed=3)
    # The difference of two points contracts deterministically under the shift model.
    assert out[0, 0] - out[1, 0] == pytest.approx(2.5 * 0.9**25, rel=1e-12)
    again = smflow.sgd_chain("shift", np.array([[0.5], [-2.0]]), 0.1, 25, seed=3)
    assert np.array_equal(out, again)


def test_two_point_signs_on_scale_model():
    smf = smflow.two_point_covariation("smf", "scale", 1.0, -1.0, replicates=20000, seed=1)
    sme = smflow.two_point_covariation("sme", "scale", 1.0, -1.0, replicates=20000, seed=1)
    assert smf["estimate"] + 5 * smf["standard_error"] < 0
    assert sme["estimate"] - 5 * sme["standard_error"] > 0


def test_run_experiment_from_config():
    result = smflow.run_experiment(CONFIGS / "weak_error_shift.json")
    assert result.passed
    assert result.summary["csv_schema_version"] == 1
    rows = list(csv.DictReader(io.StringIO(result.curve_csv)))
    assert rows and set(rows[0]) == {"parameter", "value", "method", "estimate", "standard_error", "n"}


def test_worker_count_does_not_change_output():
    doc = json.loads((CONFIGS / "simulate_shift.json").read_text())
    one = smflow.run_experiment({**doc, "workers": 1})
    three = smflow.run_experiment({**doc, "workers": 3})
    assert one.trajectory_csv == three.trajectory_csv
    assert one.curve_csv == three.curve_csv


def test_errors_surface_as_value_errors():
    with pytest.raises(ValueError, match="config"):
        smflow.run_experiment({"command": "weak-error", "seed": 1})
    with pytest.raises(ValueError):
        smflow.wasserstein2(np.zeros((3, 1)), np.zeros((4, 1)))
