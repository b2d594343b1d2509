import math
import os
from pathlib import Path

import pytest

import intercity as ic

DATA = Path(os.environ.get("INTERCITY_DATA_DIR", Path(__file__).resolve().parents[2] / "data"))
SPEC = DATA / "specs" / "business.json"
PARAMS = DATA / "params" / "business.json"


@pytest.fixture(scope="module")
def business():
    spec = ic.load_model_spec(SPEC)
    params = ic.load_params(PARAMS)
    spec.validate(params)
    return spec, params


@pytest.fixture(scope="module")
def synthetic(business):
    spec, params = business
    templates = ic.synthetic_templates(spec, 120, 5)
    return ic.simulate_choices(spec, params, templates, 6)


def test_version():
    assert ic.__version__


def test_parameters_behave_like_a_mapping(business):
    _, params = business
    assert params["cost"] == -2.189
    assert "mu" in params
    copy = ic.load_params(PARAMS)
    assert copy == params
    copy["cost"] = -1.0
    assert copy != params


def test_spec_json_round_trip(business):
    spec, _ = business
    again = ic.ModelSpec.from_json(spec.to_json())
    assert again.hash() == spec.hash()
    assert "mu" in spec.coefficient_names()


def test_likelihood_parts_add_up(business, synthetic):
    spec, params = business
    total, rp, sp = ic.log_likelihood(spec, params, synthetic)
    assert math.isclose(total, rp + sp)
    assert total < 0.0
    assert synthetic.n_observations == 240


def test_gradient_matches_finite_differences(business, synthetic):
    spec, params = business
    analytic = ic.gradient(spec, params, synthetic)
    numeric = ic.gradient(spec, params, synthetic, finite_difference=True)
    assert analytic.keys() == numeric.keys()
    for name in analytic:
        assert abs(analytic[name] - numeric[name]) < 1e-4 * max(1.0, abs(numeric[name]))


def test_estimate_returns_a_result(business, synthetic):
    spec, params = business
    result = ic.estimate(spec, synthetic, params, max_iterations=3)
    assert result.n_observations == 240
    assert result.ll1 >= ic.log_likelihood(spec, params, synthetic)[0]
    assert "Converged" in ic.format_report(spec, result)


def test_dataset_round_trip(tmp_path, business, synthetic):
    spec, _ = business
    path = tmp_path / "synthetic.csv"
    ic.save_choice_dataset(synthetic, path, "business")
    assert (tmp_path / "synthetic.csv.manifest.json").exists()
    assert ic.load_choice_dataset(path, spec) == synthetic


def test_errors_map_to_python_exceptions(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ic.ConfigError):
        ic.load_model_spec(bad)
    empty = tmp_path / "empty.csv"
    empty.write_text("")
    with pytest.raises(ic.ValidationError):
        ic.load_choice_dataset(empty)


def test_fit_statistics_and_vot():
    assert math.isclose(ic.rho_squared(-100.0, -70.0), 0.3)
    assert math.isclose(ic.value_of_time(-0.01, -2.0), 300000.0)
    rows = ic.induced_travel_table([("S1", 1.1), ("S4", 1.0)], "S4")
    assert rows[1][2] == 100.0
    assert math.isclose(rows[0][2], 110.0)


def test_poisson_intercept_only():
    counts = [0, 1, 3, 2, 4, 2]
    model = ic.fit_poisson([(c, {}) for c in counts], [])
    assert math.isclose(model.coefficients[0], math.log(sum(counts) / len(counts)), rel_tol=1e-12)
    assert math.isclose(ic.predict_rate(model, {}), 2.0)


def test_scenarios_on_the_corridor(business):
    spec, params = business
    fixture = ic.corridor_fixture(ic.Purpose.Business, 60, 3)
    trips = ic.load_poisson_model(DATA / "tripgen" / "business.json")
    results = ic.run_scenarios(spec, params, fixture, DATA / "scenarios" / "policy.json", trips)
    by_id = {r.scenario_id: r for r in results}
    assert by_id["S4"].induced_index == 100.0
    assert by_id["S1"].mean_accessibility > by_id["S5"].mean_accessibility
    assert math.isclose(sum(by_id["S1"].destination_shares.values()), 1.0)


def test_cli_entry_point():
    code, out, _ = ic.run_cli(["validate", "--spec", str(SPEC), "--params", str(PARAMS)])
    assert code == 0
    assert "ok:" in out
    code, _, err = ic.run_cli(["estimate", "--spec", str(SPEC), "--data", "/does/not/exist.csv"])
    assert code == 1
