import json
import math
import os
from pathlib import Path

import pytest

import dsse

FIXTURE = os.environ.get(
    "DSSE_NETWORK",
    str(Path(__file__).resolve().parents[2] / "fixtures" / "ieee123_balanced.json"),
)

CHAIN = {
    "base_mva": 5,
    "buses": [
        {"id": "0", "kind": "slack"},
        {"id": "1", "kind": "pq"},
        {"id": "2", "kind": "pq", "load_p_kw": 500, "load_q_kvar": 250},
    ],
    "lines": [
        {"id": "a", "from": "0", "to": "1", "r_ohm": 0.0346112, "x_ohm": 0.0692224},
        {"id": "b", "from": "1", "to": "2", "r_ohm": 0.0346112, "x_ohm": 0.0346112},
    ],
}


@pytest.fixture(scope="module")
def net():
    return dsse.Network.load(FIXTURE)


def test_fixture_shape(net):
    assert net.bus_count == 61
    assert net.line_count == 60
    assert net.state_dim == 301
    assert net.bus_ids[0] == net.slack
    assert "61 buses" in repr(net)


def test_validate_reports_cycles():
    doc = json.loads(json.dumps(CHAIN))
    doc["lines"].append({"id": "c", "from": "2", "to": "0", "r_ohm": 0.1, "x_ohm": 0.1})
    codes = {code for code, _, _ in dsse.validate(json.dumps(doc))}
    assert "cycle" in codes
    assert dsse.validate(json.dumps(CHAIN)) == []


def test_linear_chain_by_hand():
    chain = dsse.Network.from_json(json.dumps(CHAIN))
    dispatch = json.dumps({"0": [0, 0], "1": [0, 0], "2": [-0.1, -0.05]})
    sol = dsse.solve(chain, dispatch=dispatch, method="linear")
    doc = json.loads(sol.to_json(chain))
    assert doc["v_sq"]["2"] == pytest.approx(0.9930, abs=1e-9)
    assert doc["v_sq"]["1"] == pytest.approx(0.9960, abs=1e-9)


def test_exact_solve_and_round_trip(net):
    sol = dsse.solve(net, seed=3)
    assert sol.converged
    assert sol.method == "exact"
    again = dsse.Solution.from_json(net, sol.to_json(net))
    assert again.v_sq == sol.v_sq
    assert not dsse.solve(net, seed=3, max_iter=0).converged


def test_zero_noise_full_set_is_exact(net):
    truth = dsse.solve(net, seed=2, method="linear")
    out = dsse.estimate_document(net, truth, e_v=0.0, e_i=0.0, fractions=(1.0, 1.0))
    assert out["rank"] == 301
    for key in ("mean_err_v", "max_err_v", "mean_err_f", "max_err_f"):
        assert out[key] < 1e-8
    assert set(out["estimate"]["v_sq"]) == set(net.bus_ids)


def test_estimate_is_deterministic(net):
    truth = dsse.solve(net, seed=5)
    a = dsse.estimate(net, truth, e_v=0.006, e_i=0.003, preference="edge", seed=11)
    b = dsse.estimate(net, truth, e_v=0.006, e_i=0.003, preference="edge", seed=11)
    assert a == b
    assert a["max_err_v"] >= a["mean_err_v"] > 0


def test_unobservable_selection_raises(net):
    truth = dsse.solve(net, seed=1)
    with pytest.raises(dsse.ObservabilityError):
        dsse.estimate(net, truth, fractions=(0.0, 0.0))
    with pytest.raises(ValueError):
        dsse.estimate(net, truth, preference="both")


def test_small_scenario(net):
    s1 = dsse.run_scenario(net, e_v=0.003, e_i=0.003, dispatch_count=8, jobs=1)
    s2 = dsse.run_scenario(net, e_v=0.003, e_i=0.003, dispatch_count=8, jobs=2)
    assert s1 == s2
    assert s1["runs"] == 8
    assert s1["avg_of_max_f"] >= s1["avg_of_mean_f"] > 0
    assert math.isfinite(s1["hw_mean_v"])


def test_missing_file_raises():
    with pytest.raises(dsse.DsseError):
        dsse.Network.load("/nonexistent/net.json")
