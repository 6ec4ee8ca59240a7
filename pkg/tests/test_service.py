"""FastAPI endpoints, request/response shapes, and error mapping."""

import warnings

import pytest

from hybred.service.app import create_app

with warnings.catch_warnings():
    warnings.simplefilter("ignore")
    from fastapi.testclient import TestClient


@pytest.fixture(scope="module")
def client():
    return TestClient(create_app())


def test_health(client):
    resp = client.get("/health")
    assert resp.status_code == 200
    assert resp.json() == {"status": "ok"}


def test_fixture_listing_and_retrieval(client):
    names = client.get("/fixtures").json()["names"]
    assert "paper_sec5" in names and "paper_sec5_kicked" in names
    spec = client.get("/fixtures/paper_sec5").json()
    assert spec["dimension"] == 2
    missing = client.get("/fixtures/nope")
    assert missing.status_code == 404


def test_simulate_endpoint(client, elastic_dict):
    resp = client.post("/simulate", json={"spec": elastic_dict, "T": 1.0})
    assert resp.status_code == 200
    body = resp.json()
    assert body["status"] == "ok"
    assert body["method"] == "leapfrog"
    cols = body["trajectory"]["columns"]
    assert cols[:6] == ["t", "q1", "q2", "p1", "p2", "segment_index"]
    assert cols[6:] == ["J_1", "J_2", "H"]
    first = body["trajectory"]["rows"][0]
    assert first[0] == 0.0
    assert first[1:5] == [1.0, 0.0, -1.0, 1.0]
    assert body["n_segments"] == len(body["impacts"]) + 1


def test_simulate_zeno_reported_with_partial_flow(client, elastic_dict):
    data = dict(elastic_dict)
    data["parameters"] = dict(data["parameters"], e=0.0, c=1.0)
    data["initial_condition"] = [2.0, 0.0, 0.0, 0.0]
    data["integrator"] = dict(data["integrator"], max_impacts=30)
    resp = client.post("/simulate", json={"spec": data})
    assert resp.status_code == 200
    body = resp.json()
    assert body["status"] == "zeno"
    assert body["impacts"]  # partial flow preserved
    assert "max_impacts" in body["message"] or "min_gap" in body["message"]


def test_verify_endpoint(client, elastic_dict):
    resp = client.post("/verify", json={"spec": elastic_dict})
    assert resp.status_code == 200
    report = resp.json()["report"]
    assert report["overall_pass"] is True
    names = {c["name"] for c in report["checks"]}
    assert {
        "symplectic_action_defect",
        "momentum_map_defect",
        "cocycle_constancy_spread",
        "affine_equivariance_defect",
        "hybrid_action_defect",
        "hamiltonian_invariance_defect",
        "isotropy_mu_independence_spread",
        "hybrid_momentum_classification",
    } <= names
    for check in report["checks"]:
        assert check["pass"], check


def test_verify_seed_determinism(client, elastic_dict):
    a = client.post("/verify", json={"spec": elastic_dict, "seed": 42}).json()
    b = client.post("/verify", json={"spec": elastic_dict, "seed": 42}).json()
    assert a == b


def test_reduce_endpoint(client, elastic_dict):
    resp = client.post("/reduce", json={"spec": elastic_dict, "mu": [0.0, 0.0]})
    assert resp.status_code == 200
    summary = resp.json()["summary"]
    assert summary["mu"] == [0.0, 0.0]
    assert summary["mu_plus"] == [0.0, 0.0]
    assert summary["free_coordinates"] == ["q2", "p2"]
    assert summary["omega_mu"] == [[0.0, 2.0], [-2.0, 0.0]]
    assert "p2" in summary["hamiltonian"]
    assert set(summary["bound_coordinates"]) == {"q1", "p1"}


def test_compare_endpoint(client, elastic_dict):
    resp = client.post("/compare", json={"spec": elastic_dict, "T": 2.0})
    assert resp.status_code == 200
    body = resp.json()
    assert body["mu0"] == [0.0, -1.0]
    assert body["report"]["pass"] is True
    assert body["full_projected"]["columns"] == ["t", "q2", "p2", "segment_index"]
    assert body["reduced"]["columns"] == ["t", "q2", "p2", "segment_index"]
    assert len(body["chart_sequence"]) == body["report"]["impact_count"] + 1


def test_compare_kicked_chart_transitions(client, kicked_dict):
    resp = client.post("/compare", json={"spec": kicked_dict, "T": 3.0})
    body = resp.json()
    assert body["report"]["pass"] is True
    seq = body["chart_sequence"]
    assert len(seq) >= 2
    assert seq[1][0] - seq[0][0] == pytest.approx(0.6, abs=1e-9)


def test_unsupported_isotropy_maps_to_400(client, elastic_dict):
    # rank-deficient momentum matrix gives a rank-deficient cocycle, so the
    # isotropy subgroup is nontrivial and reduction is out of scope
    data = dict(elastic_dict)
    data["momentum_matrix"] = [[1.0, 1.0, 0.0, 0.0], [2.0, 2.0, 0.0, 0.0]]
    resp = client.post("/reduce", json={"spec": data, "mu": [0.0, 0.0]})
    assert resp.status_code == 400
    err = resp.json()["error"]
    assert err["type"] == "UnsupportedIsotropyError"
    assert "isotropy" in err["message"]


def test_validation_error_maps_to_400(client, elastic_dict):
    data = dict(elastic_dict)
    data.pop("hamiltonian")
    resp = client.post("/verify", json={"spec": data})
    assert resp.status_code == 400
    assert resp.json()["error"]["type"] == "ValidationError"


def test_malformed_request_body_rejected(client):
    resp = client.post("/simulate", json={"x0": [1, 2]})  # missing spec
    assert resp.status_code == 422
