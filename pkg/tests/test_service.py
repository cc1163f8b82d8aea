"""HTTP service tests.

The service promises value identity with the CLI: every response body comes
from the same payload builders, so we compare endpoint output against the
builders called directly. TestClient keeps everything in-process.
"""

import json

import pytest
from fastapi.testclient import TestClient

import moeplan
from moeplan import (
    WorkloadSpec,
    load_builtin_hardware,
    load_builtin_model,
    load_default_calibration,
    make_cluster,
    reporting,
)
from moeplan.service import create_app


@pytest.fixture(scope="module")
def client():
    with TestClient(create_app()) as c:
        yield c


def _normalize(payload):
    # tuples become lists over the wire; compare in JSON space
    return json.loads(json.dumps(payload))


def _reference_cluster(num_gpus=64):
    cal = load_default_calibration()
    return make_cluster(load_builtin_hardware("reference"), num_gpus, cal), cal


# ---------------------------------------------------------------------------
# basics


def test_health(client):
    doc = client.get("/api/health").json()
    assert doc["status"] == "ok"
    assert doc["version"] == moeplan.__version__
    assert doc["schema_version"] == 1
    assert doc["calibration"] == "reference-v1"


def test_models_lists_builtins(client):
    doc = client.get("/api/models").json()
    by_name = {row["name"]: row for row in doc["models"]}
    assert set(by_name) == {"deepseek-v3", "grok-1", "llama-dense-70b",
                            "qwen3-235b-a22b", "switch-c-2048"}
    ds = by_name["deepseek-v3"]
    assert ds["is_moe"] and ds["num_experts"] == 256 and ds["top_k"] == 8
    assert ds["kv_layout"] == "mla"
    assert not by_name["llama-dense-70b"]["is_moe"]


def test_hardware_reports_reference_device(client):
    doc = client.get("/api/hardware").json()
    assert doc["hardware"] == _normalize(
        load_builtin_hardware("reference").to_dict())
    assert "hbm_capacity_bytes" in doc["override_fields"]


def test_cors_allows_browser_clients(client):
    resp = client.get("/api/health",
                      headers={"Origin": "http://localhost:5173"})
    assert resp.headers["access-control-allow-origin"] == "*"


# ---------------------------------------------------------------------------
# evaluate


def test_evaluate_explicit_plan(client):
    body = {
        "model": "deepseek-v3",
        "context_length": 131072,
        "num_gpus": 64,
        "plan": {"tp": 1, "ep": 8, "pp": 1, "kv_mode": "kvp", "kv_degree": 64},
    }
    doc = client.post("/api/evaluate", json=body).json()
    assert doc["report"] == "evaluate"
    assert doc["autotuned"] is False
    assert doc["feasible"] is True
    assert doc["plan_label"] == "tp1-ep8-pp1-kvp64"

    cluster, cal = _reference_cluster()
    direct = reporting.feasible_payload(
        load_builtin_model("deepseek-v3"),
        moeplan.ParallelismPlan(tp=1, ep=8, pp=1, kv_mode="kvp", kv_degree=64),
        cluster, WorkloadSpec(131072), cal)
    direct = _normalize(direct)
    for key in ("memory", "latency", "throughput", "reuse"):
        assert doc[key] == direct[key]


def test_evaluate_autotunes_without_plan(client):
    body = {"model": "deepseek-v3", "context_length": 131072, "num_gpus": 64}
    doc = client.post("/api/evaluate", json=body).json()
    assert doc["autotuned"] is True
    assert doc["feasible"] is True
    assert doc["plan_label"] == "tp1-ep8-pp1-cp64"
    assert doc["throughput"]["tokens_per_s_cluster"] > 0


def test_evaluate_accepts_inline_model_spec(client):
    spec = load_builtin_model("deepseek-v3").to_dict()
    base = {"context_length": 131072, "num_gpus": 64}
    by_name = client.post("/api/evaluate",
                          json={"model": "deepseek-v3", **base}).json()
    inline = client.post("/api/evaluate",
                         json={"model_spec": spec, **base}).json()
    assert inline["plan_label"] == by_name["plan_label"]
    assert inline["throughput"] == by_name["throughput"]


def test_evaluate_switch_reports_infeasible(client):
    body = {"model": "switch-c-2048", "context_length": 131072, "num_gpus": 64}
    resp = client.post("/api/evaluate", json=body)
    assert resp.status_code == 200  # infeasibility is an answer, not an error
    doc = resp.json()
    assert doc["feasible"] is False
    assert doc["reasons"] and all(isinstance(v, str)
                                  for v in doc["reasons"].values())


def test_hardware_overrides_change_the_answer(client):
    base = {"model": "deepseek-v3", "context_length": 131072, "num_gpus": 64}
    plain = client.post("/api/evaluate", json=base).json()
    hbm = load_builtin_hardware("reference").hbm_capacity_bytes
    boosted = client.post("/api/evaluate", json={
        **base, "overrides": {"hbm_capacity_bytes": hbm * 1.25},
    }).json()
    assert boosted["memory"]["n_eff_max"] > plain["memory"]["n_eff_max"]


# ---------------------------------------------------------------------------
# input validation: 400 with a field path, never a 500


@pytest.mark.parametrize("body,field", [
    ({"model": "deepseek-v3", "num_gpus": 64}, "context_length"),
    ({"context_length": 1024}, "model"),
    ({"model": "deepseek-v3", "model_spec": {}, "context_length": 1024},
     "model"),
    ({"model": "no-such-model", "context_length": 1024}, "model"),
    ({"model": "deepseek-v3", "context_length": 1024, "num_gpus": 0},
     "num_gpus"),
    ({"model": "deepseek-v3", "context_length": 1024,
      "plan": {"tp": 0}}, "plan.tp"),
    ({"model": "deepseek-v3", "context_length": 1024,
      "overrides": {"frobnicate": 2.0}}, "overrides.frobnicate"),
    ({"model": "deepseek-v3", "context_length": 1024,
      "overrides": {"hbm_capacity_bytes": -1}},
     "overrides.hbm_capacity_bytes"),
    ({"model": "deepseek-v3", "context_length": 1024,
      "calibration": "nope"}, "calibration"),
])
def test_evaluate_rejects_bad_input(client, body, field):
    resp = client.post("/api/evaluate", json=body)
    assert resp.status_code == 400
    detail = resp.json()["detail"]
    assert detail["field"] == field
    assert field in detail["error"]


def test_sweep_rejects_bad_contexts(client):
    resp = client.post("/api/sweep", json={"model": "deepseek-v3",
                                           "contexts": "1k"})
    assert resp.status_code == 400
    assert resp.json()["detail"]["field"] == "contexts"

    resp = client.post("/api/sweep", json={"model": "deepseek-v3",
                                           "contexts": [1024, "x"]})
    assert resp.status_code == 400
    assert resp.json()["detail"]["field"] == "contexts[1]"


def test_pair_rejects_bad_q_values(client):
    resp = client.post("/api/pair", json={"model": "deepseek-v3",
                                          "q_values": []})
    assert resp.status_code == 400
    assert resp.json()["detail"]["field"] == "q_values"


# ---------------------------------------------------------------------------
# value identity with the CLI payload builders


def test_pair_matches_builder(client):
    doc = client.post("/api/pair", json={
        "model": "deepseek-v3", "q_values": [5.0],
        "num_gpus": 64, "context_length": 131072,
    }).json()
    cluster, cal = _reference_cluster()
    direct = reporting.pair_payload(load_builtin_model("deepseek-v3"), [5.0],
                                    cluster, WorkloadSpec(131072), cal)
    assert doc == _normalize(direct)


def test_sweep_matches_builder(client):
    contexts = [1024, 131072]
    doc = client.post("/api/sweep", json={
        "model": "deepseek-v3", "q": 5.0,
        "num_gpus": 64, "contexts": contexts,
    }).json()
    cluster, cal = _reference_cluster()
    direct = reporting.sweep_payload(load_builtin_model("deepseek-v3"), 5.0,
                                     cluster, contexts, cal)
    assert doc == _normalize(direct)


def test_attribution_matches_builder(client):
    contexts = [1024, 131072]
    doc = client.post("/api/attribution", json={
        "model": "deepseek-v3", "q": 5.0,
        "num_gpus": 64, "contexts": contexts,
    }).json()
    cluster, cal = _reference_cluster()
    direct = reporting.attribution_payload(load_builtin_model("deepseek-v3"),
                                           5.0, cluster, contexts, cal)
    assert doc == _normalize(direct)


def test_compare_matches_builder(client):
    doc = client.post("/api/compare", json={
        "model": "grok-1", "q_values": [5.0, 3.0, 2.0],
        "num_gpus": 64, "context_length": 131072,
    }).json()
    cluster, cal = _reference_cluster()
    direct = reporting.compare_payload(load_builtin_model("grok-1"),
                                       [5.0, 3.0, 2.0], cluster,
                                       WorkloadSpec(131072), cal)
    assert doc == _normalize(direct)


def test_autotune_matches_builder(client):
    doc = client.post("/api/autotune", json={
        "model": "deepseek-v3", "num_gpus": 64, "context_length": 131072,
    }).json()
    cluster, cal = _reference_cluster()
    direct = reporting.autotune_payload(load_builtin_model("deepseek-v3"),
                                        cluster, WorkloadSpec(131072), cal)
    assert doc == _normalize(direct)
    assert doc["best"]["plan_label"] == "tp1-ep8-pp1-cp64"


# ---------------------------------------------------------------------------
# streaming


def test_sweep_stream_is_ndjson_of_the_same_rows(client):
    body = {"model": "deepseek-v3", "q": 5.0, "num_gpus": 64,
            "contexts": [1024, 16384, 131072]}
    whole = client.post("/api/sweep", json=body).json()

    resp = client.post("/api/sweep?stream=true", json=body)
    assert resp.headers["content-type"].startswith("application/x-ndjson")
    lines = [json.loads(line) for line in resp.text.splitlines() if line]

    assert [ln["row"] for ln in lines[:-1]] == whole["rows"]
    done = lines[-1]["done"]
    assert "rows" not in done
    assert done["inputs"] == whole["inputs"]


# ---------------------------------------------------------------------------
# statelessness


def test_interleaved_requests_are_independent(client):
    ds = {"model": "deepseek-v3", "context_length": 131072, "num_gpus": 64}
    qw = {"model": "qwen3-235b-a22b", "context_length": 131072, "num_gpus": 64}
    first = client.post("/api/evaluate", json=ds).content
    client.post("/api/evaluate", json=qw)
    client.post("/api/sweep", json={"model": "grok-1", "contexts": [1024]})
    again = client.post("/api/evaluate", json=ds).content
    assert first == again
