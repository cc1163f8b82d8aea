#!/usr/bin/env python3
"""Regenerate the frontend's recorded service responses.

The UI tests replay these fixtures through a mocked fetch, so every number a
test compares against the DOM is a real service payload, not a hand-typed
expectation.  Rerun after any payload-shape change:

    python3 scripts/make_ui_fixtures.py
"""

from __future__ import annotations

import json
from pathlib import Path

from fastapi.testclient import TestClient

from moeplan.service import create_app

OUT = Path(__file__).resolve().parent.parent / "frontend" / "src" / "test" / "fixtures"

NUM_GPUS = 64
CONTEXT = 131072
SWEEP_CONTEXTS = [1024, 16384, 32768, 131072, 1048576, 4194304, 16777216]
ATTR_CONTEXTS = [1024, CONTEXT]

# (model, q) points the tests drive the knobs through
SCENARIOS = [
    ("deepseek-v3", 5),
    ("switch-c-2048", 5),
    ("grok-1", 5),
    ("grok-1", 2),
]
EVALUATE_MODELS = ["deepseek-v3", "switch-c-2048", "grok-1"]
MANUAL_PLAN = {"tp": 1, "ep": 8, "pp": 1, "kv_mode": "kvp", "kv_degree": 64, "dp": 1}


def main() -> None:
    client = TestClient(create_app())

    def get(path: str) -> dict:
        resp = client.get(path)
        resp.raise_for_status()
        return resp.json()

    def post(path: str, body: dict) -> dict:
        resp = client.post(path, json=body)
        if resp.status_code not in (200, 400):
            raise RuntimeError(f"{path}: unexpected status {resp.status_code}")
        return {"status": resp.status_code, "body": resp.json()}

    doc: dict = {
        "meta": {
            "health": get("/api/health"),
            "models": get("/api/models"),
            "hardware": get("/api/hardware"),
        },
        "scenarios": {},
        "evaluate": {},
        "evaluate_manual": {},
    }

    for model, q in SCENARIOS:
        doc["scenarios"][f"{model}|{q}"] = {
            "pair": post("/api/pair", {
                "model": model, "q_values": [q],
                "num_gpus": NUM_GPUS, "context_length": CONTEXT,
            }),
            "sweep": post("/api/sweep", {
                "model": model, "q": q,
                "num_gpus": NUM_GPUS, "contexts": SWEEP_CONTEXTS,
            }),
            "attribution": post("/api/attribution", {
                "model": model, "q": q,
                "num_gpus": NUM_GPUS, "contexts": ATTR_CONTEXTS,
            }),
        }

    for model in EVALUATE_MODELS:
        doc["evaluate"][model] = post("/api/evaluate", {
            "model": model, "context_length": CONTEXT, "num_gpus": NUM_GPUS,
        })

    doc["evaluate_manual"]["deepseek-v3"] = post("/api/evaluate", {
        "model": "deepseek-v3", "context_length": CONTEXT,
        "num_gpus": NUM_GPUS, "plan": MANUAL_PLAN,
    })

    OUT.mkdir(parents=True, exist_ok=True)
    path = OUT / "service.json"
    path.write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n")
    sizes = path.stat().st_size
    print(f"wrote {path} ({sizes} bytes)")


if __name__ == "__main__":
    main()
