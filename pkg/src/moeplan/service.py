"""HTTP JSON facade over the evaluator, reports, and autotuner.

Every response body is built by the same payload functions the CLI uses, so a
given scenario produces identical values over HTTP and on the command line.
"""

from __future__ import annotations

import dataclasses
import json
from typing import Any, Mapping, Optional

from fastapi import FastAPI
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse, StreamingResponse

from . import __version__, reporting
from .autotuner import autotune
from .calibration import CalibrationSpec, load_default_calibration, make_cluster
from .specs import (
    HardwareSpec,
    ModelSpec,
    ParallelismPlan,
    SCHEMA_VERSION,
    SpecError,
    WorkloadSpec,
    builtin_model_names,
    load_builtin_hardware,
    load_builtin_model,
)

_NUMERIC_HW_FIELDS = (
    "hbm_capacity_bytes",
    "hbm_bandwidth_bytes_per_s",
    "intra_node_bw_bytes_per_s",
    "inter_node_bw_bytes_per_s",
    "island_capacity",
    "collective_startup_latency_s",
)


def _field_of(message: str) -> Optional[str]:
    head, sep, _ = message.partition(":")
    if sep and " " not in head:
        return head
    return None


def _get_number(body: Mapping[str, Any], key: str, default, minimum=None):
    value = body.get(key, default)
    if value is None:
        value = default
    if not isinstance(value, (int, float)) or isinstance(value, bool):
        raise SpecError(f"{key}: expected a number, got {value!r}")
    if minimum is not None and value < minimum:
        raise SpecError(f"{key}: must be >= {minimum}, got {value}")
    return value


def _resolve_model(body: Mapping[str, Any]) -> ModelSpec:
    name = body.get("model")
    inline = body.get("model_spec")
    if (name is None) == (inline is None):
        raise SpecError("model: provide exactly one of 'model' or 'model_spec'")
    if inline is not None:
        if not isinstance(inline, Mapping):
            raise SpecError("model_spec: expected an object")
        return ModelSpec.from_dict(inline, path="model_spec")
    if name not in builtin_model_names():
        raise SpecError(
            f"model: unknown model {name!r}; "
            f"builtins: {', '.join(builtin_model_names())}")
    return load_builtin_model(name)


def _resolve_hardware(body: Mapping[str, Any]) -> HardwareSpec:
    inline = body.get("hardware")
    if inline is not None:
        if not isinstance(inline, Mapping):
            raise SpecError("hardware: expected an object")
        hw = HardwareSpec.from_dict(inline, path="hardware")
    else:
        hw = load_builtin_hardware("reference")
    overrides = body.get("overrides")
    if overrides is None:
        return hw
    if not isinstance(overrides, Mapping):
        raise SpecError("overrides: expected an object")
    fields = {}
    for key, value in overrides.items():
        if key not in _NUMERIC_HW_FIELDS:
            raise SpecError(
                f"overrides.{key}: unknown hardware field; "
                f"allowed: {', '.join(_NUMERIC_HW_FIELDS)}")
        if not isinstance(value, (int, float)) or isinstance(value, bool):
            raise SpecError(f"overrides.{key}: expected a number, got {value!r}")
        if value <= 0:
            raise SpecError(f"overrides.{key}: must be > 0, got {value}")
        fields[key] = int(value) if key == "island_capacity" else float(value)
    return dataclasses.replace(hw, **fields)


def _contexts_from(body: Mapping[str, Any], default) -> list:
    contexts = body.get("contexts", list(default))
    if not isinstance(contexts, (list, tuple)) or not contexts:
        raise SpecError("contexts: expected a non-empty list")
    out = []
    for i, value in enumerate(contexts):
        if not isinstance(value, int) or isinstance(value, bool) or value < 1:
            raise SpecError(f"contexts[{i}]: expected an integer >= 1")
        out.append(value)
    return out


def _q_values_from(body: Mapping[str, Any]) -> list:
    if "q_values" in body and body["q_values"] is not None:
        values = body["q_values"]
        if not isinstance(values, (list, tuple)) or not values:
            raise SpecError("q_values: expected a non-empty list")
        out = []
        for i, value in enumerate(values):
            if not isinstance(value, (int, float)) or isinstance(value, bool):
                raise SpecError(f"q_values[{i}]: expected a number")
            out.append(float(value))
        return out
    return [float(_get_number(body, "q", 5.0, minimum=1e-9))]


def create_app(calibration: Optional[CalibrationSpec] = None) -> FastAPI:
    if calibration is None:
        calibration = load_default_calibration()
    calibrations = {"default": calibration, calibration.name: calibration}

    app = FastAPI(title="moeplan planner", version=__version__)
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],  # local planning tool, no auth in v1
        allow_methods=["*"],
        allow_headers=["*"],
    )

    def _cal(body: Mapping[str, Any]) -> CalibrationSpec:
        name = body.get("calibration") or "default"
        if name not in calibrations:
            raise SpecError(
                f"calibration: unknown id {name!r}; "
                f"available: {', '.join(sorted(calibrations))}")
        return calibrations[name]

    def _cluster(body: Mapping[str, Any], cal: CalibrationSpec):
        num_gpus = int(_get_number(body, "num_gpus", 64, minimum=1))
        return make_cluster(_resolve_hardware(body), num_gpus, cal)

    @app.exception_handler(SpecError)
    def _spec_error(_request, exc: SpecError):
        message = str(exc)
        return JSONResponse(
            status_code=400,
            content={"detail": {"error": message, "field": _field_of(message)}},
        )

    @app.get("/api/health")
    def health() -> dict:
        return {
            "status": "ok",
            "version": __version__,
            "schema_version": SCHEMA_VERSION,
            "calibration": calibration.name,
        }

    @app.get("/api/hardware")
    def hardware() -> dict:
        # base numbers the client scales when building override requests
        return {
            "schema_version": SCHEMA_VERSION,
            "hardware": load_builtin_hardware("reference").to_dict(),
            "override_fields": list(_NUMERIC_HW_FIELDS),
        }

    @app.get("/api/models")
    def models() -> dict:
        rows = []
        for name in builtin_model_names():
            model = load_builtin_model(name)
            rows.append({
                "name": model.name,
                "is_moe": model.is_moe,
                "num_experts": model.num_experts,
                "top_k": model.top_k,
                "sparsity": model.sparsity,
                "kv_layout": model.kv_layout.kind,
                "num_layers": model.num_layers,
                "d_model": model.d_model,
                "total_params": model.total_params,
                "active_params": model.active_params,
            })
        return {"schema_version": SCHEMA_VERSION, "models": rows}

    @app.post("/api/evaluate")
    def evaluate(body: dict) -> dict:
        cal = _cal(body)
        model = _resolve_model(body)
        cluster = _cluster(body, cal)
        if body.get("context_length") is None:
            raise SpecError("context_length: missing required field")
        context = int(_get_number(body, "context_length", None, minimum=1))
        workload = WorkloadSpec(context)

        out = {
            "schema_version": SCHEMA_VERSION,
            "report": "evaluate",
            "model": model.name,
            "context_length": context,
            "num_gpus": cluster.num_gpus,
            "calibration": cal.name,
        }
        plan_doc = body.get("plan")
        if plan_doc is not None:
            if not isinstance(plan_doc, Mapping):
                raise SpecError("plan: expected an object")
            plan = ParallelismPlan.from_dict(plan_doc, path="plan")
            payload = reporting.feasible_payload(model, plan, cluster,
                                                 workload, cal)
            out["autotuned"] = False
            out.update({k: v for k, v in payload.items()
                        if k not in ("report", "inputs")})
            return out

        result = autotune(model, cluster, workload, None, cal)
        out["autotuned"] = True
        out["feasible"] = result.feasible
        if result.best is not None:
            out.update({k: v for k, v in result.best.to_dict().items()
                        if k != "feasible"})
        else:
            out["reasons"] = {r.plan.label(): r.memory.reason
                              for r in result.ranking}
        return out

    @app.post("/api/pair")
    def pair(body: dict) -> dict:
        cal = _cal(body)
        model = _resolve_model(body)
        cluster = _cluster(body, cal)
        context = int(_get_number(body, "context_length", 131072, minimum=1))
        return reporting.pair_payload(model, _q_values_from(body), cluster,
                                      WorkloadSpec(context), cal)

    @app.post("/api/sweep")
    def sweep(body: dict, stream: bool = False):
        cal = _cal(body)
        model = _resolve_model(body)
        cluster = _cluster(body, cal)
        contexts = _contexts_from(body, reporting.SWEEP_CONTEXTS)
        q = float(_get_number(body, "q", 5.0, minimum=1e-9))
        payload = reporting.sweep_payload(model, q, cluster, contexts, cal)
        if not stream:
            return payload

        def rows_first():
            for row in payload["rows"]:
                yield json.dumps({"row": row}) + "\n"
            meta = {k: v for k, v in payload.items() if k != "rows"}
            yield json.dumps({"done": meta}) + "\n"

        return StreamingResponse(rows_first(),
                                 media_type="application/x-ndjson")

    @app.post("/api/attribution")
    def attribution(body: dict) -> dict:
        cal = _cal(body)
        model = _resolve_model(body)
        cluster = _cluster(body, cal)
        contexts = _contexts_from(body, reporting.ATTRIBUTION_CONTEXTS)
        q = float(_get_number(body, "q", 5.0, minimum=1e-9))
        return reporting.attribution_payload(model, q, cluster, contexts, cal)

    @app.post("/api/compare")
    def compare(body: dict) -> dict:
        cal = _cal(body)
        model = _resolve_model(body)
        cluster = _cluster(body, cal)
        context = int(_get_number(body, "context_length", 131072, minimum=1))
        return reporting.compare_payload(model, _q_values_from(body), cluster,
                                         WorkloadSpec(context), cal)

    @app.post("/api/autotune")
    def autotune_endpoint(body: dict) -> dict:
        cal = _cal(body)
        model = _resolve_model(body)
        cluster = _cluster(body, cal)
        context = int(_get_number(body, "context_length", 131072, minimum=1))
        return reporting.autotune_payload(model, cluster,
                                          WorkloadSpec(context), cal)

    return app
