"""Report generators and the `moeplan` command-line interface.

Every report is built as a plain dict payload so the CLI's JSON output and
the HTTP service return identical values; table and CSV renderings are
formatted views over the same payload.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

from . import __version__, qs_core
from .autotuner import (
    AutotuneResult,
    PlanReport,
    SearchSpace,
    autotune,
    best_capacity_plan,
    evaluate_plan,
)
from .calibration import (
    CalibrationSpec,
    load_calibration,
    load_default_calibration,
    make_cluster,
)
from .reuse_model import ReuseReport, reuse_gap
from .specs import (
    ClusterSpec,
    ModelSpec,
    ParallelismPlan,
    SCHEMA_VERSION,
    SpecError,
    WorkloadSpec,
    builtin_model_names,
    load_builtin_hardware,
    load_builtin_model,
    load_hardware_spec,
    load_model_spec,
)

# Decode context grid used by the default sweep (1k .. 16384k tokens).
SWEEP_CONTEXTS = (1024, 16384, 32768, 131072, 1048576, 4194304, 16777216)
ATTRIBUTION_CONTEXTS = (1024, 131072)
GAP_COMPONENTS = ("hbm", "compute", "comm")


def context_label(tokens: int) -> str:
    if tokens % 1024 == 0:
        return f"{tokens // 1024}k"
    return str(tokens)


# ---------------------------------------------------------------------------
# report generators


@dataclass(frozen=True)
class PairRow:
    """One quality-matched MoE-vs-dense capacity comparison."""

    model: str
    dense_model: str
    q: float
    num_experts: int
    top_k: int
    s: float
    qs: float
    feasible_moe: bool
    feasible_dense: bool
    reuse: ReuseReport
    plan_moe: str
    plan_dense: str
    reason_moe: Optional[str]
    reason_dense: Optional[str]

    def to_dict(self) -> dict:
        out = {
            "model": self.model,
            "dense_model": self.dense_model,
            "q": self.q,
            "num_experts": self.num_experts,
            "top_k": self.top_k,
            "s": self.s,
            "qs": self.qs,
            "feasible_moe": self.feasible_moe,
            "feasible_dense": self.feasible_dense,
            "plan_moe": self.plan_moe,
            "plan_dense": self.plan_dense,
            "reason_moe": self.reason_moe,
            "reason_dense": self.reason_dense,
        }
        out.update(self.reuse.to_dict())
        if not self.feasible_moe:
            out["batch_moe"] = None
            out["reuse_moe"] = None
        if not self.feasible_dense:
            out["batch_dense"] = None
            out["reuse_dense"] = None
        return out


def paired_comparison(moe: ModelSpec, q: float, cluster: ClusterSpec,
                      workload: WorkloadSpec,
                      calibration: CalibrationSpec = CalibrationSpec(),
                      space: Optional[SearchSpace] = None) -> PairRow:
    """Capacity-oriented comparison at one (model, q, cluster, context) point.

    Both variants get the plan that maximizes a single replica's batch, so
    the reported batches measure KV headroom rather than plan cleverness.
    """
    report = qs_core.qs_report(moe, q)
    dense = report.dense_baseline
    pick_moe = best_capacity_plan(moe, cluster, workload, calibration, space)
    pick_dense = best_capacity_plan(dense, cluster, workload, calibration, space)
    batch_moe = pick_moe.memory.batch_cluster if pick_moe.feasible else 0
    batch_dense = pick_dense.memory.batch_cluster if pick_dense.feasible else 0
    return PairRow(
        model=moe.name,
        dense_model=dense.name,
        q=q,
        num_experts=moe.num_experts,
        top_k=moe.top_k,
        s=report.s,
        qs=report.qs,
        feasible_moe=pick_moe.feasible,
        feasible_dense=pick_dense.feasible,
        reuse=reuse_gap(moe, dense, batch_moe, batch_dense),
        plan_moe=pick_moe.plan.label(),
        plan_dense=pick_dense.plan.label(),
        reason_moe=pick_moe.memory.reason,
        reason_dense=pick_dense.memory.reason,
    )


@dataclass(frozen=True)
class SweepRow:
    context: int
    feasible_moe: bool
    feasible_dense: bool
    batch_moe: Optional[int]
    batch_dense: Optional[int]
    tokens_per_s_moe: Optional[float]
    tokens_per_s_dense: Optional[float]
    tput_moe_rel: Optional[float]
    tput_dense_rel: Optional[float]
    speedup: Optional[float]
    plan_moe: Optional[str]
    plan_dense: Optional[str]

    def to_dict(self) -> dict:
        return {
            "context": self.context,
            "context_label": context_label(self.context),
            "feasible_moe": self.feasible_moe,
            "feasible_dense": self.feasible_dense,
            "batch_moe": self.batch_moe,
            "batch_dense": self.batch_dense,
            "tokens_per_s_moe": self.tokens_per_s_moe,
            "tokens_per_s_dense": self.tokens_per_s_dense,
            "tput_moe_rel": self.tput_moe_rel,
            "tput_dense_rel": self.tput_dense_rel,
            "speedup": self.speedup,
            "plan_moe": self.plan_moe,
            "plan_dense": self.plan_dense,
        }


@dataclass(frozen=True)
class SweepResult:
    model: str
    dense_model: str
    q: float
    anchor_context: int
    anchor_tokens_per_s: float
    rows: tuple

    def to_dict(self) -> dict:
        return {
            "model": self.model,
            "dense_model": self.dense_model,
            "q": self.q,
            "anchor_context": self.anchor_context,
            "anchor_tokens_per_s": self.anchor_tokens_per_s,
            "rows": [r.to_dict() for r in self.rows],
        }


def _tuned_point(model: ModelSpec, cluster: ClusterSpec, context: int,
                 calibration: CalibrationSpec,
                 space: Optional[SearchSpace]) -> Optional[PlanReport]:
    result = autotune(model, cluster, WorkloadSpec(context), space, calibration)
    return result.best


def context_sweep(moe: ModelSpec, q: float, cluster: ClusterSpec,
                  contexts: Sequence[int],
                  calibration: CalibrationSpec = CalibrationSpec(),
                  space: Optional[SearchSpace] = None) -> SweepResult:
    """Autotuned throughput for both variants across a context grid.

    Relative columns are percentages of the MoE variant at the first
    (shortest) context; speedup is the dense/MoE ratio at each point.
    """
    if not contexts:
        raise SpecError("contexts: must be non-empty")
    if list(contexts) != sorted(set(contexts)):
        raise SpecError("contexts: must be strictly ascending")
    dense = qs_core.qs_report(moe, q).dense_baseline

    points = [(c, _tuned_point(moe, cluster, c, calibration, space),
               _tuned_point(dense, cluster, c, calibration, space))
              for c in contexts]
    anchor_point = points[0][1]
    if anchor_point is None:
        raise SpecError(
            f"sweep: {moe.name} infeasible at anchor context {contexts[0]}")
    anchor = anchor_point.throughput.tokens_per_s_cluster

    rows = []
    for context, moe_pick, dense_pick in points:
        tput_moe = (moe_pick.throughput.tokens_per_s_cluster
                    if moe_pick else None)
        tput_dense = (dense_pick.throughput.tokens_per_s_cluster
                      if dense_pick else None)
        rows.append(SweepRow(
            context=context,
            feasible_moe=moe_pick is not None,
            feasible_dense=dense_pick is not None,
            batch_moe=moe_pick.memory.batch_cluster if moe_pick else None,
            batch_dense=dense_pick.memory.batch_cluster if dense_pick else None,
            tokens_per_s_moe=tput_moe,
            tokens_per_s_dense=tput_dense,
            tput_moe_rel=100.0 * tput_moe / anchor if tput_moe else None,
            tput_dense_rel=100.0 * tput_dense / anchor if tput_dense else None,
            speedup=(tput_dense / tput_moe
                     if tput_moe and tput_dense else None),
            plan_moe=moe_pick.plan.label() if moe_pick else None,
            plan_dense=dense_pick.plan.label() if dense_pick else None,
        ))
    return SweepResult(
        model=moe.name,
        dense_model=dense.name,
        q=q,
        anchor_context=contexts[0],
        anchor_tokens_per_s=anchor,
        rows=tuple(rows),
    )


def attribution_row(model: ModelSpec, plan: ParallelismPlan, batch_replica: int,
                    workload: WorkloadSpec, cluster: ClusterSpec,
                    calibration: CalibrationSpec = CalibrationSpec()) -> dict:
    """Absolute per-step time split (HBM / compute / exposed comm) at a point."""
    report = evaluate_plan(model, plan, cluster, workload, calibration)
    if not report.feasible:
        raise SpecError(
            f"attribution: {model.name} infeasible under {plan.label()}: "
            f"{report.memory.reason}")
    if batch_replica > report.memory.n_eff_max:
        raise SpecError(
            f"attribution: batch {batch_replica} exceeds capacity "
            f"{report.memory.n_eff_max} for {model.name} under {plan.label()}")
    from . import latency_model
    from .comm_model import CommConfig
    lat = latency_model.token_latency(
        model, plan, batch_replica, workload, cluster,
        CommConfig.from_calibration(calibration),
        calibration.attn_weights_tp_sharded)
    return {
        "hbm_s": lat.t_hbm,
        "compute_s": lat.t_compute,
        "comm_s": lat.t_comm_exposed,
        "t_token_s": lat.t_token,
    }


@dataclass(frozen=True)
class AttributionReport:
    model: str
    dense_model: str
    q: float
    unit_s: float
    rows: tuple  # per-(context, variant) dicts
    gap_drivers: dict  # context -> component name

    def to_dict(self) -> dict:
        return {
            "model": self.model,
            "dense_model": self.dense_model,
            "q": self.q,
            "unit_s": self.unit_s,
            "rows": list(self.rows),
            "gap_drivers": {str(k): v for k, v in self.gap_drivers.items()},
        }


def attribution_report(moe: ModelSpec, q: float, cluster: ClusterSpec,
                       contexts: Sequence[int] = ATTRIBUTION_CONTEXTS,
                       calibration: CalibrationSpec = CalibrationSpec(),
                       space: Optional[SearchSpace] = None) -> AttributionReport:
    """Decode-step time decomposition under each variant's best plan.

    All entries are normalized so the MoE compute term at the first context
    equals 1; the gap driver at each context is the component with the
    largest MoE-minus-dense difference.
    """
    if not contexts:
        raise SpecError("contexts: must be non-empty")
    dense = qs_core.qs_report(moe, q).dense_baseline

    points = []
    for context in contexts:
        moe_pick = _tuned_point(moe, cluster, context, calibration, space)
        dense_pick = _tuned_point(dense, cluster, context, calibration, space)
        if moe_pick is None or dense_pick is None:
            which = moe.name if moe_pick is None else dense.name
            raise SpecError(f"attribution: {which} infeasible at context {context}")
        points.append((context, moe_pick, dense_pick))

    unit = points[0][1].latency.t_compute
    if unit <= 0:
        raise SpecError("attribution: zero compute time at anchor point")

    rows = []
    drivers: dict = {}
    for context, moe_pick, dense_pick in points:
        split = {}
        for variant, pick in (("moe", moe_pick), ("dense", dense_pick)):
            lat = pick.latency
            split[variant] = {"hbm": lat.t_hbm, "compute": lat.t_compute,
                              "comm": lat.t_comm_exposed}
            rows.append({
                "context": context,
                "context_label": context_label(context),
                "variant": variant,
                "model": moe.name if variant == "moe" else dense.name,
                "plan": pick.plan.label(),
                "batch": pick.memory.batch_cluster,
                "hbm_rel": lat.t_hbm / unit,
                "compute_rel": lat.t_compute / unit,
                "comm_rel": lat.t_comm_exposed / unit,
                "hbm_s": lat.t_hbm,
                "compute_s": lat.t_compute,
                "comm_s": lat.t_comm_exposed,
            })
        gaps = {name: split["moe"][name] - split["dense"][name]
                for name in GAP_COMPONENTS}
        drivers[context] = max(GAP_COMPONENTS, key=lambda name: gaps[name])

    return AttributionReport(
        model=moe.name,
        dense_model=dense.name,
        q=q,
        unit_s=unit,
        rows=tuple(rows),
        gap_drivers=drivers,
    )


@dataclass(frozen=True)
class CompareRow:
    q: float
    feasible_moe: bool
    feasible_dense: bool
    tokens_per_s_moe: Optional[float]
    tokens_per_s_dense: Optional[float]
    tput_moe_rel: Optional[float]
    tput_dense_rel: Optional[float]
    ratio: Optional[float]
    plan_moe: Optional[str]
    plan_dense: Optional[str]

    def to_dict(self) -> dict:
        return {
            "q": self.q,
            "feasible_moe": self.feasible_moe,
            "feasible_dense": self.feasible_dense,
            "tokens_per_s_moe": self.tokens_per_s_moe,
            "tokens_per_s_dense": self.tokens_per_s_dense,
            "tput_moe_rel": self.tput_moe_rel,
            "tput_dense_rel": self.tput_dense_rel,
            "ratio": self.ratio,
            "plan_moe": self.plan_moe,
            "plan_dense": self.plan_dense,
        }


def compare_report(moe: ModelSpec, q_values: Sequence[float], cluster: ClusterSpec,
                   workload: WorkloadSpec,
                   calibration: CalibrationSpec = CalibrationSpec(),
                   space: Optional[SearchSpace] = None) -> list:
    """Autotuned MoE-vs-dense throughput at one context across q values.

    MoE is the 100% baseline for each row; ratio = dense / MoE throughput.
    The MoE point is tuned once and shared since q only changes the baseline.
    """
    if not q_values:
        raise SpecError("q: must provide at least one value")
    moe_pick = _tuned_point(moe, cluster, workload.context_length,
                            calibration, space)
    tput_moe = moe_pick.throughput.tokens_per_s_cluster if moe_pick else None

    rows = []
    for q in q_values:
        dense = qs_core.qs_report(moe, q).dense_baseline
        dense_pick = _tuned_point(dense, cluster, workload.context_length,
                                  calibration, space)
        tput_dense = (dense_pick.throughput.tokens_per_s_cluster
                      if dense_pick else None)
        ratio = tput_dense / tput_moe if tput_moe and tput_dense else None
        rows.append(CompareRow(
            q=q,
            feasible_moe=moe_pick is not None,
            feasible_dense=dense_pick is not None,
            tokens_per_s_moe=tput_moe,
            tokens_per_s_dense=tput_dense,
            tput_moe_rel=100.0 if tput_moe else None,
            tput_dense_rel=100.0 * ratio if ratio else None,
            ratio=ratio,
            plan_moe=moe_pick.plan.label() if moe_pick else None,
            plan_dense=dense_pick.plan.label() if dense_pick else None,
        ))
    return rows


# ---------------------------------------------------------------------------
# payload builders (shared verbatim by the CLI and the HTTP service)


def _inputs(cluster: ClusterSpec, calibration: CalibrationSpec, **extra) -> dict:
    out = {
        "hardware": cluster.hardware.name,
        "num_gpus": cluster.num_gpus,
        "calibration": calibration.name,
    }
    out.update(extra)
    return out


def qs_payload(calibration: CalibrationSpec,
               model: Optional[ModelSpec] = None,
               q_values: Sequence[float] = ()) -> dict:
    if model is None:
        rows = qs_core.table1_report()
        return {"schema_version": SCHEMA_VERSION, "report": "qs",
                "inputs": {"builtin": True}, "rows": rows}
    rows = []
    for q in q_values:
        rep = qs_core.qs_report(model, q)
        rows.append({
            "model": model.name,
            "num_experts": model.num_experts,
            "top_k": model.top_k,
            "s": rep.s,
            "q": q,
            "qs": rep.qs,
            "verdict": rep.verdict,
            "ffn_traffic_ratio": rep.ffn_traffic_ratio,
            "dense_model": rep.dense_baseline.name,
            "dense_total_params": rep.dense_baseline.total_params,
        })
    return {"schema_version": SCHEMA_VERSION, "report": "qs",
            "inputs": {"model": model.name}, "rows": rows}


def pair_payload(moe: ModelSpec, q_values: Sequence[float], cluster: ClusterSpec,
                 workload: WorkloadSpec, calibration: CalibrationSpec,
                 space: Optional[SearchSpace] = None) -> dict:
    rows = [paired_comparison(moe, q, cluster, workload, calibration, space)
            for q in q_values]
    return {
        "schema_version": SCHEMA_VERSION,
        "report": "pair",
        "inputs": _inputs(cluster, calibration, model=moe.name,
                          context_length=workload.context_length),
        "rows": [r.to_dict() for r in rows],
    }


def sweep_payload(moe: ModelSpec, q: float, cluster: ClusterSpec,
                  contexts: Sequence[int], calibration: CalibrationSpec,
                  space: Optional[SearchSpace] = None) -> dict:
    result = context_sweep(moe, q, cluster, contexts, calibration, space)
    out = {
        "schema_version": SCHEMA_VERSION,
        "report": "sweep",
        "inputs": _inputs(cluster, calibration, model=moe.name, q=q,
                          contexts=list(contexts)),
    }
    out.update(result.to_dict())
    return out


def attribution_payload(moe: ModelSpec, q: float, cluster: ClusterSpec,
                        contexts: Sequence[int], calibration: CalibrationSpec,
                        space: Optional[SearchSpace] = None) -> dict:
    report = attribution_report(moe, q, cluster, contexts, calibration, space)
    out = {
        "schema_version": SCHEMA_VERSION,
        "report": "attribution",
        "inputs": _inputs(cluster, calibration, model=moe.name, q=q,
                          contexts=list(contexts)),
    }
    out.update(report.to_dict())
    return out


def compare_payload(moe: ModelSpec, q_values: Sequence[float],
                    cluster: ClusterSpec, workload: WorkloadSpec,
                    calibration: CalibrationSpec,
                    space: Optional[SearchSpace] = None) -> dict:
    rows = compare_report(moe, q_values, cluster, workload, calibration, space)
    return {
        "schema_version": SCHEMA_VERSION,
        "report": "compare",
        "inputs": _inputs(cluster, calibration, model=moe.name,
                          context_length=workload.context_length),
        "rows": [r.to_dict() for r in rows],
    }


def autotune_payload(model: ModelSpec, cluster: ClusterSpec,
                     workload: WorkloadSpec, calibration: CalibrationSpec,
                     space: Optional[SearchSpace] = None) -> dict:
    result = autotune(model, cluster, workload, space, calibration)
    out = {
        "schema_version": SCHEMA_VERSION,
        "report": "autotune",
        "inputs": _inputs(cluster, calibration, model=model.name,
                          context_length=workload.context_length),
    }
    out.update(result.to_dict())
    return out


def feasible_payload(model: ModelSpec, plan: ParallelismPlan,
                     cluster: ClusterSpec, workload: WorkloadSpec,
                     calibration: CalibrationSpec) -> dict:
    report = evaluate_plan(model, plan, cluster, workload, calibration)
    out = {
        "schema_version": SCHEMA_VERSION,
        "report": "feasible",
        "inputs": _inputs(cluster, calibration, model=model.name,
                          context_length=workload.context_length,
                          plan=plan.label()),
    }
    out.update(report.to_dict())
    return out


# ---------------------------------------------------------------------------
# rendering

# (key, header, kind); kind picks the table rounding, CSV keeps full precision
_PAIR_COLUMNS = (
    ("model", "model", "str"),
    ("q", "q", "num"),
    ("num_experts", "E", "int"),
    ("top_k", "k", "int"),
    ("s", "s", "sig"),
    ("qs", "qs", "sig"),
    ("batch_moe", "B_moe", "int"),
    ("batch_dense", "B_dense", "int"),
    ("reuse_moe", "R_moe", "sig"),
    ("reuse_dense", "R_dense", "sig"),
    ("routing_factor", "E/k", "ratio"),
    ("capacity_factor", "capacity", "ratio"),
    ("total_gap", "gap", "ratio"),
)

_SWEEP_COLUMNS = (
    ("context_label", "context", "str"),
    ("batch_moe", "B_moe", "int"),
    ("batch_dense", "B_dense", "int"),
    ("tput_moe_rel", "moe_%", "pct"),
    ("tput_dense_rel", "dense_%", "pct"),
    ("speedup", "speedup", "ratio"),
    ("plan_moe", "plan_moe", "str"),
    ("plan_dense", "plan_dense", "str"),
)

_ATTRIBUTION_COLUMNS = (
    ("context_label", "context", "str"),
    ("variant", "variant", "str"),
    ("plan", "plan", "str"),
    ("batch", "B", "int"),
    ("hbm_rel", "hbm", "ratio"),
    ("compute_rel", "compute", "ratio"),
    ("comm_rel", "comm", "ratio"),
)

_COMPARE_COLUMNS = (
    ("q", "q", "num"),
    ("tput_moe_rel", "moe_%", "pct"),
    ("tput_dense_rel", "dense_%", "pct"),
    ("ratio", "dense/moe", "ratio"),
    ("plan_moe", "plan_moe", "str"),
    ("plan_dense", "plan_dense", "str"),
)

_QS_BUILTIN_COLUMNS = (
    ("name", "model", "str"),
    ("num_experts", "E", "int"),
    ("top_k", "k", "int"),
    ("s", "s", "sig"),
    ("q_low", "q_lo", "num"),
    ("q_high", "q_hi", "num"),
    ("qs_low", "qs_lo", "sig"),
    ("qs_high", "qs_hi", "sig"),
)

_QS_MODEL_COLUMNS = (
    ("model", "model", "str"),
    ("num_experts", "E", "int"),
    ("top_k", "k", "int"),
    ("s", "s", "sig"),
    ("q", "q", "num"),
    ("qs", "qs", "sig"),
    ("verdict", "verdict", "str"),
    ("ffn_traffic_ratio", "traffic_ratio", "ratio"),
)

_AUTOTUNE_COLUMNS = (
    ("plan_label", "plan", "str"),
    ("feasible", "feasible", "str"),
    ("batch_cluster", "B", "int"),
    ("t_hbm_us", "t_hbm_us", "ratio"),
    ("t_compute_us", "t_compute_us", "ratio"),
    ("t_comm_us", "t_comm_us", "ratio"),
    ("t_token_us", "t_token_us", "ratio"),
    ("tokens_per_s", "tokens_per_s", "num"),
)

_FEASIBLE_COLUMNS = (
    ("plan", "plan", "str"),
    ("feasible", "feasible", "str"),
    ("budget_gb", "budget_GB", "ratio"),
    ("resident_gb", "resident_GB", "ratio"),
    ("kv_seq_gb", "kv_per_seq_GB", "ratio"),
    ("n_eff_max", "n_eff_max", "int"),
    ("batch_cluster", "B", "int"),
)


def _format_cell(value, kind: str) -> str:
    if value is None:
        return "-"
    if kind == "str":
        return str(value)
    if kind == "int":
        return str(int(value))
    if kind == "pct":
        return f"{value:.1f}"
    if kind == "ratio":
        return f"{value:.2f}"
    if kind == "sig":
        return f"{value:.4g}"
    return f"{value:g}"  # "num"


def _csv_cell(value) -> str:
    if value is None:
        return "-"
    if isinstance(value, bool):
        return str(value).lower()
    return str(value)


def render_table(columns, rows: Sequence[dict]) -> str:
    headers = [header for _, header, _ in columns]
    body = [[_format_cell(row.get(key), kind) for key, _, kind in columns]
            for row in rows]
    widths = [max(len(headers[i]), *(len(r[i]) for r in body)) if body
              else len(headers[i]) for i in range(len(headers))]
    lines = ["  ".join(h.ljust(w) for h, w in zip(headers, widths)).rstrip()]
    lines.append("  ".join("-" * w for w in widths))
    for r in body:
        lines.append("  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip())
    return "\n".join(lines) + "\n"


def render_csv(columns, rows: Sequence[dict]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow([header for _, header, _ in columns])
    for row in rows:
        writer.writerow([_csv_cell(row.get(key)) for key, _, _ in columns])
    return buf.getvalue()


def render_json(payload: dict) -> str:
    return json.dumps(payload, indent=2) + "\n"


def _autotune_rows(payload: dict) -> list:
    rows = []
    for entry in payload["ranking"]:
        lat = entry["latency"]
        tput = entry["throughput"]
        rows.append({
            "plan_label": entry["plan_label"],
            "feasible": entry["feasible"],
            "batch_cluster": entry["memory"]["batch_cluster"] if entry["feasible"] else None,
            "t_hbm_us": lat["t_hbm"] * 1e6 if lat else None,
            "t_compute_us": lat["t_compute"] * 1e6 if lat else None,
            "t_comm_us": lat["t_comm_exposed"] * 1e6 if lat else None,
            "t_token_us": lat["t_token"] * 1e6 if lat else None,
            "tokens_per_s": tput["tokens_per_s_cluster"] if tput else None,
        })
    return rows


def _feasible_rows(payload: dict) -> list:
    mem = payload["memory"]
    return [{
        "plan": payload["plan_label"],
        "feasible": payload["feasible"],
        "budget_gb": mem["budget_bytes"] / 1e9,
        "resident_gb": mem["resident_weight_bytes"] / 1e9,
        "kv_seq_gb": mem["kv_bytes_per_seq_per_gpu"] / 1e9,
        "n_eff_max": mem["n_eff_max"],
        "batch_cluster": mem["batch_cluster"],
    }]


_RENDER_PLANS = {
    "qs_builtin": (_QS_BUILTIN_COLUMNS, lambda p: p["rows"]),
    "qs_model": (_QS_MODEL_COLUMNS, lambda p: p["rows"]),
    "pair": (_PAIR_COLUMNS, lambda p: p["rows"]),
    "sweep": (_SWEEP_COLUMNS, lambda p: p["rows"]),
    "attribution": (_ATTRIBUTION_COLUMNS, lambda p: p["rows"]),
    "compare": (_COMPARE_COLUMNS, lambda p: p["rows"]),
    "autotune": (_AUTOTUNE_COLUMNS, _autotune_rows),
    "feasible": (_FEASIBLE_COLUMNS, _feasible_rows),
}


def render(kind: str, payload: dict, fmt: str) -> str:
    if fmt == "json":
        return render_json(payload)
    columns, extract = _RENDER_PLANS[kind]
    rows = extract(payload)
    if fmt == "csv":
        return render_csv(columns, rows)
    return render_table(columns, rows)


# ---------------------------------------------------------------------------
# CLI


def _parse_tokens(text: str) -> int:
    raw = text.strip().lower()
    scale = 1
    if raw.endswith("k"):
        raw, scale = raw[:-1], 1024
    elif raw.endswith("m"):
        raw, scale = raw[:-1], 1024 * 1024
    try:
        value = int(raw) * scale
    except ValueError:
        raise SpecError(f"context: cannot parse {text!r}") from None
    if value < 1:
        raise SpecError(f"context: must be >= 1, got {text!r}")
    return value


def _parse_context_list(text: str) -> list:
    return [_parse_tokens(part) for part in text.split(",") if part.strip()]


def _parse_q_list(text: str) -> list:
    try:
        values = [float(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise SpecError(f"q: cannot parse {text!r}") from None
    if not values:
        raise SpecError("q: must provide at least one value")
    return values


def resolve_model(name_or_path: str) -> ModelSpec:
    path = Path(name_or_path)
    if path.suffix == ".json" or path.exists():
        return load_model_spec(path)
    builtins = builtin_model_names()
    if name_or_path in builtins:
        return load_builtin_model(name_or_path)
    raise SpecError(
        f"model: unknown model {name_or_path!r}; "
        f"builtins: {', '.join(builtins)}")


def _resolve_calibration(arg: Optional[str]) -> CalibrationSpec:
    if arg is None:
        return load_default_calibration()
    return load_calibration(arg)


def _resolve_cluster(args, calibration: CalibrationSpec) -> ClusterSpec:
    if args.cluster:
        hardware = load_hardware_spec(args.cluster)
    else:
        hardware = load_builtin_hardware("reference")
    return make_cluster(hardware, args.gpus, calibration)


def _add_common(parser: argparse.ArgumentParser, model_default=None) -> None:
    parser.add_argument("--model", default=model_default,
                        help="builtin model name or path to a model JSON")
    parser.add_argument("--cluster", default=None,
                        help="path to a hardware JSON (default: reference GPU)")
    parser.add_argument("--gpus", type=int, default=64,
                        help="number of GPUs in the cluster (default: 64)")
    parser.add_argument("--calibration", default=None,
                        help="path to a calibration JSON (default: shipped file)")
    parser.add_argument("--format", choices=("table", "csv", "json"),
                        default="table", help="output format (default: table)")
    parser.add_argument("--out", default=None,
                        help="write output to this path instead of stdout")


def _plan_from_args(args, cluster: ClusterSpec) -> ParallelismPlan:
    replica = args.tp * args.pp * args.kv_degree
    if args.dp is not None:
        dp = args.dp
    else:
        if replica > cluster.num_gpus or cluster.num_gpus % replica != 0:
            raise SpecError(
                f"plan: tp*pp*kv_degree = {replica} does not divide "
                f"{cluster.num_gpus} GPUs")
        dp = cluster.num_gpus // replica
    return ParallelismPlan(tp=args.tp, ep=args.ep, pp=args.pp,
                           kv_mode=args.kv_mode, kv_degree=args.kv_degree, dp=dp)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="moeplan",
        description="Decode-stage cost model for MoE vs quality-matched dense "
                    "serving: capacity, throughput, and parallelization plans.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("qs", help="sparsity/quality traffic criterion")
    _add_common(p)
    p.add_argument("--builtin", action="store_true",
                   help="report the builtin survey of published MoE configs")
    p.add_argument("--q", default="5", help="quality factor(s), comma-separated")

    p = sub.add_parser("pair", help="quality-matched capacity comparison")
    _add_common(p, model_default="deepseek-v3")
    p.add_argument("--q", default="5", help="quality factor(s), comma-separated")
    p.add_argument("--context", default="131072", help="decode context length")

    p = sub.add_parser("sweep", help="autotuned throughput across contexts")
    _add_common(p, model_default="deepseek-v3")
    p.add_argument("--q", default="5", help="quality factor")
    p.add_argument("--contexts",
                   default=",".join(str(c) for c in SWEEP_CONTEXTS),
                   help="comma-separated context lengths, ascending")

    p = sub.add_parser("attribution", help="decode-time split by component")
    _add_common(p, model_default="deepseek-v3")
    p.add_argument("--q", default="5", help="quality factor")
    p.add_argument("--contexts",
                   default=",".join(str(c) for c in ATTRIBUTION_CONTEXTS),
                   help="comma-separated context lengths")

    p = sub.add_parser("compare", help="autotuned MoE vs dense throughput")
    _add_common(p, model_default="qwen3-235b-a22b")
    p.add_argument("--q", default="5", help="quality factor(s), comma-separated")
    p.add_argument("--context", default="131072", help="decode context length")

    p = sub.add_parser("autotune", help="rank parallelization plans")
    _add_common(p, model_default="deepseek-v3")
    p.add_argument("--context", default="131072", help="decode context length")

    p = sub.add_parser("feasible", help="memory feasibility of one plan")
    _add_common(p, model_default="deepseek-v3")
    p.add_argument("--context", default="131072", help="decode context length")
    p.add_argument("--tp", type=int, default=8)
    p.add_argument("--ep", type=int, default=1)
    p.add_argument("--pp", type=int, default=1)
    p.add_argument("--kv-mode", choices=("none", "kvp", "cp"), default="none")
    p.add_argument("--kv-degree", type=int, default=1)
    p.add_argument("--dp", type=int, default=None,
                   help="data-parallel replicas (default: fill the cluster)")

    p = sub.add_parser("serve", help="run the HTTP planning service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8377)
    p.add_argument("--calibration", default=None)

    return parser


def _run_command(args) -> tuple:
    """Returns (render kind, payload, infeasible-answer flag)."""
    if args.command == "serve":
        from . import service
        import uvicorn
        app = service.create_app(_resolve_calibration(args.calibration))
        uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
        return None, None, False

    calibration = _resolve_calibration(args.calibration)

    if args.command == "qs":
        if args.builtin or args.model is None:
            return "qs_builtin", qs_payload(calibration), False
        model = resolve_model(args.model)
        return "qs_model", qs_payload(
            calibration, model, _parse_q_list(args.q)), False

    cluster = _resolve_cluster(args, calibration)
    model = resolve_model(args.model)

    if args.command == "pair":
        workload = WorkloadSpec(_parse_tokens(args.context))
        payload = pair_payload(model, _parse_q_list(args.q), cluster,
                               workload, calibration)
        infeasible = any(not (r["feasible_moe"] and r["feasible_dense"])
                         for r in payload["rows"])
        return "pair", payload, infeasible

    if args.command == "sweep":
        contexts = _parse_context_list(args.contexts)
        q = _parse_q_list(args.q)[0]
        payload = sweep_payload(model, q, cluster, contexts, calibration)
        return "sweep", payload, False

    if args.command == "attribution":
        contexts = _parse_context_list(args.contexts)
        q = _parse_q_list(args.q)[0]
        payload = attribution_payload(model, q, cluster, contexts, calibration)
        return "attribution", payload, False

    if args.command == "compare":
        workload = WorkloadSpec(_parse_tokens(args.context))
        payload = compare_payload(model, _parse_q_list(args.q), cluster,
                                  workload, calibration)
        infeasible = any(not (r["feasible_moe"] and r["feasible_dense"])
                         for r in payload["rows"])
        return "compare", payload, infeasible

    if args.command == "autotune":
        workload = WorkloadSpec(_parse_tokens(args.context))
        payload = autotune_payload(model, cluster, workload, calibration)
        return "autotune", payload, not payload["feasible"]

    if args.command == "feasible":
        workload = WorkloadSpec(_parse_tokens(args.context))
        plan = _plan_from_args(args, cluster)
        payload = feasible_payload(model, plan, cluster, workload, calibration)
        return "feasible", payload, not payload["feasible"]

    raise SpecError(f"unknown command {args.command!r}")


def cli_main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors; the CLI contract reserves 2 for
        # infeasible verdicts, so remap usage problems to 1.
        return 0 if exc.code == 0 else 1

    try:
        kind, payload, infeasible = _run_command(args)
    except SpecError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1

    if kind is not None:
        text = render(kind, payload, args.format)
        if args.out:
            Path(args.out).write_text(text)
        else:
            sys.stdout.write(text)
    return 2 if infeasible else 0


def main() -> None:
    sys.exit(cli_main())


if __name__ == "__main__":
    main()
