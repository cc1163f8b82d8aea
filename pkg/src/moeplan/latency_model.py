"""Per-token decode latency: roofline of compute vs HBM plus exposed comm.

All step-level quantities are per GPU for one pipeline stage of one replica.
A decode step emits one token for each of the replica's n concurrent
sequences, so per-token latency equals step time and cluster throughput is
(aggregate batch) / t_token.

HBM traffic per step:
  * FFN weights touched once per step: dense reads its TP/PP shard, MoE reads
    the fraction of its EP/PP-resident pool that routing activates,
    min(1, n*k/E) -- every expert whose expected token share reaches one
    token, which is what collapses reuse to R_moe = B*k/E.
  * Attention/projection weights read once per step; embeddings once.
  * Each sequence reads its own KV shard once per step.

Compute per step divides the whole-model per-token FLOPs across
tp * kv_degree ranks (batch-parallel GEMMs) and pp stages.  Projections and
FFN run at the weight dtype rate; attention score/value math runs at the KV
dtype rate.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from . import memory_model
from .comm_model import CommConfig, CommReport, build_collective_schedule, exposed_comm
from .specs import (
    ClusterSpec,
    HardwareSpec,
    ModelSpec,
    ParallelismPlan,
    SpecError,
    WorkloadSpec,
)


@dataclass(frozen=True)
class PhaseCost:
    """One phase's per-step HBM bytes and FLOPs on a single GPU."""

    hbm_bytes: float
    flops: float
    hbm_s: float
    compute_s: float

    @property
    def window_s(self) -> float:
        return self.hbm_s + self.compute_s


@dataclass(frozen=True)
class LatencyBreakdown:
    t_compute: float
    t_hbm: float
    t_comm_exposed: float
    t_token: float
    # Per-token views (step totals divided by the replica batch).
    hbm_detail: dict
    compute_detail: dict
    comm: CommReport
    batch_replica: float

    def to_dict(self) -> dict:
        return {
            "t_compute": self.t_compute,
            "t_hbm": self.t_hbm,
            "t_comm_exposed": self.t_comm_exposed,
            "t_token": self.t_token,
            "hbm_detail": self.hbm_detail,
            "compute_detail": self.compute_detail,
            "comm": self.comm.to_dict(),
            "batch_replica": self.batch_replica,
        }


@dataclass(frozen=True)
class ThroughputReport:
    tokens_per_s_cluster: float
    tokens_per_s_per_gpu: float
    pp_utilization: float
    relative_pct: Optional[float] = None
    baseline: Optional[str] = None

    def to_dict(self) -> dict:
        return {
            "tokens_per_s_cluster": self.tokens_per_s_cluster,
            "tokens_per_s_per_gpu": self.tokens_per_s_per_gpu,
            "pp_utilization": self.pp_utilization,
            "relative_pct": self.relative_pct,
            "baseline": self.baseline,
        }


def _weight_dtype_name(dtype_bytes: float) -> str:
    return "fp8" if dtype_bytes <= 1.0 else "bf16"


def _flops_rate(hw: HardwareSpec, dtype_bytes: float) -> float:
    return hw.flops(_weight_dtype_name(dtype_bytes))


def ffn_time(model: ModelSpec, plan: ParallelismPlan, batch_replica: float,
             hw: HardwareSpec) -> PhaseCost:
    """FFN weight reads and GEMM time per step on one GPU."""
    if batch_replica <= 0:
        raise SpecError("ffn_time: batch must be positive")
    n = batch_replica
    if model.is_moe:
        resident_pool = model.ffn_weight_bytes_total / (plan.ep * plan.pp)
        touched_fraction = min(1.0, n * model.top_k / model.num_experts)
        hbm_bytes = resident_pool * touched_fraction
    else:
        hbm_bytes = model.ffn_weight_bytes_total / (plan.tp * plan.pp)

    flops_per_token = 2.0 * model.active_ffn_weight_bytes / model.weight_dtype_bytes
    shard = plan.tp * plan.kv_degree * plan.pp
    flops = n * flops_per_token / shard
    return PhaseCost(
        hbm_bytes=hbm_bytes,
        flops=flops,
        hbm_s=hbm_bytes / hw.hbm_bandwidth_bytes_per_s,
        compute_s=flops / _flops_rate(hw, model.weight_dtype_bytes),
    )


def attn_time(model: ModelSpec, plan: ParallelismPlan, batch_replica: float,
              workload: WorkloadSpec, hw: HardwareSpec) -> PhaseCost:
    """KV reads and attention score/value math per step on one GPU."""
    if batch_replica <= 0:
        raise SpecError("attn_time: batch must be positive")
    n = batch_replica
    kv_seq = memory_model.kv_bytes_per_seq_per_gpu(model, plan, workload)
    hbm_bytes = n * kv_seq

    # Score and value products against the full context per layer.
    flops_per_token = (4.0 * workload.context_length * model.num_heads
                       * model.head_dim * model.num_layers)
    shard = plan.tp * plan.kv_degree * plan.pp
    flops = n * flops_per_token / shard
    return PhaseCost(
        hbm_bytes=hbm_bytes,
        flops=flops,
        hbm_s=hbm_bytes / hw.hbm_bandwidth_bytes_per_s,
        compute_s=flops / _flops_rate(hw, model.kv_dtype_bytes),
    )


def projection_time(model: ModelSpec, plan: ParallelismPlan, batch_replica: float,
                    hw: HardwareSpec, attn_tp_sharded: bool = True) -> PhaseCost:
    """Attention/projection weight reads plus their GEMMs, and embeddings."""
    if batch_replica <= 0:
        raise SpecError("projection_time: batch must be positive")
    n = batch_replica
    attn_shard = (plan.tp * plan.pp) if attn_tp_sharded else plan.pp
    hbm_bytes = model.attn_weight_bytes_total / attn_shard + model.embed_weight_bytes

    flops_per_token = 2.0 * model.attn_weight_bytes_total / model.weight_dtype_bytes
    shard = plan.tp * plan.kv_degree * plan.pp
    flops = n * flops_per_token / shard
    return PhaseCost(
        hbm_bytes=hbm_bytes,
        flops=flops,
        hbm_s=hbm_bytes / hw.hbm_bandwidth_bytes_per_s,
        compute_s=flops / _flops_rate(hw, model.weight_dtype_bytes),
    )


def token_latency(model: ModelSpec, plan: ParallelismPlan, batch_replica: float,
                  workload: WorkloadSpec, cluster: ClusterSpec,
                  comm_cfg: CommConfig = CommConfig(),
                  attn_tp_sharded: bool = True) -> LatencyBreakdown:
    """Roofline composition for one decode step at the given replica batch."""
    if batch_replica < 1:
        raise SpecError("token_latency: needs a feasible batch (>= 1 sequence)")
    hw = cluster.hardware
    n = float(batch_replica)

    ffn = ffn_time(model, plan, n, hw)
    attn = attn_time(model, plan, n, workload, hw)
    proj = projection_time(model, plan, n, hw, attn_tp_sharded)

    t_hbm = ffn.hbm_s + attn.hbm_s + proj.hbm_s
    t_compute = ffn.compute_s + attn.compute_s + proj.compute_s

    schedule = build_collective_schedule(model, plan, n, workload, hw)
    windows = {
        "attention": attn.window_s,
        "projection": proj.window_s,
        "ffn": ffn.window_s,
    }
    comm = exposed_comm(schedule, windows, comm_cfg, hw)

    t_token = max(t_compute, t_hbm) + comm.exposed_s
    return LatencyBreakdown(
        t_compute=t_compute,
        t_hbm=t_hbm,
        t_comm_exposed=comm.exposed_s,
        t_token=t_token,
        hbm_detail={
            "ffn_weight_bytes": ffn.hbm_bytes / n,
            "attn_weight_bytes": proj.hbm_bytes / n,
            "kv_read_bytes": attn.hbm_bytes / n,
        },
        compute_detail={
            "proj_flops": proj.flops * plan.tp * plan.kv_degree * plan.pp / n,
            "attn_flops": attn.flops * plan.tp * plan.kv_degree * plan.pp / n,
            "ffn_flops": ffn.flops * plan.tp * plan.kv_degree * plan.pp / n,
        },
        comm=comm,
        batch_replica=n,
    )


def pp_utilization(plan: ParallelismPlan, pp_bubble_fraction: float) -> float:
    """Pipeline efficiency multiplier; 1.0 when bubbles are not modeled."""
    if pp_bubble_fraction < 0:
        raise SpecError("pp_utilization: bubble fraction must be >= 0")
    return 1.0 / (1.0 + pp_bubble_fraction * (plan.pp - 1))


def throughput(batch_cluster: float, latency: LatencyBreakdown,
               cluster: ClusterSpec, plan: ParallelismPlan,
               pp_bubble_fraction: float = 0.0,
               baseline_tokens_per_s: Optional[float] = None,
               baseline_name: Optional[str] = None) -> ThroughputReport:
    """Aggregate decode throughput for the whole cluster."""
    if batch_cluster < 1:
        raise SpecError("throughput: needs a feasible aggregate batch")
    util = pp_utilization(plan, pp_bubble_fraction)
    cluster_rate = batch_cluster / latency.t_token * util
    relative = None
    if baseline_tokens_per_s is not None and baseline_tokens_per_s > 0:
        relative = 100.0 * cluster_rate / baseline_tokens_per_s
    return ThroughputReport(
        tokens_per_s_cluster=cluster_rate,
        tokens_per_s_per_gpu=cluster_rate / cluster.num_gpus,
        pp_utilization=util,
        relative_pct=relative,
        baseline=baseline_name,
    )
