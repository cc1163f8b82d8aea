"""Per-GPU HBM budget, resident weights under a plan, and feasible batch size.

Sharding rules for residency:

* Expert FFN weights shard over EP and PP only, never TP; the full expert
  pool must stay resident regardless of routing.
* Dense FFN weights shard over TP and PP.
* Attention/projection weights shard over PP, and over TP only when the
  calibration asks for it (``attn_tp_sharded=False`` models weight-gathered
  attention where each rank keeps a full copy).
* Embeddings stay resident everywhere.
* KV shards across the KVP/CP degree and PP; head-split layouts (full, GQA,
  MQA) additionally shard across min(tp, kv heads).  MLA caches a single
  shared latent per token, which has no head dimension to split, so TP ranks
  each hold the full latent stream.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

from .specs import (
    ClusterSpec,
    KvLayout,
    ModelSpec,
    ParallelismPlan,
    SpecError,
    WorkloadSpec,
)


class InfeasibleHardwareError(SpecError):
    """The per-GPU budget is non-positive before any model is placed."""


@dataclass(frozen=True)
class MemoryReport:
    budget_bytes: float
    resident_weight_bytes: float
    kv_bytes_per_seq_per_gpu: float
    n_eff_max: int
    feasible: bool
    batch_cluster: int  # n_eff_max * dp
    reason: Optional[str] = None

    def to_dict(self) -> dict:
        return {
            "budget_bytes": self.budget_bytes,
            "resident_weight_bytes": self.resident_weight_bytes,
            "kv_bytes_per_seq_per_gpu": self.kv_bytes_per_seq_per_gpu,
            "n_eff_max": self.n_eff_max,
            "feasible": self.feasible,
            "batch_cluster": self.batch_cluster,
            "reason": self.reason,
        }


def hbm_budget(cluster: ClusterSpec) -> float:
    """Usable per-GPU bytes: (capacity - reserve - misc) * (1 - safety)."""
    budget = (cluster.hardware.hbm_capacity_bytes
              - cluster.reserve_bytes
              - cluster.misc_bytes) * (1.0 - cluster.safety_fraction)
    if budget <= 0:
        raise InfeasibleHardwareError(
            f"hbm_budget: non-positive budget "
            f"({cluster.hardware.hbm_capacity_bytes:.3g} B capacity minus "
            f"{cluster.reserve_bytes:.3g} reserve and {cluster.misc_bytes:.3g} misc)"
        )
    return budget


def kv_bytes_per_token_per_layer(layout: KvLayout, kv_dtype_bytes: float) -> float:
    if layout.kind == "mla":
        return (layout.mla_latent_dim + layout.mla_rope_dim) * kv_dtype_bytes
    return 2.0 * layout.num_kv_heads * layout.kv_head_dim * kv_dtype_bytes


def kv_shard_factor(model: ModelSpec, plan: ParallelismPlan) -> int:
    """GPUs across which one sequence's KV is partitioned."""
    if model.kv_layout.kind == "mla":
        head_shard = 1
    else:
        head_shard = min(plan.tp, model.kv_layout.num_kv_heads)
    return head_shard * plan.kv_degree * plan.pp


def resident_weight_bytes(model: ModelSpec, plan: ParallelismPlan,
                          attn_tp_sharded: bool = True) -> float:
    ffn_total = model.ffn_weight_bytes_total
    if model.is_moe:
        ffn_resident = ffn_total / (plan.ep * plan.pp)
    else:
        ffn_resident = ffn_total / (plan.tp * plan.pp)
    attn_shard = (plan.tp * plan.pp) if attn_tp_sharded else plan.pp
    attn_resident = model.attn_weight_bytes_total / attn_shard
    return ffn_resident + attn_resident + model.embed_weight_bytes


def kv_bytes_per_seq_per_gpu(model: ModelSpec, plan: ParallelismPlan,
                             workload: WorkloadSpec) -> float:
    per_token = kv_bytes_per_token_per_layer(model.kv_layout, model.kv_dtype_bytes)
    full_seq = workload.context_length * per_token * model.num_layers
    return full_seq / kv_shard_factor(model, plan)


def feasibility(model: ModelSpec, plan: ParallelismPlan, cluster: ClusterSpec,
                workload: WorkloadSpec, attn_tp_sharded: bool = True) -> MemoryReport:
    """Maximum concurrent sequences per replica under the HBM budget."""
    budget = hbm_budget(cluster)
    resident = resident_weight_bytes(model, plan, attn_tp_sharded)
    kv_seq = kv_bytes_per_seq_per_gpu(model, plan, workload)

    headroom = budget - resident
    if headroom < kv_seq or kv_seq <= 0:
        n_eff = 0
        if headroom <= 0:
            reason = (f"resident weights {resident / 1e9:.1f} GB exceed "
                      f"budget {budget / 1e9:.1f} GB")
        else:
            reason = (f"KV for one sequence ({kv_seq / 1e9:.2f} GB/GPU) exceeds "
                      f"headroom {headroom / 1e9:.2f} GB")
    else:
        n_eff = int(math.floor(headroom / kv_seq))
        reason = None

    return MemoryReport(
        budget_bytes=budget,
        resident_weight_bytes=resident,
        kv_bytes_per_seq_per_gpu=kv_seq,
        n_eff_max=n_eff,
        feasible=n_eff >= 1,
        batch_cluster=n_eff * plan.dp,
        reason=reason,
    )
