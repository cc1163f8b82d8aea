"""FFN weight-reuse factors and the routing x capacity gap factorization.

R counts tokens amortizing one HBM fetch of a weight.  Dense execution reuses
each FFN weight across the whole batch (R_dense = B); routing splits an MoE
batch across experts so each expert weight is reused only by its expected
sub-batch (R_moe = B * k / E).  The dense/MoE reuse ratio factorizes exactly
into a routing term E/k and a capacity term B_dense/B_moe.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .specs import ModelSpec, SpecError


@dataclass(frozen=True)
class ReuseReport:
    batch_moe: float
    batch_dense: float
    reuse_moe: float
    reuse_dense: float
    routing_factor: float          # E/k
    capacity_factor: Optional[float]  # B_dense / B_moe
    total_gap: Optional[float]     # R_dense / R_moe
    # Expected tokens per expert dipped below one: the regime where routing
    # stops fragmenting reuse and sparsity can start paying off.
    subunit_expert_batch: bool = False
    infeasible_moe: bool = False

    def to_dict(self) -> dict:
        return {
            "batch_moe": self.batch_moe,
            "batch_dense": self.batch_dense,
            "reuse_moe": self.reuse_moe,
            "reuse_dense": self.reuse_dense,
            "routing_factor": self.routing_factor,
            "capacity_factor": self.capacity_factor,
            "total_gap": self.total_gap,
            "subunit_expert_batch": self.subunit_expert_batch,
            "infeasible_moe": self.infeasible_moe,
        }


def expert_local_batch(batch: float, top_k: int, num_experts: int) -> float:
    """Expected tokens per expert, B*k/E; fractional values reflect average routing."""
    if batch < 0:
        raise SpecError("expert_local_batch: batch must be >= 0")
    if top_k < 1 or num_experts < top_k:
        raise SpecError(
            f"expert_local_batch: requires 1 <= k <= E, got k={top_k} E={num_experts}"
        )
    return batch * top_k / num_experts


def reuse_gap(model_moe: ModelSpec, model_dense: ModelSpec,
              batch_moe: float, batch_dense: float) -> ReuseReport:
    """Reuse factors for a feasibility-matched MoE/dense pair."""
    if model_dense.is_moe:
        raise SpecError("reuse_gap: model_dense must be dense")
    routing = model_moe.num_experts / model_moe.top_k

    if batch_moe <= 0:
        # MoE could not be placed at all; the gap is undefined, not infinite.
        return ReuseReport(
            batch_moe=0.0,
            batch_dense=batch_dense,
            reuse_moe=0.0,
            reuse_dense=batch_dense,
            routing_factor=routing,
            capacity_factor=None,
            total_gap=None,
            infeasible_moe=True,
        )

    reuse_moe = expert_local_batch(batch_moe, model_moe.top_k, model_moe.num_experts)
    reuse_dense = float(batch_dense)
    capacity = batch_dense / batch_moe
    return ReuseReport(
        batch_moe=float(batch_moe),
        batch_dense=float(batch_dense),
        reuse_moe=reuse_moe,
        reuse_dense=reuse_dense,
        routing_factor=routing,
        capacity_factor=capacity,
        total_gap=routing * capacity,
        subunit_expert_batch=reuse_moe < 1.0,
    )
