"""Exhaustive parallelization search: enumerate, evaluate, rank.

The space is small (a few hundred candidates at most), so the tuner evaluates
every plan and the enumeration doubles as its own correctness oracle; there
are deliberately no pruning heuristics.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional, Sequence

from . import latency_model, memory_model
from .calibration import CalibrationSpec
from .comm_model import CommConfig
from .memory_model import MemoryReport
from .reuse_model import expert_local_batch
from .specs import (
    ClusterSpec,
    KV_MODES,
    ModelSpec,
    ParallelismPlan,
    SpecError,
    WorkloadSpec,
    validate_plan,
)


@dataclass(frozen=True)
class SearchSpace:
    tp_choices: tuple = (1, 2, 4, 8)
    ep_choices: tuple = (1, 2, 4, 8)
    pp_choices: tuple = (1, 2, 4)
    kv_modes: tuple = ("none", "kvp", "cp")
    # None derives KV degrees from the cluster factorization.
    kv_degrees: Optional[tuple] = None
    allow_dp: bool = True
    max_kv_degree: Optional[int] = None

    def __post_init__(self) -> None:
        for name in ("tp_choices", "ep_choices", "pp_choices", "kv_modes"):
            if not getattr(self, name):
                raise SpecError(f"search.{name}: must be non-empty")
        for mode in self.kv_modes:
            if mode not in KV_MODES:
                raise SpecError(f"search.kv_modes: unknown mode {mode!r}")

    @staticmethod
    def from_calibration(cal: CalibrationSpec) -> "SearchSpace":
        return SearchSpace(
            tp_choices=cal.tp_choices,
            ep_choices=cal.ep_choices,
            pp_choices=cal.pp_choices,
            allow_dp=cal.allow_dp,
            max_kv_degree=cal.max_kv_degree,
        )


@dataclass(frozen=True)
class PlanReport:
    plan: ParallelismPlan
    memory: MemoryReport
    feasible: bool
    latency: Optional[latency_model.LatencyBreakdown] = None
    throughput: Optional[latency_model.ThroughputReport] = None
    # weight-reuse factors at the admitted batch, for this model alone
    reuse: Optional[dict] = None

    def to_dict(self) -> dict:
        return {
            "plan": self.plan.to_dict(),
            "plan_label": self.plan.label(),
            "memory": self.memory.to_dict(),
            "feasible": self.feasible,
            "latency": self.latency.to_dict() if self.latency else None,
            "throughput": self.throughput.to_dict() if self.throughput else None,
            "reuse": self.reuse,
        }


@dataclass(frozen=True)
class AutotuneResult:
    feasible: bool
    best: Optional[PlanReport]
    ranking: tuple

    def to_dict(self) -> dict:
        return {
            "feasible": self.feasible,
            "best": self.best.to_dict() if self.best else None,
            "ranking": [r.to_dict() for r in self.ranking],
        }


def _canonical_key(plan: ParallelismPlan) -> tuple:
    return (plan.tp, plan.ep, plan.pp, KV_MODES.index(plan.kv_mode),
            plan.kv_degree, plan.dp)


def enumerate_plans(space: SearchSpace, cluster: ClusterSpec) -> list[ParallelismPlan]:
    """All plans factorizing the cluster, in canonical ascending order."""
    gpus = cluster.num_gpus
    seen: set = set()
    plans: list[ParallelismPlan] = []

    for tp in space.tp_choices:
        for pp in space.pp_choices:
            if tp * pp > gpus or gpus % (tp * pp) != 0:
                continue
            residual = gpus // (tp * pp)
            for mode in space.kv_modes:
                if mode == "none":
                    degrees: Sequence[int] = (1,)
                elif space.kv_degrees is not None:
                    degrees = space.kv_degrees
                else:
                    degrees = tuple(d for d in range(2, residual + 1)
                                    if residual % d == 0)
                for degree in degrees:
                    if mode != "none" and degree < 2:
                        continue  # degenerate KV split duplicates kv_mode=none
                    if space.max_kv_degree is not None and degree > space.max_kv_degree:
                        continue
                    if residual % degree != 0:
                        continue
                    dp = residual // degree
                    if dp > 1 and not space.allow_dp:
                        continue
                    for ep in space.ep_choices:
                        if ep > tp * degree:
                            continue
                        key = (tp, ep, pp, mode, degree, dp)
                        if key in seen:
                            continue
                        seen.add(key)
                        plans.append(ParallelismPlan(tp=tp, ep=ep, pp=pp, kv_mode=mode,
                                                     kv_degree=degree, dp=dp))

    plans.sort(key=_canonical_key)
    if not plans:
        raise SpecError(
            f"enumerate_plans: no plan factorizes {gpus} GPUs from "
            f"tp={list(space.tp_choices)} pp={list(space.pp_choices)} "
            f"(allow_dp={space.allow_dp})"
        )
    return plans


def _admissible(model: ModelSpec, plan: ParallelismPlan) -> bool:
    if not model.is_moe:
        return plan.ep == 1
    return plan.ep <= model.num_experts


def evaluate_plan(model: ModelSpec, plan: ParallelismPlan, cluster: ClusterSpec,
                  workload: WorkloadSpec,
                  calibration: CalibrationSpec = CalibrationSpec()) -> PlanReport:
    """Feasibility, latency, and throughput for one concrete plan."""
    validate_plan(plan, cluster)
    memory = memory_model.feasibility(model, plan, cluster, workload,
                                      calibration.attn_weights_tp_sharded)
    if not memory.feasible:
        return PlanReport(plan=plan, memory=memory, feasible=False)

    latency = latency_model.token_latency(
        model, plan, memory.n_eff_max, WorkloadSpec(workload.context_length),
        cluster, CommConfig.from_calibration(calibration),
        calibration.attn_weights_tp_sharded)
    tput = latency_model.throughput(
        memory.batch_cluster, latency, cluster, plan,
        pp_bubble_fraction=calibration.pp_bubble_fraction)
    n = memory.n_eff_max
    reuse = {
        "batch_replica": n,
        "reuse_factor": (expert_local_batch(n, model.top_k, model.num_experts)
                         if model.is_moe else float(n)),
        "routing_factor": model.num_experts / model.top_k,
    }
    return PlanReport(plan=plan, memory=memory, feasible=True,
                      latency=latency, throughput=tput, reuse=reuse)


def _rank_key(report: PlanReport) -> tuple:
    # Highest throughput first; ties fall to lower latency, then fewer
    # parallel groups, then canonical plan order.
    plan = report.plan
    if not report.feasible:
        return (1, 0.0, 0.0, plan.tp * plan.ep * plan.kv_degree, _canonical_key(plan))
    return (0, -report.throughput.tokens_per_s_cluster, report.latency.t_token,
            plan.tp * plan.ep * plan.kv_degree, _canonical_key(plan))


def autotune(model: ModelSpec, cluster: ClusterSpec, workload: WorkloadSpec,
             space: Optional[SearchSpace] = None,
             calibration: CalibrationSpec = CalibrationSpec()) -> AutotuneResult:
    """Evaluate every admissible plan and rank by cluster throughput."""
    if space is None:
        space = SearchSpace.from_calibration(calibration)
    plans = [p for p in enumerate_plans(space, cluster) if _admissible(model, p)]
    if not plans:
        raise SpecError(
            f"autotune: no admissible plan for {model.name} "
            f"(ep choices {list(space.ep_choices)} vs E={model.num_experts})"
        )
    reports = [evaluate_plan(model, plan, cluster, workload, calibration)
               for plan in plans]
    reports.sort(key=_rank_key)
    feasible = [r for r in reports if r.feasible]
    return AutotuneResult(
        feasible=bool(feasible),
        best=feasible[0] if feasible else None,
        ranking=tuple(reports),
    )


def best_capacity_plan(model: ModelSpec, cluster: ClusterSpec, workload: WorkloadSpec,
                       calibration: CalibrationSpec = CalibrationSpec(),
                       space: Optional[SearchSpace] = None) -> PlanReport:
    """Single-replica plan admitting the largest batch (capacity comparisons).

    Restricted to pp=1/dp=1 so the reported batch measures one replica's KV
    headroom rather than replication; ties prefer fewer parallel groups.
    """
    if space is None:
        space = SearchSpace.from_calibration(calibration)
    space = replace(space, pp_choices=(1,), allow_dp=False, kv_modes=("none", "kvp"))
    plans = [p for p in enumerate_plans(space, cluster) if _admissible(model, p)]
    reports = [evaluate_plan(model, plan, cluster, workload, calibration)
               for plan in plans]

    def key(report: PlanReport) -> tuple:
        plan = report.plan
        return (0 if report.feasible else 1, -report.memory.batch_cluster,
                plan.tp * plan.ep * plan.kv_degree, _canonical_key(plan))

    reports.sort(key=key)
    return reports[0]
