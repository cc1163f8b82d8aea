"""Collective communication costs, fabric mapping, and phase-aware overlap.

Ring-style alpha-beta costs for all-reduce and all-to-all, a two-tier fabric
keyed by island capacity, and an overlap model that hides each phase's
collectives inside a fraction of that phase's compute+HBM window.  Whatever
does not fit is exposed and adds directly to per-token latency.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Optional

from .calibration import CalibrationSpec
from .specs import HardwareSpec, ModelSpec, ParallelismPlan, SpecError, WorkloadSpec

PHASES = ("attention", "projection", "ffn")

FAMILY_TP_ALLREDUCE = "tp_allreduce"
FAMILY_EP_ALL_TO_ALL = "ep_all_to_all"
FAMILY_KVP = "kvp_collective"
FAMILY_CP_RING = "cp_ring"
FAMILY_LAYOUT = "layout_transition"

# Activations move between ranks at BF16 regardless of weight storage dtype.
ACTIVATION_BYTES = 2.0


@dataclass(frozen=True)
class CommConfig:
    alpha_intra_s: float = 1e-6
    alpha_inter_s: float = 3e-6
    overlap_attention: float = 0.8
    overlap_projection: float = 0.8
    overlap_ffn: float = 0.5
    cp_ring_tail_fraction: float = 0.25

    def __post_init__(self) -> None:
        for name in ("overlap_attention", "overlap_projection", "overlap_ffn",
                     "cp_ring_tail_fraction"):
            if not (0.0 <= getattr(self, name) <= 1.0):
                raise SpecError(f"comm.{name}: must lie in [0, 1]")
        if self.alpha_intra_s < 0 or self.alpha_inter_s < 0:
            raise SpecError("comm.alpha: must be >= 0")

    def alpha(self, fabric: str) -> float:
        return self.alpha_intra_s if fabric == "intra" else self.alpha_inter_s

    def overlap(self, phase: str) -> float:
        return {
            "attention": self.overlap_attention,
            "projection": self.overlap_projection,
            "ffn": self.overlap_ffn,
        }[phase]

    @staticmethod
    def from_calibration(cal: CalibrationSpec) -> "CommConfig":
        return CommConfig(
            alpha_intra_s=cal.alpha_intra_s,
            alpha_inter_s=cal.alpha_inter_s,
            overlap_attention=cal.overlap_attention,
            overlap_projection=cal.overlap_projection,
            overlap_ffn=cal.overlap_ffn,
            cp_ring_tail_fraction=cal.cp_ring_tail_fraction,
        )


@dataclass(frozen=True)
class CollectiveEvent:
    family: str
    bytes_per_rank: float
    group_size: int
    fabric: str
    phase: str
    # Occurrences per decode step on one pipeline stage (layers on the stage,
    # possibly fractional when pp does not divide the layer count).
    repeats: float = 1.0

    def __post_init__(self) -> None:
        if self.group_size < 1:
            raise SpecError("collective.group_size: must be >= 1")
        if self.bytes_per_rank < 0:
            raise SpecError("collective.bytes_per_rank: must be >= 0")
        if self.phase not in PHASES:
            raise SpecError(f"collective.phase: expected one of {PHASES}")

    def to_dict(self) -> dict:
        return {
            "family": self.family,
            "bytes_per_rank": self.bytes_per_rank,
            "group_size": self.group_size,
            "fabric": self.fabric,
            "phase": self.phase,
            "repeats": self.repeats,
        }


def ring_allreduce_time(p: int, n_bytes: float, alpha: float, beta: float) -> float:
    """Ring all-reduce: 2(p-1) latency steps, 2n(p-1)/p bytes on the wire."""
    if p < 1:
        raise SpecError("ring_allreduce_time: p must be >= 1")
    if p == 1:
        return 0.0
    return 2.0 * (p - 1) * alpha + 2.0 * n_bytes * (p - 1) / (p * beta)


def all_to_all_time(p: int, n_bytes_per_rank: float, alpha: float, beta: float) -> float:
    """Pairwise-exchange all-to-all: (p-1) steps, each moving n/p bytes."""
    if p < 1:
        raise SpecError("all_to_all_time: p must be >= 1")
    if p == 1:
        return 0.0
    return (p - 1) * alpha + n_bytes_per_rank * (p - 1) / (p * beta)


def map_fabric(group_size: int, island_capacity: int) -> str:
    """Groups fitting inside one island use the node-local fabric."""
    if group_size < 1:
        raise SpecError("map_fabric: group_size must be >= 1")
    return "intra" if group_size <= island_capacity else "inter"


def event_time(event: CollectiveEvent, cfg: CommConfig, hardware: HardwareSpec) -> float:
    """Cost of one occurrence of the event."""
    beta = (hardware.intra_node_bw_bytes_per_s if event.fabric == "intra"
            else hardware.inter_node_bw_bytes_per_s)
    alpha = cfg.alpha(event.fabric)
    if event.family == FAMILY_TP_ALLREDUCE or event.family == FAMILY_KVP:
        return ring_allreduce_time(event.group_size, event.bytes_per_rank, alpha, beta)
    return all_to_all_time(event.group_size, event.bytes_per_rank, alpha, beta)


def build_collective_schedule(model: ModelSpec, plan: ParallelismPlan,
                              batch_replica: float, workload: WorkloadSpec,
                              hardware: HardwareSpec) -> list[CollectiveEvent]:
    """Per-step collectives for one pipeline stage of one replica.

    Bytes scale with the replica's token count per step (= concurrent
    sequences), which is what ties short-context comm cost to the massive
    admissible batches.
    """
    layers_per_stage = model.num_layers / plan.pp
    n = max(batch_replica, 0.0)
    island = hardware.island_capacity
    events: list[CollectiveEvent] = []

    if plan.tp > 1:
        # Partial-sum reduction after the attention projection and after the FFN.
        bytes_ar = n * model.d_model * ACTIVATION_BYTES
        fabric = map_fabric(plan.tp, island)
        for phase in ("projection", "ffn"):
            events.append(CollectiveEvent(FAMILY_TP_ALLREDUCE, bytes_ar, plan.tp,
                                          fabric, phase, layers_per_stage))

    if model.is_moe and plan.ep > 1:
        # Token dispatch to experts and the return combine.
        bytes_a2a = n * model.top_k * model.d_model * ACTIVATION_BYTES / plan.ep
        fabric = map_fabric(plan.ep, island)
        for _ in range(2):  # dispatch, combine
            events.append(CollectiveEvent(FAMILY_EP_ALL_TO_ALL, bytes_a2a, plan.ep,
                                          fabric, "ffn", layers_per_stage))

    if plan.kv_mode != "none" and plan.kv_degree > 1:
        # Partial attention results reduced across KV shards, carried
        # per-token as num_heads * head_dim activations split over TP.
        bytes_kv = n * model.num_heads * model.head_dim * ACTIVATION_BYTES / plan.tp
        fabric = map_fabric(plan.kv_degree, island)
        family = FAMILY_KVP if plan.kv_mode == "kvp" else FAMILY_CP_RING
        events.append(CollectiveEvent(family, bytes_kv, plan.kv_degree,
                                      fabric, "attention", layers_per_stage))
        # Re-partitioning between the attention and FFN layouts.
        bytes_layout = n * model.d_model * ACTIVATION_BYTES
        events.append(CollectiveEvent(FAMILY_LAYOUT, bytes_layout, plan.kv_degree,
                                      fabric, "attention", layers_per_stage))

    return events


@dataclass(frozen=True)
class CommReport:
    total_s: float
    exposed_s: float
    by_phase: dict
    by_family: dict
    events: tuple = ()

    def to_dict(self) -> dict:
        return {
            "total_s": self.total_s,
            "exposed_s": self.exposed_s,
            "by_phase": self.by_phase,
            "by_family": self.by_family,
            "events": [e.to_dict() for e in self.events],
        }


def exposed_comm(schedule: list[CollectiveEvent], windows: Mapping[str, float],
                 cfg: CommConfig, hardware: HardwareSpec) -> CommReport:
    """Total and exposed communication time against per-phase overlap windows.

    CP ring collectives charge their tail fraction as unconditionally exposed;
    the remainder competes for the phase window like everything else.
    """
    for phase, window in windows.items():
        if window < 0:
            raise SpecError(f"exposed_comm: window for {phase} must be >= 0")

    pool = {phase: 0.0 for phase in PHASES}
    unconditional = 0.0
    by_family: dict[str, float] = {}
    total = 0.0
    for event in schedule:
        cost = event_time(event, cfg, hardware) * event.repeats
        total += cost
        by_family[event.family] = by_family.get(event.family, 0.0) + cost
        if event.family == FAMILY_CP_RING:
            tail = cfg.cp_ring_tail_fraction * cost
            unconditional += tail
            pool[event.phase] += cost - tail
        else:
            pool[event.phase] += cost

    exposed = unconditional
    by_phase = {}
    for phase in PHASES:
        window = windows.get(phase, 0.0)
        hidden_budget = cfg.overlap(phase) * window
        phase_exposed = max(0.0, pool[phase] - hidden_budget)
        exposed += phase_exposed
        by_phase[phase] = {
            "cost_s": pool[phase],
            "window_s": window,
            "exposed_s": phase_exposed,
        }
    if unconditional > 0:
        by_phase["cp_tail"] = {"cost_s": unconditional, "window_s": 0.0,
                               "exposed_s": unconditional}

    return CommReport(
        total_s=total,
        exposed_s=exposed,
        by_phase=by_phase,
        by_family=by_family,
        events=tuple(schedule),
    )
