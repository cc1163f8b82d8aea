"""Decode-stage cost model for MoE vs quality-matched dense serving."""

__version__ = "0.1.0"

from .specs import (  # noqa: E402
    ClusterSpec,
    HardwareSpec,
    KvLayout,
    ModelSpec,
    ParallelismPlan,
    SpecError,
    WorkloadSpec,
    builtin_model_names,
    load_builtin_hardware,
    load_builtin_model,
    load_hardware_spec,
    load_model_spec,
    validate_plan,
    write_model_spec,
)
from .calibration import (
    CalibrationSpec,
    load_calibration,
    load_default_calibration,
    make_cluster,
)
from .qs_core import (
    ScalingLawParams,
    qs_report,
    qs_verdict,
    quality_multiplier,
    sparsity,
    synthesize_dense_baseline,
)
from .memory_model import (
    InfeasibleHardwareError,
    MemoryReport,
    feasibility,
    hbm_budget,
)
from .reuse_model import ReuseReport, expert_local_batch, reuse_gap
from .comm_model import CollectiveEvent, CommConfig, CommReport
from .latency_model import LatencyBreakdown, ThroughputReport, token_latency, throughput
from .autotuner import (
    AutotuneResult,
    PlanReport,
    SearchSpace,
    autotune,
    best_capacity_plan,
    enumerate_plans,
    evaluate_plan,
)
from .reporting import (
    AttributionReport,
    PairRow,
    SweepResult,
    attribution_report,
    cli_main,
    compare_report,
    context_sweep,
    paired_comparison,
)

__all__ = [
    "__version__",
    "AttributionReport",
    "AutotuneResult",
    "CalibrationSpec",
    "ClusterSpec",
    "CollectiveEvent",
    "CommConfig",
    "CommReport",
    "HardwareSpec",
    "InfeasibleHardwareError",
    "KvLayout",
    "LatencyBreakdown",
    "MemoryReport",
    "ModelSpec",
    "PairRow",
    "ParallelismPlan",
    "PlanReport",
    "ReuseReport",
    "ScalingLawParams",
    "SearchSpace",
    "SpecError",
    "SweepResult",
    "ThroughputReport",
    "WorkloadSpec",
    "attribution_report",
    "autotune",
    "best_capacity_plan",
    "builtin_model_names",
    "cli_main",
    "compare_report",
    "context_sweep",
    "enumerate_plans",
    "evaluate_plan",
    "expert_local_batch",
    "feasibility",
    "hbm_budget",
    "load_builtin_hardware",
    "load_builtin_model",
    "load_calibration",
    "load_default_calibration",
    "load_hardware_spec",
    "load_model_spec",
    "make_cluster",
    "paired_comparison",
    "qs_report",
    "qs_verdict",
    "quality_multiplier",
    "reuse_gap",
    "sparsity",
    "synthesize_dense_baseline",
    "throughput",
    "token_latency",
    "validate_plan",
    "write_model_spec",
]
