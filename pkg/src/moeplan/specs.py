"""Domain types for models, hardware, workloads, and parallelism plans.

Every type is a frozen dataclass validated on construction, so instances can
be shared freely between concurrent evaluators.  Config ingestion goes through
``load_model_spec`` / ``load_hardware_spec``, which validate JSON documents and
report errors with full dotted field paths.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, fields, replace
from importlib import resources
from pathlib import Path
from typing import Any, Mapping, Optional

SCHEMA_VERSION = 1

FFN_KINDS = ("dense", "moe")
KV_KINDS = ("full", "gqa", "mqa", "mla")
KV_MODES = ("none", "kvp", "cp")


class SpecError(ValueError):
    """Raised when a config document or spec invariant is violated."""


# ---------------------------------------------------------------------------
# validation helpers


def _require(doc: Mapping[str, Any], key: str, path: str) -> Any:
    if key not in doc:
        raise SpecError(f"{path}.{key}: missing required field")
    return doc[key]


def _as_int(value: Any, path: str, minimum: int = 0) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        if isinstance(value, float) and value.is_integer():
            value = int(value)
        else:
            raise SpecError(f"{path}: expected an integer, got {value!r}")
    if value < minimum:
        raise SpecError(f"{path}: must be >= {minimum}, got {value}")
    return value


def _as_number(value: Any, path: str, minimum: Optional[float] = None,
               maximum: Optional[float] = None) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise SpecError(f"{path}: expected a number, got {value!r}")
    value = float(value)
    if minimum is not None and value < minimum:
        raise SpecError(f"{path}: must be >= {minimum}, got {value}")
    if maximum is not None and value > maximum:
        raise SpecError(f"{path}: must be <= {maximum}, got {value}")
    return value


def _as_choice(value: Any, path: str, choices: tuple) -> str:
    if value not in choices:
        raise SpecError(f"{path}: expected one of {list(choices)}, got {value!r}")
    return value


def _check_schema_version(doc: Mapping[str, Any], path: str) -> None:
    version = _require(doc, "schema_version", path)
    if version != SCHEMA_VERSION:
        raise SpecError(
            f"{path}.schema_version: expected {SCHEMA_VERSION}, got {version!r}"
        )


# ---------------------------------------------------------------------------
# KV layouts


@dataclass(frozen=True)
class KvLayout:
    """Per-layer KV cache layout: full MHA, GQA, MQA, or MLA latent compression."""

    kind: str
    num_kv_heads: int = 0
    kv_head_dim: int = 0
    mla_latent_dim: int = 0
    mla_rope_dim: int = 0

    def __post_init__(self) -> None:
        _as_choice(self.kind, "kv_layout.kind", KV_KINDS)
        if self.kind == "mla":
            if self.mla_latent_dim <= 0:
                raise SpecError("kv_layout.mla_latent_dim: must be positive for mla")
            if self.mla_rope_dim < 0:
                raise SpecError("kv_layout.mla_rope_dim: must be >= 0")
        else:
            if self.num_kv_heads <= 0:
                raise SpecError(f"kv_layout.num_kv_heads: must be positive for {self.kind}")
            if self.kv_head_dim <= 0:
                raise SpecError(f"kv_layout.kv_head_dim: must be positive for {self.kind}")
            if self.kind == "mqa" and self.num_kv_heads != 1:
                raise SpecError("kv_layout.num_kv_heads: mqa requires exactly 1 kv head")

    def to_dict(self) -> dict:
        out: dict[str, Any] = {"kind": self.kind}
        if self.kind == "mla":
            out["mla_latent_dim"] = self.mla_latent_dim
            out["mla_rope_dim"] = self.mla_rope_dim
        else:
            out["num_kv_heads"] = self.num_kv_heads
            out["kv_head_dim"] = self.kv_head_dim
        return out

    @staticmethod
    def from_dict(doc: Mapping[str, Any], path: str = "kv_layout") -> "KvLayout":
        kind = _as_choice(_require(doc, "kind", path), f"{path}.kind", KV_KINDS)
        if kind == "mla":
            return KvLayout(
                kind=kind,
                mla_latent_dim=_as_int(_require(doc, "mla_latent_dim", path),
                                       f"{path}.mla_latent_dim", 1),
                mla_rope_dim=_as_int(doc.get("mla_rope_dim", 0),
                                     f"{path}.mla_rope_dim", 0),
            )
        return KvLayout(
            kind=kind,
            num_kv_heads=_as_int(_require(doc, "num_kv_heads", path),
                                 f"{path}.num_kv_heads", 1),
            kv_head_dim=_as_int(_require(doc, "kv_head_dim", path),
                                f"{path}.kv_head_dim", 1),
        )


# ---------------------------------------------------------------------------
# model spec


@dataclass(frozen=True)
class ModelSpec:
    """Architecture description; dense models are the degenerate MoE E=k=1."""

    name: str
    num_layers: int
    d_model: int
    num_heads: int
    head_dim: int
    ffn_kind: str
    num_experts: int
    top_k: int
    # Per-layer averages: models with heterogeneous layers (e.g. a few dense
    # FFN layers inside an MoE stack) fold them into the mean, so these may be
    # non-integral.
    ffn_weight_bytes_per_layer: float
    attn_weight_bytes_per_layer: float
    total_params: int
    active_params: int
    weight_dtype_bytes: float
    kv_dtype_bytes: float
    kv_layout: KvLayout
    # Matrices per FFN block (3 for gated SwiGLU-family FFNs, 2 for classic
    # two-matrix FFNs); used when synthesizing dense baselines.
    ffn_matrices: int = 3
    sources: tuple = ()
    comment: str = ""

    def __post_init__(self) -> None:
        _as_choice(self.ffn_kind, "model.ffn_kind", FFN_KINDS)
        if self.num_layers <= 0:
            raise SpecError("model.num_layers: must be positive")
        if not (1 <= self.top_k <= self.num_experts):
            raise SpecError(
                f"model.top_k: requires 1 <= k <= E, got k={self.top_k} E={self.num_experts}"
            )
        if self.ffn_kind == "dense" and (self.num_experts != 1 or self.top_k != 1):
            raise SpecError("model.num_experts: dense models require E = k = 1")
        if self.ffn_weight_bytes_per_layer <= 0:
            raise SpecError("model.ffn_weight_bytes_per_layer: must be positive")
        if self.active_params > self.total_params:
            raise SpecError("model.active_params: must not exceed total_params")
        if self.ffn_kind == "dense" and self.active_params != self.total_params:
            raise SpecError("model.active_params: dense models activate all parameters")
        if self.ffn_kind == "moe" and self.active_params == self.total_params:
            raise SpecError("model.active_params: moe models must activate a strict subset")
        if self.kv_layout.kind == "full" and self.kv_layout.num_kv_heads != self.num_heads:
            raise SpecError(
                "kv_layout.num_kv_heads: full layout requires one kv head per query head"
            )
        if self.embed_weight_bytes < 0:
            raise SpecError(
                "model.total_params: smaller than the sum of per-layer weight bytes"
            )

    # -- derived byte totals (weights at weight_dtype_bytes) --

    @property
    def is_moe(self) -> bool:
        return self.ffn_kind == "moe"

    @property
    def weight_bytes_total(self) -> float:
        return self.total_params * self.weight_dtype_bytes

    @property
    def ffn_weight_bytes_total(self) -> float:
        return self.ffn_weight_bytes_per_layer * self.num_layers

    @property
    def attn_weight_bytes_total(self) -> float:
        return self.attn_weight_bytes_per_layer * self.num_layers

    @property
    def embed_weight_bytes(self) -> float:
        return self.weight_bytes_total - self.ffn_weight_bytes_total - self.attn_weight_bytes_total

    @property
    def active_ffn_weight_bytes(self) -> float:
        """FFN bytes activated per token across all layers (k experts per layer)."""
        return (self.active_params * self.weight_dtype_bytes
                - self.attn_weight_bytes_total - self.embed_weight_bytes)

    @property
    def sparsity(self) -> float:
        return self.top_k / self.num_experts

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "name": self.name,
            "num_layers": self.num_layers,
            "d_model": self.d_model,
            "num_heads": self.num_heads,
            "head_dim": self.head_dim,
            "ffn_kind": self.ffn_kind,
            "num_experts": self.num_experts,
            "top_k": self.top_k,
            "ffn_weight_bytes_per_layer": self.ffn_weight_bytes_per_layer,
            "attn_weight_bytes_per_layer": self.attn_weight_bytes_per_layer,
            "total_params": self.total_params,
            "active_params": self.active_params,
            "weight_dtype_bytes": self.weight_dtype_bytes,
            "kv_dtype_bytes": self.kv_dtype_bytes,
            "ffn_matrices": self.ffn_matrices,
            "kv_layout": self.kv_layout.to_dict(),
            "sources": list(self.sources),
            "comment": self.comment,
        }

    @staticmethod
    def from_dict(doc: Mapping[str, Any], path: str = "model") -> "ModelSpec":
        _check_schema_version(doc, path)
        sources = doc.get("sources", [])
        if not isinstance(sources, (list, tuple)):
            raise SpecError(f"{path}.sources: expected a list of URLs")
        return ModelSpec(
            name=str(_require(doc, "name", path)),
            num_layers=_as_int(_require(doc, "num_layers", path), f"{path}.num_layers", 1),
            d_model=_as_int(_require(doc, "d_model", path), f"{path}.d_model", 1),
            num_heads=_as_int(_require(doc, "num_heads", path), f"{path}.num_heads", 1),
            head_dim=_as_int(_require(doc, "head_dim", path), f"{path}.head_dim", 1),
            ffn_kind=_as_choice(_require(doc, "ffn_kind", path), f"{path}.ffn_kind", FFN_KINDS),
            num_experts=_as_int(_require(doc, "num_experts", path), f"{path}.num_experts", 1),
            top_k=_as_int(_require(doc, "top_k", path), f"{path}.top_k", 1),
            ffn_weight_bytes_per_layer=_as_number(
                _require(doc, "ffn_weight_bytes_per_layer", path),
                f"{path}.ffn_weight_bytes_per_layer", minimum=1.0),
            attn_weight_bytes_per_layer=_as_number(
                _require(doc, "attn_weight_bytes_per_layer", path),
                f"{path}.attn_weight_bytes_per_layer", minimum=0.0),
            total_params=_as_int(_require(doc, "total_params", path), f"{path}.total_params", 1),
            active_params=_as_int(_require(doc, "active_params", path), f"{path}.active_params", 1),
            weight_dtype_bytes=_as_number(_require(doc, "weight_dtype_bytes", path),
                                          f"{path}.weight_dtype_bytes", minimum=0.25),
            kv_dtype_bytes=_as_number(_require(doc, "kv_dtype_bytes", path),
                                      f"{path}.kv_dtype_bytes", minimum=0.25),
            ffn_matrices=_as_int(doc.get("ffn_matrices", 3), f"{path}.ffn_matrices", 1),
            kv_layout=KvLayout.from_dict(_require(doc, "kv_layout", path), f"{path}.kv_layout"),
            sources=tuple(str(u) for u in sources),
            comment=str(doc.get("comment", "")),
        )


# ---------------------------------------------------------------------------
# hardware / cluster


@dataclass(frozen=True)
class HardwareSpec:
    """Single-accelerator capability plus the two-tier interconnect."""

    name: str
    hbm_capacity_bytes: float
    hbm_bandwidth_bytes_per_s: float
    flops_by_dtype: Mapping[str, float]
    intra_node_bw_bytes_per_s: float
    inter_node_bw_bytes_per_s: float
    island_capacity: int
    collective_startup_latency_s: float

    def __post_init__(self) -> None:
        for name in ("hbm_capacity_bytes", "hbm_bandwidth_bytes_per_s",
                     "intra_node_bw_bytes_per_s", "inter_node_bw_bytes_per_s"):
            if getattr(self, name) <= 0:
                raise SpecError(f"hardware.{name}: must be positive")
        if self.island_capacity < 1:
            raise SpecError("hardware.island_capacity: must be >= 1")
        if self.collective_startup_latency_s < 0:
            raise SpecError("hardware.collective_startup_latency_s: must be >= 0")
        if not self.flops_by_dtype:
            raise SpecError("hardware.flops_by_dtype: must name at least one dtype")
        for dtype, rate in self.flops_by_dtype.items():
            if rate <= 0:
                raise SpecError(f"hardware.flops_by_dtype.{dtype}: must be positive")
        object.__setattr__(self, "flops_by_dtype", dict(self.flops_by_dtype))

    def flops(self, dtype: str) -> float:
        if dtype not in self.flops_by_dtype:
            raise SpecError(f"hardware.flops_by_dtype.{dtype}: dtype not rated")
        return self.flops_by_dtype[dtype]

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "name": self.name,
            "hbm_capacity_bytes": self.hbm_capacity_bytes,
            "hbm_bandwidth_bytes_per_s": self.hbm_bandwidth_bytes_per_s,
            "flops_by_dtype": dict(self.flops_by_dtype),
            "intra_node_bw_bytes_per_s": self.intra_node_bw_bytes_per_s,
            "inter_node_bw_bytes_per_s": self.inter_node_bw_bytes_per_s,
            "island_capacity": self.island_capacity,
            "collective_startup_latency_s": self.collective_startup_latency_s,
        }

    @staticmethod
    def from_dict(doc: Mapping[str, Any], path: str = "hardware") -> "HardwareSpec":
        _check_schema_version(doc, path)
        flops_doc = _require(doc, "flops_by_dtype", path)
        if not isinstance(flops_doc, Mapping):
            raise SpecError(f"{path}.flops_by_dtype: expected a dtype -> FLOP/s mapping")
        flops = {str(k): _as_number(v, f"{path}.flops_by_dtype.{k}", minimum=1.0)
                 for k, v in flops_doc.items()}
        return HardwareSpec(
            name=str(_require(doc, "name", path)),
            hbm_capacity_bytes=_as_number(_require(doc, "hbm_capacity_bytes", path),
                                          f"{path}.hbm_capacity_bytes", minimum=1.0),
            hbm_bandwidth_bytes_per_s=_as_number(
                _require(doc, "hbm_bandwidth_bytes_per_s", path),
                f"{path}.hbm_bandwidth_bytes_per_s", minimum=1.0),
            flops_by_dtype=flops,
            intra_node_bw_bytes_per_s=_as_number(
                _require(doc, "intra_node_bw_bytes_per_s", path),
                f"{path}.intra_node_bw_bytes_per_s", minimum=1.0),
            inter_node_bw_bytes_per_s=_as_number(
                _require(doc, "inter_node_bw_bytes_per_s", path),
                f"{path}.inter_node_bw_bytes_per_s", minimum=1.0),
            island_capacity=_as_int(_require(doc, "island_capacity", path),
                                    f"{path}.island_capacity", 1),
            collective_startup_latency_s=_as_number(
                doc.get("collective_startup_latency_s", 1e-6),
                f"{path}.collective_startup_latency_s", minimum=0.0),
        )


@dataclass(frozen=True)
class ClusterSpec:
    """Hardware plus GPU count and the per-GPU budget deductions."""

    hardware: HardwareSpec
    num_gpus: int
    reserve_bytes: float = 10e9
    misc_bytes: float = 6e9
    safety_fraction: float = 0.05

    def __post_init__(self) -> None:
        if self.num_gpus < 1:
            raise SpecError("cluster.num_gpus: must be >= 1")
        if not (0.0 <= self.safety_fraction < 1.0):
            raise SpecError("cluster.safety_fraction: must lie in [0, 1)")
        if self.reserve_bytes < 0 or self.misc_bytes < 0:
            raise SpecError("cluster.reserve_bytes/misc_bytes: must be >= 0")

    def to_dict(self) -> dict:
        return {
            "hardware": self.hardware.to_dict(),
            "num_gpus": self.num_gpus,
            "reserve_bytes": self.reserve_bytes,
            "misc_bytes": self.misc_bytes,
            "safety_fraction": self.safety_fraction,
        }

    @staticmethod
    def from_dict(doc: Mapping[str, Any], path: str = "cluster") -> "ClusterSpec":
        return ClusterSpec(
            hardware=HardwareSpec.from_dict(_require(doc, "hardware", path), f"{path}.hardware"),
            num_gpus=_as_int(_require(doc, "num_gpus", path), f"{path}.num_gpus", 1),
            reserve_bytes=_as_number(doc.get("reserve_bytes", 10e9),
                                     f"{path}.reserve_bytes", minimum=0.0),
            misc_bytes=_as_number(doc.get("misc_bytes", 6e9),
                                  f"{path}.misc_bytes", minimum=0.0),
            safety_fraction=_as_number(doc.get("safety_fraction", 0.05),
                                       f"{path}.safety_fraction", minimum=0.0, maximum=0.999),
        )


# ---------------------------------------------------------------------------
# parallelism plan / workload


@dataclass(frozen=True)
class ParallelismPlan:
    """A (TP, EP, PP, KV-mode/degree, DP) partition of the cluster.

    EP overlays the replica's TP x KV ranks rather than multiplying the GPU
    count, so tp * pp * kv_degree * dp must equal the cluster size exactly.
    """

    tp: int
    ep: int = 1
    pp: int = 1
    kv_mode: str = "none"
    kv_degree: int = 1
    dp: int = 1

    def __post_init__(self) -> None:
        _as_choice(self.kv_mode, "plan.kv_mode", KV_MODES)
        for name in ("tp", "ep", "pp", "kv_degree", "dp"):
            if getattr(self, name) < 1:
                raise SpecError(f"plan.{name}: must be >= 1")
        if self.kv_mode == "none" and self.kv_degree != 1:
            raise SpecError("plan.kv_degree: must be 1 when kv_mode is none")
        if self.ep > self.tp * self.kv_degree:
            raise SpecError(
                f"plan.ep: expert group must fit inside the replica "
                f"(ep={self.ep} > tp*kv_degree={self.tp * self.kv_degree})"
            )

    @property
    def replica_gpus(self) -> int:
        return self.tp * self.pp * self.kv_degree

    @property
    def total_gpus(self) -> int:
        return self.replica_gpus * self.dp

    def label(self) -> str:
        parts = [f"tp{self.tp}", f"ep{self.ep}", f"pp{self.pp}"]
        if self.kv_mode != "none":
            parts.append(f"{self.kv_mode}{self.kv_degree}")
        if self.dp > 1:
            parts.append(f"dp{self.dp}")
        return "-".join(parts)

    def to_dict(self) -> dict:
        return {
            "tp": self.tp, "ep": self.ep, "pp": self.pp,
            "kv_mode": self.kv_mode, "kv_degree": self.kv_degree, "dp": self.dp,
        }

    @staticmethod
    def from_dict(doc: Mapping[str, Any], path: str = "plan") -> "ParallelismPlan":
        return ParallelismPlan(
            tp=_as_int(_require(doc, "tp", path), f"{path}.tp", 1),
            ep=_as_int(doc.get("ep", 1), f"{path}.ep", 1),
            pp=_as_int(doc.get("pp", 1), f"{path}.pp", 1),
            kv_mode=_as_choice(doc.get("kv_mode", "none"), f"{path}.kv_mode", KV_MODES),
            kv_degree=_as_int(doc.get("kv_degree", 1), f"{path}.kv_degree", 1),
            dp=_as_int(doc.get("dp", 1), f"{path}.dp", 1),
        )


def validate_plan(plan: ParallelismPlan, cluster: ClusterSpec) -> ParallelismPlan:
    """Check a plan against a cluster; returns the plan or raises SpecError."""
    if plan.total_gpus != cluster.num_gpus:
        raise SpecError(
            f"plan: tp*pp*kv_degree*dp = {plan.tp}*{plan.pp}*{plan.kv_degree}*{plan.dp}"
            f" = {plan.total_gpus}, cluster has {cluster.num_gpus} GPUs"
        )
    return plan


@dataclass(frozen=True)
class WorkloadSpec:
    """Decode-stage workload: context length per sequence."""

    context_length: int
    decode_only: bool = True

    def __post_init__(self) -> None:
        if self.context_length < 1:
            raise SpecError("workload.context_length: must be >= 1")
        if not self.decode_only:
            raise SpecError("workload.decode_only: only decode-stage modeling is supported")


# ---------------------------------------------------------------------------
# config file plumbing


def _load_json(path: Path | str, what: str) -> dict:
    path = Path(path)
    if not path.exists():
        raise SpecError(f"{what}: file not found: {path}")
    try:
        with path.open("r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise SpecError(f"{what}: invalid JSON in {path}: {exc}") from exc
    if not isinstance(doc, dict):
        raise SpecError(f"{what}: expected a JSON object in {path}")
    return doc


def load_model_spec(path: Path | str) -> ModelSpec:
    return ModelSpec.from_dict(_load_json(path, "model"), "model")


def load_hardware_spec(path: Path | str) -> HardwareSpec:
    return HardwareSpec.from_dict(_load_json(path, "hardware"), "hardware")


def write_model_spec(spec: ModelSpec, path: Path | str) -> None:
    Path(path).write_text(json.dumps(spec.to_dict(), indent=2) + "\n", encoding="utf-8")


def config_dir() -> Path:
    return Path(resources.files("moeplan").joinpath("configs"))  # type: ignore[arg-type]


def builtin_model_names() -> list[str]:
    return sorted(p.stem for p in (config_dir() / "models").glob("*.json"))


def load_builtin_model(name: str) -> ModelSpec:
    path = config_dir() / "models" / f"{name}.json"
    if not path.exists():
        raise SpecError(
            f"model: no built-in config named {name!r}; "
            f"available: {', '.join(builtin_model_names())}"
        )
    return load_model_spec(path)


def load_builtin_hardware(name: str = "reference") -> HardwareSpec:
    path = config_dir() / "hardware" / f"{name}.json"
    if not path.exists():
        raise SpecError(f"hardware: no built-in config named {name!r}")
    return load_hardware_spec(path)
