"""Calibration knobs: budget deductions, collective constants, overlap, search defaults.

The cost model separates structural quantities (exact arithmetic over the
architecture) from calibrated ones.  Everything calibrated lives here, in one
versioned file, so that regenerating any table is a pure function of
(model configs, hardware config, calibration file).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Any, Mapping, Optional

from .specs import (
    ClusterSpec,
    HardwareSpec,
    SpecError,
    _as_int,
    _as_number,
    _check_schema_version,
    _require,
    config_dir,
)


@dataclass(frozen=True)
class CalibrationSpec:
    name: str = "uncalibrated"
    # Per-GPU HBM budget deductions.
    reserve_bytes: float = 10e9
    misc_bytes: float = 6e9
    safety_fraction: float = 0.05
    # Collective startup latency per ring step, by fabric tier.
    alpha_intra_s: float = 1e-6
    alpha_inter_s: float = 3e-6
    # Fraction of each phase window available for hiding collectives.
    overlap_attention: float = 0.8
    overlap_projection: float = 0.8
    overlap_ffn: float = 0.5
    # Fraction of a CP ring collective that is unconditionally exposed.
    cp_ring_tail_fraction: float = 0.25
    # Pipeline utilization penalty: throughput multiplier 1/(1 + f*(pp-1)).
    # 0 keeps PP cost-free, matching the pure-sharding view of pipelining.
    pp_bubble_fraction: float = 0.0
    # Whether attention/projection weights shard over TP for residency, or are
    # kept replicated across the TP group (weight-gathered execution).
    attn_weights_tp_sharded: bool = True
    # Autotuner search-space defaults.
    allow_dp: bool = True
    max_kv_degree: Optional[int] = None
    tp_choices: tuple = (1, 2, 4, 8)
    ep_choices: tuple = (1, 2, 4, 8)
    pp_choices: tuple = (1, 2, 4)

    def __post_init__(self) -> None:
        for name in ("overlap_attention", "overlap_projection", "overlap_ffn",
                     "cp_ring_tail_fraction"):
            value = getattr(self, name)
            if not (0.0 <= value <= 1.0):
                raise SpecError(f"calibration.{name}: must lie in [0, 1]")
        if not (0.0 <= self.safety_fraction < 1.0):
            raise SpecError("calibration.safety_fraction: must lie in [0, 1)")
        for name in ("reserve_bytes", "misc_bytes", "alpha_intra_s",
                     "alpha_inter_s", "pp_bubble_fraction"):
            if getattr(self, name) < 0:
                raise SpecError(f"calibration.{name}: must be >= 0")
        if self.max_kv_degree is not None and self.max_kv_degree < 1:
            raise SpecError("calibration.max_kv_degree: must be >= 1 or null")
        for name in ("tp_choices", "ep_choices", "pp_choices"):
            values = getattr(self, name)
            if not values or any(int(v) < 1 for v in values):
                raise SpecError(f"calibration.{name}: needs at least one value >= 1")
            object.__setattr__(self, name, tuple(sorted(int(v) for v in values)))

    def to_dict(self) -> dict:
        return {
            "schema_version": 1,
            "name": self.name,
            "budget": {
                "reserve_bytes": self.reserve_bytes,
                "misc_bytes": self.misc_bytes,
                "safety_fraction": self.safety_fraction,
            },
            "comm": {
                "alpha_intra_s": self.alpha_intra_s,
                "alpha_inter_s": self.alpha_inter_s,
                "overlap": {
                    "attention": self.overlap_attention,
                    "projection": self.overlap_projection,
                    "ffn": self.overlap_ffn,
                },
                "cp_ring_tail_fraction": self.cp_ring_tail_fraction,
            },
            "pp_bubble_fraction": self.pp_bubble_fraction,
            "attn_weights_tp_sharded": self.attn_weights_tp_sharded,
            "search": {
                "allow_dp": self.allow_dp,
                "max_kv_degree": self.max_kv_degree,
                "tp_choices": list(self.tp_choices),
                "ep_choices": list(self.ep_choices),
                "pp_choices": list(self.pp_choices),
            },
        }

    @staticmethod
    def from_dict(doc: Mapping[str, Any], path: str = "calibration") -> "CalibrationSpec":
        _check_schema_version(doc, path)
        budget = _require(doc, "budget", path)
        comm = _require(doc, "comm", path)
        overlap = _require(comm, "overlap", f"{path}.comm")
        search = doc.get("search", {})
        max_kv = search.get("max_kv_degree")
        if max_kv is not None:
            max_kv = _as_int(max_kv, f"{path}.search.max_kv_degree", 1)

        def choices(key: str, default: tuple) -> tuple:
            values = search.get(key)
            if values is None:
                return default
            if not isinstance(values, (list, tuple)):
                raise SpecError(f"{path}.search.{key}: expected a list")
            return tuple(_as_int(v, f"{path}.search.{key}[{i}]", 1)
                         for i, v in enumerate(values))

        return CalibrationSpec(
            name=str(doc.get("name", "unnamed")),
            reserve_bytes=_as_number(_require(budget, "reserve_bytes", f"{path}.budget"),
                                     f"{path}.budget.reserve_bytes", minimum=0.0),
            misc_bytes=_as_number(_require(budget, "misc_bytes", f"{path}.budget"),
                                  f"{path}.budget.misc_bytes", minimum=0.0),
            safety_fraction=_as_number(_require(budget, "safety_fraction", f"{path}.budget"),
                                       f"{path}.budget.safety_fraction",
                                       minimum=0.0, maximum=0.999),
            alpha_intra_s=_as_number(_require(comm, "alpha_intra_s", f"{path}.comm"),
                                     f"{path}.comm.alpha_intra_s", minimum=0.0),
            alpha_inter_s=_as_number(_require(comm, "alpha_inter_s", f"{path}.comm"),
                                     f"{path}.comm.alpha_inter_s", minimum=0.0),
            overlap_attention=_as_number(_require(overlap, "attention", f"{path}.comm.overlap"),
                                         f"{path}.comm.overlap.attention",
                                         minimum=0.0, maximum=1.0),
            overlap_projection=_as_number(_require(overlap, "projection", f"{path}.comm.overlap"),
                                          f"{path}.comm.overlap.projection",
                                          minimum=0.0, maximum=1.0),
            overlap_ffn=_as_number(_require(overlap, "ffn", f"{path}.comm.overlap"),
                                   f"{path}.comm.overlap.ffn", minimum=0.0, maximum=1.0),
            cp_ring_tail_fraction=_as_number(
                comm.get("cp_ring_tail_fraction", 0.25),
                f"{path}.comm.cp_ring_tail_fraction", minimum=0.0, maximum=1.0),
            pp_bubble_fraction=_as_number(doc.get("pp_bubble_fraction", 0.0),
                                          f"{path}.pp_bubble_fraction", minimum=0.0),
            attn_weights_tp_sharded=bool(doc.get("attn_weights_tp_sharded", True)),
            allow_dp=bool(search.get("allow_dp", True)),
            max_kv_degree=max_kv,
            tp_choices=choices("tp_choices", (1, 2, 4, 8)),
            ep_choices=choices("ep_choices", (1, 2, 4, 8)),
            pp_choices=choices("pp_choices", (1, 2, 4)),
        )


def load_calibration(path: Path | str) -> CalibrationSpec:
    path = Path(path)
    if not path.exists():
        raise SpecError(f"calibration: file not found: {path}")
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise SpecError(f"calibration: invalid JSON in {path}: {exc}") from exc
    return CalibrationSpec.from_dict(doc, "calibration")


def default_calibration_path() -> Path:
    return config_dir() / "calibration" / "default.json"


def load_default_calibration() -> CalibrationSpec:
    return load_calibration(default_calibration_path())


def make_cluster(hardware: HardwareSpec, num_gpus: int,
                 calibration: CalibrationSpec) -> ClusterSpec:
    """Assemble a ClusterSpec with the calibration's budget deductions."""
    return ClusterSpec(
        hardware=hardware,
        num_gpus=num_gpus,
        reserve_bytes=calibration.reserve_bytes,
        misc_bytes=calibration.misc_bytes,
        safety_fraction=calibration.safety_fraction,
    )


def save_calibration(spec: CalibrationSpec, path: Path | str) -> None:
    Path(path).write_text(json.dumps(spec.to_dict(), indent=2) + "\n", encoding="utf-8")
