"""Sparsity, scaling-law quality equivalence, and the qs decision rule.

The criterion compares per-token FFN weight traffic: an MoE activating a
fraction s = k/E of its FFN pool against a dense model sized to match its
quality, which needs q times the MoE's quality-normalized parameter budget.
For qs < 1 the MoE moves more FFN bytes per token than the matched dense
model, i.e. it is structurally disadvantaged at decode.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional, Sequence

from .specs import KvLayout, ModelSpec, SpecError

DEFAULT_ALPHA_N = 0.076

VERDICT_DISADVANTAGED = "moe_disadvantaged"
VERDICT_ADVANTAGED = "moe_advantaged"
VERDICT_BOUNDARY = "boundary"


@dataclass(frozen=True)
class ScalingLawParams:
    alpha_n: float = DEFAULT_ALPHA_N

    def __post_init__(self) -> None:
        if self.alpha_n <= 0:
            raise SpecError("scaling_law.alpha_n: must be positive")


@dataclass(frozen=True)
class QsReport:
    s: float
    q: float
    qs: float
    verdict: str
    # Per-token FFN traffic, MoE relative to matched dense (1/qs).
    ffn_traffic_ratio: Optional[float]
    dense_baseline: Optional[ModelSpec] = None

    def to_dict(self) -> dict:
        out = {
            "s": self.s,
            "q": self.q,
            "qs": self.qs,
            "verdict": self.verdict,
            "ffn_traffic_ratio": self.ffn_traffic_ratio,
        }
        if self.dense_baseline is not None:
            out["dense_baseline"] = self.dense_baseline.to_dict()
        return out


def sparsity(num_experts: int, top_k: int) -> float:
    """Fraction of FFN parameters activated per token: s = k/E."""
    if num_experts < 1 or top_k < 1 or top_k > num_experts:
        raise SpecError(
            f"sparsity: requires 1 <= k <= E, got k={top_k} E={num_experts}"
        )
    return top_k / num_experts


def quality_multiplier(loss_base: float, loss_moe: float,
                       params: ScalingLawParams = ScalingLawParams()) -> float:
    """Dense size multiplier matching an observed loss pair.

    Inverts the power law L(N) = L(N_base) * (N/N_base)^(-alpha_n): a dense
    model of N_base * q parameters reaches the MoE's loss when
    q = (L_base / L_moe)^(1/alpha_n).  Irreducible loss is neglected, so
    treat the result as advisory when the losses sit near saturation.
    """
    if loss_base <= 0 or loss_moe <= 0:
        raise SpecError("quality_multiplier: losses must be positive")
    return (loss_base / loss_moe) ** (1.0 / params.alpha_n)


def forward_loss(loss_base: float, q: float,
                 params: ScalingLawParams = ScalingLawParams()) -> float:
    """Apply the forward law: loss of a dense model scaled by q from the base."""
    if loss_base <= 0 or q <= 0:
        raise SpecError("forward_loss: loss_base and q must be positive")
    return loss_base * q ** (-params.alpha_n)


def qs_verdict(q: float, s: float) -> QsReport:
    if q < 0:
        raise SpecError("qs_verdict: q must be >= 0")
    if not (0.0 < s <= 1.0):
        raise SpecError("qs_verdict: s must lie in (0, 1]")
    qs = q * s
    if qs < 1.0:
        verdict = VERDICT_DISADVANTAGED
    elif qs > 1.0:
        verdict = VERDICT_ADVANTAGED
    else:
        verdict = VERDICT_BOUNDARY
    ratio = (1.0 / qs) if qs > 0 else None
    return QsReport(s=s, q=q, qs=qs, verdict=verdict, ffn_traffic_ratio=ratio)


def synthesize_dense_baseline(moe: ModelSpec, q: float) -> ModelSpec:
    """Build the quality-matched dense counterpart of an MoE model.

    Attention, KV layout, embeddings, layer count, and dtypes are kept
    identical; only the FFN intermediate dimension is resized so that total
    dense parameters hit q * s * X, with X the MoE's total parameter count.
    The intermediate dimension is rounded to a multiple of 128 for
    kernel-friendly shapes, and the achieved count is recorded exactly.
    """
    if not moe.is_moe:
        raise SpecError("synthesize_dense_baseline: input model must be moe")
    if q <= 0:
        raise SpecError("synthesize_dense_baseline: q must be positive")

    target_total = q * moe.sparsity * moe.total_params
    fixed_params = (moe.attn_weight_bytes_total + moe.embed_weight_bytes) / moe.weight_dtype_bytes
    ffn_budget = target_total - fixed_params
    params_per_unit_dff = moe.ffn_matrices * moe.d_model * moe.num_layers
    d_ff = ffn_budget / params_per_unit_dff
    d_ff_rounded = int(round(d_ff / 128.0)) * 128
    if d_ff_rounded < 128:
        raise SpecError(
            f"synthesize_dense_baseline: q*s budget too small, FFN intermediate "
            f"dimension rounds to {d_ff_rounded} (needs >= 128)"
        )

    ffn_bytes_per_layer = (moe.ffn_matrices * moe.d_model * d_ff_rounded
                           * moe.weight_dtype_bytes)
    achieved_total = int(round(
        fixed_params + d_ff_rounded * params_per_unit_dff
    ))
    return replace(
        moe,
        name=f"{moe.name}-dense-q{q:g}",
        ffn_kind="dense",
        num_experts=1,
        top_k=1,
        ffn_weight_bytes_per_layer=float(ffn_bytes_per_layer),
        total_params=achieved_total,
        active_params=achieved_total,
        comment=(f"dense baseline synthesized from {moe.name} at q={q:g}; "
                 f"d_ff={d_ff_rounded}"),
        sources=(),
    )


def qs_report(moe: ModelSpec, q: float, synthesize: bool = True) -> QsReport:
    """Full qs assessment for one MoE model at quality factor q."""
    report = qs_verdict(q, moe.sparsity if moe.is_moe else 1.0)
    if synthesize and moe.is_moe:
        report = replace(report, dense_baseline=synthesize_dense_baseline(moe, q))
    return report


@dataclass(frozen=True)
class SparsityTableEntry:
    name: str
    num_experts: int
    top_k: int
    q_low: float
    q_high: float


# Published MoE systems with literature-sourced q ranges; q for these is an
# input, not something derived here.
SPARSITY_TABLE_ENTRIES: tuple = (
    SparsityTableEntry("DeepSpeed-MoE", 128, 1, 4.0, 5.0),
    SparsityTableEntry("GLaM", 64, 2, 4.0, 6.0),
    SparsityTableEntry("GShard", 128, 2, 5.0, 6.0),
    SparsityTableEntry("Switch-C", 2048, 1, 3.0, 3.0),
    SparsityTableEntry("ST-MoE", 64, 2, 3.0, 3.0),
)


def table1_report(entries: Sequence[SparsityTableEntry] = SPARSITY_TABLE_ENTRIES) -> list[dict]:
    """Sparsity and qs ranges for a roster of (E, k, q-range) entries."""
    rows = []
    for entry in entries:
        s = sparsity(entry.num_experts, entry.top_k)
        rows.append({
            "name": entry.name,
            "num_experts": entry.num_experts,
            "top_k": entry.top_k,
            "s": s,
            "q_low": entry.q_low,
            "q_high": entry.q_high,
            "qs_low": entry.q_low * s,
            "qs_high": entry.q_high * s,
        })
    return rows
