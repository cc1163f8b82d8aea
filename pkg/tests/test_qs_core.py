"""Sparsity arithmetic, scaling-law inversion, and dense baseline synthesis."""

import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from moeplan import (
    ScalingLawParams,
    SpecError,
    qs_report,
    qs_verdict,
    quality_multiplier,
    sparsity,
    synthesize_dense_baseline,
)
from moeplan.qs_core import (
    SPARSITY_TABLE_ENTRIES,
    VERDICT_ADVANTAGED,
    VERDICT_BOUNDARY,
    VERDICT_DISADVANTAGED,
    forward_loss,
    table1_report,
)

losses = st.floats(min_value=1.2, max_value=6.0,
                   allow_nan=False, allow_infinity=False)


def test_quality_multiplier_published_anchors():
    # Loss pairs from compute-matched MoE-vs-dense training runs.
    assert 3.62 <= quality_multiplier(2.34, 2.12) <= 3.72
    assert 5.26 <= quality_multiplier(2.60, 2.29) <= 5.36


def test_quality_multiplier_identity_losses():
    assert quality_multiplier(2.0, 2.0) == 1.0


@given(base=losses, lower=st.floats(min_value=0.01, max_value=0.5),
       delta=st.floats(min_value=1e-3, max_value=0.3))
def test_quality_multiplier_monotone(base, lower, delta):
    moe = base - lower
    # strictly increasing in the base loss, strictly decreasing in the moe loss
    assert quality_multiplier(base + delta, moe) > quality_multiplier(base, moe)
    assert quality_multiplier(base, moe + min(delta, lower / 2)) \
        < quality_multiplier(base, moe)


@given(base=losses, q=st.floats(min_value=1.0, max_value=64.0))
def test_scaling_law_round_trip(base, q):
    # forward law applied at N_base*q must recover the loss the inversion saw
    moe_loss = forward_loss(base, q)
    assert quality_multiplier(base, moe_loss) == pytest.approx(q, rel=1e-9)


def test_alpha_n_default():
    assert ScalingLawParams().alpha_n == 0.076
    with pytest.raises(SpecError, match="alpha_n"):
        ScalingLawParams(alpha_n=0.0)


def test_sparsity_values():
    assert sparsity(256, 8) == 0.03125
    assert sparsity(128, 8) == 0.0625
    assert sparsity(8, 2) == 0.25
    assert sparsity(2048, 1) == pytest.approx(4.8828125e-4)
    with pytest.raises(SpecError, match="k"):
        sparsity(8, 9)


def test_qs_verdict_regimes():
    assert qs_verdict(5.0, 0.03125).verdict == VERDICT_DISADVANTAGED
    assert qs_verdict(5.0, 0.25).verdict == VERDICT_ADVANTAGED
    assert qs_verdict(4.0, 0.25).verdict == VERDICT_BOUNDARY
    report = qs_verdict(5.0, 0.03125)
    assert report.qs == pytest.approx(0.15625)
    assert report.ffn_traffic_ratio == pytest.approx(1.0 / 0.15625)


@given(q=st.floats(min_value=0.1, max_value=20.0),
       s=st.floats(min_value=1e-4, max_value=1.0))
def test_qs_traffic_ratio_inverse(q, s):
    report = qs_verdict(q, s)
    assert report.qs == pytest.approx(q * s)
    assert report.ffn_traffic_ratio == pytest.approx(1.0 / (q * s))


def test_sparsity_table_matches_printed_rows():
    # Published survey rows: each s/qs within one unit in the last printed digit.
    printed = {
        "DeepSpeed-MoE": (0.0078, 1e-4, (0.03, 0.04), 0.01),
        "GLaM": (0.031, 1e-3, (0.12, 0.19), 0.01),
        "GShard": (0.016, 1e-3, (0.08, 0.10), 0.01),
        "Switch-C": (4.9e-4, 1e-5, (0.0015, 0.0015), 1e-4),
        "ST-MoE": (0.031, 1e-3, (0.093, 0.093), 1e-3),
    }
    rows = {row["name"]: row for row in table1_report()}
    assert set(rows) == set(printed)
    for name, (s_printed, s_unit, qs_printed, qs_unit) in printed.items():
        row = rows[name]
        assert abs(row["s"] - s_printed) <= s_unit, name
        assert abs(row["qs_low"] - qs_printed[0]) <= qs_unit, name
        assert abs(row["qs_high"] - qs_printed[1]) <= qs_unit, name


def test_table_entry_count():
    assert len(SPARSITY_TABLE_ENTRIES) == 5


def test_dense_baseline_parameter_budget(deepseek):
    q = 5.0
    dense = synthesize_dense_baseline(deepseek, q)
    target = q * deepseek.sparsity * deepseek.total_params
    # rounding d_ff to a multiple of 128 moves the total by well under 1%
    assert dense.total_params == pytest.approx(target, rel=0.01)
    assert dense.active_params == dense.total_params
    assert not dense.is_moe
    # attention, embeddings, KV untouched
    assert dense.attn_weight_bytes_per_layer == deepseek.attn_weight_bytes_per_layer
    assert dense.kv_layout == deepseek.kv_layout
    assert dense.num_layers == deepseek.num_layers
    assert dense.d_model == deepseek.d_model
    # d_ff lands on a kernel-friendly multiple
    d_ff = (dense.ffn_weight_bytes_per_layer
            / (dense.ffn_matrices * dense.d_model * dense.weight_dtype_bytes))
    assert d_ff == int(d_ff) and int(d_ff) % 128 == 0


def test_dense_baseline_synthesis_preserves_qs(deepseek):
    # synthesizing the baseline must not perturb the criterion inputs
    with_baseline = qs_report(deepseek, 5.0, synthesize=True)
    without = qs_report(deepseek, 5.0, synthesize=False)
    assert with_baseline.qs == without.qs
    assert with_baseline.s == without.s
    assert with_baseline.verdict == without.verdict
    assert with_baseline.dense_baseline is not None
    assert without.dense_baseline is None


@pytest.mark.parametrize("q", [2.0, 3.0, 5.0, 8.0])
def test_dense_baseline_scales_with_q(q, deepseek):
    dense = synthesize_dense_baseline(deepseek, q)
    assert dense.total_params == pytest.approx(
        q * deepseek.sparsity * deepseek.total_params, rel=0.01)


def test_dense_input_passthrough(llama):
    report = qs_report(llama, 1.0)
    assert report.s == 1.0
    assert report.qs == 1.0
    assert report.verdict == VERDICT_BOUNDARY
    assert report.dense_baseline is None
    # q > 1 on dense input: qs = q, no synthesis
    assert qs_report(llama, 5.0).qs == 5.0


def test_deepseek_qs_values(deepseek):
    report = qs_report(deepseek, 5.0, synthesize=False)
    assert report.s == 0.03125
    assert report.qs == pytest.approx(0.15625)
    assert report.verdict == VERDICT_DISADVANTAGED


def test_baseline_rejects_degenerate_budget(switch):
    # q*s for Switch-C at tiny q rounds the FFN width below one 128-block
    with pytest.raises(SpecError, match="128"):
        synthesize_dense_baseline(switch, 0.001)
