"""HBM budget, KV footprints, and capacity feasibility."""

import dataclasses
import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from moeplan import (
    ClusterSpec,
    InfeasibleHardwareError,
    KvLayout,
    ParallelismPlan,
    WorkloadSpec,
    feasibility,
    hbm_budget,
    synthesize_dense_baseline,
)
from moeplan.memory_model import (
    kv_bytes_per_seq_per_gpu,
    kv_bytes_per_token_per_layer,
    kv_shard_factor,
    resident_weight_bytes,
)

GB = 1e9


def test_budget_arithmetic(cluster64):
    # (180 - 22 - 12) GB * (1 - 0.14)
    assert hbm_budget(cluster64) == pytest.approx(125.56 * GB)


def test_budget_guard(hardware):
    cluster = ClusterSpec(hardware=hardware, num_gpus=8,
                          reserve_bytes=170e9, misc_bytes=20e9)
    with pytest.raises(InfeasibleHardwareError):
        hbm_budget(cluster)


def test_kv_footprint_ordering():
    # MLA < GQA < full when latent+rope < 2*kv_heads*head_dim
    mla = KvLayout(kind="mla", mla_latent_dim=512, mla_rope_dim=64)
    gqa = KvLayout(kind="gqa", num_kv_heads=8, kv_head_dim=128)
    full = KvLayout(kind="full", num_kv_heads=128, kv_head_dim=128)
    values = [kv_bytes_per_token_per_layer(layout, 2.0)
              for layout in (mla, gqa, full)]
    assert values[0] < values[1] < values[2]
    assert values[0] == 1152.0


def test_deepseek_kv_seq_bytes(deepseek):
    # 1152 B/token/layer * 61 layers * 128k tokens, unsharded
    plan = ParallelismPlan(tp=1)
    seq = kv_bytes_per_seq_per_gpu(deepseek, plan, WorkloadSpec(131072))
    assert seq == pytest.approx(1152 * 61 * 131072)
    sharded = ParallelismPlan(tp=1, kv_mode="kvp", kv_degree=8)
    assert kv_bytes_per_seq_per_gpu(deepseek, sharded, WorkloadSpec(131072)) \
        == pytest.approx(seq / 8)


def test_mla_ignores_tp_for_kv_sharding(deepseek):
    # the latent cache is not head-sliced, so tp contributes no shard factor
    assert kv_shard_factor(deepseek, ParallelismPlan(tp=8)) == 1
    assert kv_shard_factor(
        deepseek, ParallelismPlan(tp=8, kv_mode="kvp", kv_degree=8)) == 8


def test_gqa_tp_shard_caps_at_kv_heads(qwen):
    # four kv heads: tp beyond four replicates instead of slicing further
    assert kv_shard_factor(qwen, ParallelismPlan(tp=2)) == 2
    assert kv_shard_factor(qwen, ParallelismPlan(tp=8)) == 4
    assert kv_shard_factor(
        qwen, ParallelismPlan(tp=8, kv_mode="kvp", kv_degree=4)) == 16


def test_expert_weights_never_shard_over_tp(deepseek):
    lo = resident_weight_bytes(deepseek, ParallelismPlan(tp=1, ep=8,
                                                         kv_mode="kvp",
                                                         kv_degree=8),
                               attn_tp_sharded=False)
    hi = resident_weight_bytes(deepseek, ParallelismPlan(tp=8, ep=8),
                               attn_tp_sharded=False)
    assert lo == pytest.approx(hi)
    # ep is what divides the expert pool
    ep4 = resident_weight_bytes(deepseek, ParallelismPlan(tp=4, ep=4),
                                attn_tp_sharded=False)
    pool = deepseek.ffn_weight_bytes_total
    assert ep4 - hi == pytest.approx(pool / 4 - pool / 8)


def test_dense_ffn_shards_over_tp(deepseek):
    dense = synthesize_dense_baseline(deepseek, 5.0)
    t1 = resident_weight_bytes(dense, ParallelismPlan(tp=1),
                               attn_tp_sharded=False)
    t8 = resident_weight_bytes(dense, ParallelismPlan(tp=8),
                               attn_tp_sharded=False)
    ffn = dense.ffn_weight_bytes_total
    assert t1 - t8 == pytest.approx(ffn - ffn / 8)


def test_deepseek_resident_oracle(deepseek):
    # ep=8 expert shard + replicated attention + full embeddings
    plan = ParallelismPlan(tp=1, ep=8, kv_mode="kvp", kv_degree=8)
    resident = resident_weight_bytes(deepseek, plan, attn_tp_sharded=False)
    expected = (657.652187136 / 8 + 11.41342208 + 1.85335808) * GB
    assert resident == pytest.approx(expected)


def test_feasibility_report_fields(deepseek, cluster64):
    plan = ParallelismPlan(tp=1, ep=8, pp=1, kv_mode="kvp", kv_degree=64)
    report = feasibility(deepseek, plan, cluster64, WorkloadSpec(131072),
                         attn_tp_sharded=False)
    assert report.feasible
    assert report.n_eff_max == report.batch_cluster  # dp=1
    assert report.resident_weight_bytes + report.kv_bytes_per_seq_per_gpu \
        <= report.budget_bytes
    # capacity: floor(headroom / kv_seq)
    headroom = report.budget_bytes - report.resident_weight_bytes
    assert report.n_eff_max == math.floor(
        headroom / report.kv_bytes_per_seq_per_gpu)


def test_switch_c_oom_on_64_gpus(switch, cluster64):
    # 1.57 TB of expert weights cannot fit 64 GPUs with ep <= 8
    for ep in (1, 2, 4, 8):
        plan = ParallelismPlan(tp=8, ep=ep, kv_mode="kvp", kv_degree=8)
        report = feasibility(switch, plan, cluster64, WorkloadSpec(131072),
                             attn_tp_sharded=False)
        assert not report.feasible
        assert "exceed" in report.reason


def test_infeasible_reason_names_kv_when_weights_fit(deepseek, cluster64):
    # weights fit but one unsharded 16M-token sequence cannot
    plan = ParallelismPlan(tp=1, ep=8, kv_mode="kvp", kv_degree=8)
    report = feasibility(deepseek, plan, cluster64, WorkloadSpec(16 * 1024 * 1024),
                         attn_tp_sharded=False)
    assert not report.feasible
    assert "KV" in report.reason


def test_batch_cluster_scales_with_dp(llama, hardware, calibration):
    from moeplan import make_cluster
    cluster = make_cluster(hardware, 16, calibration)
    paired = feasibility(llama, ParallelismPlan(tp=8, dp=2),
                         cluster, WorkloadSpec(131072), attn_tp_sharded=False)
    assert paired.feasible
    assert paired.batch_cluster == paired.n_eff_max * 2


# hypothesis cases share one model/cluster; loaded once at import
def _fixed():
    from moeplan import load_builtin_hardware, load_builtin_model, make_cluster
    from moeplan.calibration import load_default_calibration
    model = load_builtin_model("deepseek-v3")
    cluster = make_cluster(load_builtin_hardware(), 64,
                           load_default_calibration())
    return model, cluster


_MODEL, _CLUSTER = _fixed()
_PLAN = ParallelismPlan(tp=1, ep=8, kv_mode="kvp", kv_degree=64)


@given(context=st.integers(min_value=1024, max_value=2 ** 24),
       longer=st.integers(min_value=1, max_value=2 ** 22))
def test_n_eff_non_increasing_in_context(context, longer):
    a = feasibility(_MODEL, _PLAN, _CLUSTER, WorkloadSpec(context), False)
    b = feasibility(_MODEL, _PLAN, _CLUSTER, WorkloadSpec(context + longer), False)
    assert b.n_eff_max <= a.n_eff_max


@given(extra=st.floats(min_value=0.0, max_value=40e9))
def test_n_eff_non_increasing_in_resident(extra):
    # growing the fixed deductions (equivalently, resident bytes) never
    # raises capacity
    work = WorkloadSpec(131072)
    lean = feasibility(_MODEL, _PLAN, _CLUSTER, work, False)
    bulky_cluster = dataclasses.replace(
        _CLUSTER, misc_bytes=_CLUSTER.misc_bytes + extra)
    bulky = feasibility(_MODEL, _PLAN, bulky_cluster, work, False)
    assert bulky.n_eff_max <= lean.n_eff_max


@given(capacity=st.floats(min_value=100e9, max_value=400e9),
       bump=st.floats(min_value=0.0, max_value=100e9))
def test_n_eff_non_decreasing_in_capacity(capacity, bump):
    work = WorkloadSpec(131072)

    def capacity_at(hbm):
        cluster = ClusterSpec(
            hardware=dataclasses.replace(_CLUSTER.hardware,
                                         hbm_capacity_bytes=hbm),
            num_gpus=64, reserve_bytes=22e9, misc_bytes=12e9,
            safety_fraction=0.14)
        return feasibility(_MODEL, _PLAN, cluster, work, False).n_eff_max

    assert capacity_at(capacity + bump) >= capacity_at(capacity)


def test_capacity_factor_exceeds_one_for_leaner_dense(deepseek, cluster64):
    # dense baseline resident < MoE resident under the paired plans,
    # so the dense side packs strictly more sequences
    dense = synthesize_dense_baseline(deepseek, 5.0)
    work = WorkloadSpec(131072)
    moe_plan = ParallelismPlan(tp=1, ep=8, kv_mode="kvp", kv_degree=64)
    dense_plan = ParallelismPlan(tp=2, kv_mode="kvp", kv_degree=32)
    moe_rep = feasibility(deepseek, moe_plan, cluster64, work, False)
    dense_rep = feasibility(dense, dense_plan, cluster64, work, False)
    assert dense_rep.resident_weight_bytes < moe_rep.resident_weight_bytes
    assert dense_rep.batch_cluster > moe_rep.batch_cluster


def test_reports_are_deterministic(deepseek, cluster64):
    plan = ParallelismPlan(tp=1, ep=8, kv_mode="kvp", kv_degree=64)
    work = WorkloadSpec(131072)
    first = feasibility(deepseek, plan, cluster64, work, False)
    second = feasibility(deepseek, plan, cluster64, work, False)
    assert first == second
    assert first.to_dict() == second.to_dict()
