"""Plan enumeration, exhaustive-argmax selection, and search determinism."""

import dataclasses
import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from moeplan import (
    ParallelismPlan,
    SpecError,
    WorkloadSpec,
    load_builtin_hardware,
    load_builtin_model,
    make_cluster,
    synthesize_dense_baseline,
)
from moeplan.autotuner import (
    AutotuneResult,
    SearchSpace,
    autotune,
    best_capacity_plan,
    enumerate_plans,
    evaluate_plan,
)
from moeplan.calibration import load_default_calibration

_CAL = load_default_calibration()
_HW = load_builtin_hardware()
_CLUSTER64 = make_cluster(_HW, 64, _CAL)
_MOE = load_builtin_model("deepseek-v3")
_DENSE = synthesize_dense_baseline(_MOE, 5.0)
_SPACE = SearchSpace.from_calibration(_CAL)


def test_enumeration_covers_cluster_exactly():
    plans = enumerate_plans(_SPACE, _CLUSTER64)
    assert plans
    for plan in plans:
        assert plan.total_gpus == 64
        assert plan.ep <= plan.tp * plan.kv_degree
    # canonical order, no duplicates
    assert len(set(plans)) == len(plans)
    labels = [p.label() for p in plans]
    assert labels == sorted(labels, key=lambda s: [
        p.label() for p in plans].index(s))


def test_enumeration_respects_search_space():
    space = dataclasses.replace(_SPACE, tp_choices=(2,), kv_modes=("kvp",))
    plans = enumerate_plans(space, _CLUSTER64)
    assert plans
    assert all(p.tp == 2 and p.kv_mode == "kvp" for p in plans)
    with pytest.raises(SpecError):
        enumerate_plans(dataclasses.replace(_SPACE, tp_choices=(3,),
                                            kv_modes=("none",),
                                            pp_choices=(1,)),
                        _CLUSTER64)


def test_kv_degree_cap():
    space = dataclasses.replace(_SPACE, max_kv_degree=8)
    plans = enumerate_plans(space, _CLUSTER64)
    assert all(p.kv_degree <= 8 for p in plans)


def test_dp_suppressed_when_disallowed():
    assert _SPACE.allow_dp is False  # shipped search keeps replicas saturated
    plans = enumerate_plans(_SPACE, _CLUSTER64)
    assert all(p.dp == 1 for p in plans)
    roomier = dataclasses.replace(_SPACE, allow_dp=True)
    assert any(p.dp > 1 for p in enumerate_plans(roomier, _CLUSTER64))


def test_autotune_best_beats_every_feasible_plan():
    # the enumeration is the oracle: nothing may outrank the winner
    for context in (1024, 131072, 16 * 1024 * 1024):
        result = autotune(_MOE, _CLUSTER64, WorkloadSpec(context),
                          calibration=_CAL)
        assert result.feasible
        best = result.best.throughput.tokens_per_s_cluster
        for report in result.ranking:
            if report.feasible:
                assert best >= report.throughput.tokens_per_s_cluster


def test_autotune_ranking_sorted_and_front_loaded():
    result = autotune(_MOE, _CLUSTER64, WorkloadSpec(131072), calibration=_CAL)
    tputs = [r.throughput.tokens_per_s_cluster
             for r in result.ranking if r.feasible]
    assert tputs == sorted(tputs, reverse=True)
    # infeasible plans trail the feasible ones
    flags = [r.feasible for r in result.ranking]
    assert flags == sorted(flags, reverse=True)


def test_autotune_deterministic_byte_for_byte():
    a = autotune(_MOE, _CLUSTER64, WorkloadSpec(131072), calibration=_CAL)
    b = autotune(_MOE, _CLUSTER64, WorkloadSpec(131072), calibration=_CAL)
    assert json.dumps(a.to_dict(), sort_keys=True) \
        == json.dumps(b.to_dict(), sort_keys=True)


def test_evaluate_plan_populates_reuse_fragment():
    plan = ParallelismPlan(tp=1, ep=8, kv_mode="kvp", kv_degree=64)
    report = evaluate_plan(_MOE, plan, _CLUSTER64, WorkloadSpec(131072), _CAL)
    assert report.feasible
    n = report.memory.batch_cluster
    assert report.reuse["batch_replica"] == n
    assert report.reuse["reuse_factor"] == pytest.approx(n * 8 / 256)
    assert report.reuse["routing_factor"] == 32.0
    dense_report = evaluate_plan(_DENSE,
                                 ParallelismPlan(tp=2, kv_mode="kvp",
                                                 kv_degree=32),
                                 _CLUSTER64, WorkloadSpec(131072), _CAL)
    assert dense_report.reuse["reuse_factor"] == pytest.approx(
        dense_report.memory.batch_cluster)


def test_infeasible_plan_reported_not_raised():
    plan = ParallelismPlan(tp=8, ep=8, kv_mode="kvp", kv_degree=8)
    report = evaluate_plan(load_builtin_model("switch-c-2048"), plan,
                           _CLUSTER64, WorkloadSpec(131072), _CAL)
    assert not report.feasible
    assert report.latency is None and report.throughput is None
    assert report.memory.reason


def test_dense_plans_never_carry_ep():
    result = autotune(_DENSE, _CLUSTER64, WorkloadSpec(131072),
                      calibration=_CAL)
    assert all(r.plan.ep == 1 for r in result.ranking)


def test_moe_ep_bounded_by_expert_count(grok):
    # grok has 8 experts; ep cannot exceed E
    result = autotune(grok, _CLUSTER64, WorkloadSpec(131072), calibration=_CAL)
    assert all(r.plan.ep <= 8 for r in result.ranking)


@settings(max_examples=12, deadline=None)
@given(gpus=st.sampled_from([8, 16, 32]),
       context=st.sampled_from([16384, 131072]))
def test_adding_gpus_keeps_dp_padded_plans(gpus, context):
    # any feasible plan keeps working on a larger cluster by widening dp
    space = dataclasses.replace(_SPACE, allow_dp=True)
    small = make_cluster(_HW, gpus, _CAL)
    large = make_cluster(_HW, gpus * 2, _CAL)
    result = autotune(_MOE, small, WorkloadSpec(context), space=space,
                      calibration=_CAL)
    larger_plans = set(enumerate_plans(space, large))
    for report in result.ranking:
        if not report.feasible:
            continue
        padded = dataclasses.replace(report.plan, dp=report.plan.dp * 2)
        assert padded in larger_plans
        padded_report = evaluate_plan(_MOE, padded, large,
                                      WorkloadSpec(context), _CAL)
        assert padded_report.feasible


def test_capacity_plan_maximizes_batch():
    report = best_capacity_plan(_MOE, _CLUSTER64, WorkloadSpec(131072), _CAL)
    assert report.feasible
    assert report.plan.label() == "tp1-ep8-pp1-kvp64"
    assert report.memory.batch_cluster == 209
    # every single-replica alternative admits no more sequences
    space = dataclasses.replace(_SPACE, pp_choices=(1,), allow_dp=False,
                                kv_modes=("none", "kvp"))
    for plan in enumerate_plans(space, _CLUSTER64):
        if plan.ep > _MOE.num_experts or (not _MOE.is_moe and plan.ep > 1):
            continue
        other = evaluate_plan(_MOE, plan, _CLUSTER64, WorkloadSpec(131072), _CAL)
        assert other.memory.batch_cluster <= 209


def test_capacity_plan_dense_counterpart():
    report = best_capacity_plan(_DENSE, _CLUSTER64, WorkloadSpec(131072), _CAL)
    assert report.plan.label() == "tp2-ep1-pp1-kvp32"
    assert report.memory.batch_cluster == 231


def test_autotune_result_shape():
    result = autotune(_MOE, _CLUSTER64, WorkloadSpec(131072), calibration=_CAL)
    assert isinstance(result, AutotuneResult)
    doc = result.to_dict()
    assert doc["feasible"] is True
    assert doc["best"]["plan_label"] == result.best.plan.label()
    assert len(doc["ranking"]) == len(result.ranking)
