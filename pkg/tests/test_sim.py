"""Deterministic simulator: scheduling, crashes, tracing."""
from __future__ import annotations

import pytest
from hypothesis import given, settings, strategies as st

from scdkit.core import UsageError
from scdkit.check import count_messages, load_run
from scdkit.sim import (
    ScenarioConfig,
    Simulator,
    parse_crash_schedule,
    parse_delay_policy,
    parse_trace,
    render_trace,
    run_scenario,
)


def config(**kw):
    base = dict(n=3, t=1, workload="raw_broadcast", op_count=4, seed=0)
    base.update(kw)
    return ScenarioConfig(**base)


def test_same_config_gives_byte_identical_trace():
    a = run_scenario(config(seed=42))
    b = run_scenario(config(seed=42))
    assert a.text == b.text


def test_different_seeds_give_different_schedules():
    a = run_scenario(config(seed=1))
    b = run_scenario(config(seed=2))
    assert a.text != b.text


def test_trace_roundtrips_through_parser():
    res = run_scenario(config(workload="register_ops", op_count=6, crash="random:1"))
    events = parse_trace(res.text)
    assert render_trace(events) == res.text
    assert events[0].kind == "config" and events[-1].kind == "end"


def test_config_survives_trace_embedding():
    cfg = config(workload="snapshot_ops", nregs=3, crash="random:1", delay="fifo", seed=9)
    res = run_scenario(cfg)
    run = load_run(parse_trace(res.text))
    assert run.config == cfg


def test_failure_free_run_uses_exactly_n_squared_sends_per_broadcast():
    for n in (3, 5):
        cfg = config(n=n, t=(n - 1) // 2, op_count=2 * n, seed=5)
        res = run_scenario(cfg)
        assert res.status == "quiescent"
        counts = count_messages(load_run(res.events))
        assert len(counts) == 2 * n
        assert set(counts.values()) == {n * n}


def test_crashed_process_goes_silent():
    res = run_scenario(config(op_count=6, crash="explicit:2@10", seed=3))
    seen_crash = False
    for ev in res.events:
        if ev.kind == "crash":
            assert ev.proc == 2
            seen_crash = True
        elif seen_crash:
            assert ev.proc != 2
    assert seen_crash


def test_interrupting_crash_truncates_sends():
    """keep=k lets exactly k point-to-point sends of the victim's final
    activity escape."""
    for keep in (0, 1, 2):
        res = run_scenario(
            config(op_count=4, crash=f"explicit:1@0:{keep}", seed=0)
        )
        first = [ev for ev in res.events if ev.kind == "send" and ev.proc == 1]
        assert len(first) == keep


def test_crash_schedule_parsing():
    assert parse_crash_schedule("none", 3, 1) == []
    assert parse_crash_schedule("random:1", 3, 1) == ("random", 1)
    assert parse_crash_schedule("explicit:2@7,1@3:4", 3, 1) == [
        (3, 1, 4),
        (7, 2, None),
    ]
    with pytest.raises(UsageError):
        parse_crash_schedule("explicit:1@1,1@2", 3, 1)  # duplicate victim
    with pytest.raises(UsageError):
        parse_crash_schedule("explicit:1@1,2@2,3@3", 3, 1)  # nobody left
    with pytest.raises(UsageError):
        parse_crash_schedule("random:3", 3, 1)
    with pytest.raises(UsageError):
        parse_crash_schedule("sometimes", 3, 1)


def test_delay_policy_parsing():
    assert parse_delay_policy("uniform", 3) == ("uniform", frozenset())
    assert parse_delay_policy("slow:1,3", 3) == ("slow", frozenset({1, 3}))
    with pytest.raises(UsageError):
        parse_delay_policy("slow:9", 3)
    with pytest.raises(UsageError):
        parse_delay_policy("bursty", 3)


def test_all_delay_policies_reach_quiescence():
    for delay in ("uniform", "fifo", "slow:1", "slow:2,3"):
        res = run_scenario(config(op_count=5, delay=delay, seed=4))
        assert res.status == "quiescent", delay


def test_step_budget_cuts_run_short():
    res = run_scenario(config(op_count=6, step_budget=10))
    assert res.status == "budget"
    assert res.steps == 10
    assert res.events[-1].payload["status"] == "budget"


def test_majority_crash_stalls_survivors():
    cfg = config(op_count=4, crash="explicit:1@0,2@1", step_budget=5000)
    res = run_scenario(cfg)
    assert res.status == "stalled"
    assert cfg.expected_nonterminating()
    run = load_run(res.events)
    assert run.completed[3] == set()  # survivor's broadcast never completes


def test_minority_crash_still_terminates():
    cfg = config(op_count=4, crash="explicit:1@0", step_budget=50000)
    assert not cfg.expected_nonterminating()
    res = run_scenario(cfg)
    assert res.status == "quiescent"


def test_rw_workload_runs_both_memory_modes():
    for mem in ("atomic", "sc"):
        cfg = config(workload="rw_equivalence", op_count=4, mem=mem)
        res = run_scenario(cfg)
        assert res.status == "quiescent"
        run = load_run(res.events)
        union = None
        for i, sets in run.logs.items():
            got = set().union(*sets)
            assert union is None or got == union
            union = got
        assert len(union) == 4


def test_object_workloads_return_every_operation():
    for wl in ("snapshot_ops", "register_ops", "swmr_register_ops",
               "sc_register_ops", "sc_snapshot_ops"):
        cfg = config(workload=wl, op_count=7, nregs=2, writer=2, seed=6)
        res = run_scenario(cfg)
        assert res.status == "quiescent", wl
        invokes = sum(ev.kind == "op_invoke" for ev in res.events)
        returns = sum(ev.kind == "op_return" for ev in res.events)
        assert invokes == returns == 7, wl


@settings(max_examples=40, deadline=None)
@given(st.integers(min_value=0, max_value=10**6))
def test_trace_parse_is_total_on_generated_traces(seed):
    cfg = config(
        workload="register_ops",
        op_count=5,
        crash="random:1" if seed % 2 else "none",
        seed=seed,
    )
    res = run_scenario(cfg)
    events = parse_trace(res.text)
    assert len(events) == len(res.events)


def test_simulator_rejects_invalid_config():
    with pytest.raises(UsageError):
        Simulator(config(n=0))
    with pytest.raises(UsageError):
        Simulator(config(workload="nope"))
    with pytest.raises(UsageError):
        Simulator(config(mem="weird"))
