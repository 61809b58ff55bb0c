"""Property checkers: known-good and known-bad logs, mutations, oracles."""
from __future__ import annotations

import copy
import itertools
import random

from hypothesis import given, settings, strategies as st

from scdkit.core import MsgId
from scdkit.check import (
    History,
    OpRecord,
    RunData,
    check_containment,
    check_crash_silence,
    check_fifo,
    check_integrity,
    check_linearizable_bruteforce,
    check_linearizable_witness,
    check_message_bound,
    check_ms_ordering,
    check_sequentially_consistent,
    check_termination,
    check_validity,
    evaluate_run,
    extract_history,
    load_run,
    timestamp_metadata,
)
from scdkit.sim import ScenarioConfig, run_scenario


def make_run(logs, n=3, status="quiescent"):
    """RunData from bare delivery logs; message k maps to id (1+k%n).k"""
    cfg = ScenarioConfig(n=n, t=(n - 1) // 2, workload="raw_broadcast", op_count=0)
    run = RunData(cfg, [], status)
    run.logs = {
        i: [frozenset(MsgId(1 + k % n, k) for k in s) for s in seq]
        for i, seq in logs.items()
    }
    for i in range(1, n + 1):
        run.logs.setdefault(i, [])
    run.broadcasts = {
        m: (m.sender, b"x") for seq in run.logs.values() for s in seq for m in s
    }
    run.completed = {i: set() for i in run.logs}
    return run


# a three-process run whose set orders are mutually consistent
GOOD_LOGS = {
    1: [{1, 2}, {3, 4, 5}, {6}, {7, 8}],
    2: [{1}, {3, 2}, {6, 4, 5}, {7}, {8}],
    3: [{3, 1, 2}, {6, 4, 5}, {7}, {8}],
}


def test_consistent_logs_pass_every_set_checker():
    run = make_run(GOOD_LOGS)
    for check in (check_validity, check_integrity, check_ms_ordering, check_containment):
        assert check(run).status == "pass", check.__name__


def test_opposite_set_orders_fail_ms_ordering():
    # first process delivers 2 strictly before 3, second does the opposite
    run = make_run({1: [{1, 2}, {3, 4, 5}], 2: [{1, 3}, {2}]})
    v = check_ms_ordering(run)
    assert v.status == "fail"
    assert str(MsgId(3, 2)) in v.detail and str(MsgId(1, 3)) in v.detail


def test_same_set_delivery_is_not_an_ordering_conflict():
    run = make_run({1: [{1}, {2}], 2: [{1, 2}]})
    assert check_ms_ordering(run).status == "pass"


def test_disjoint_prefixes_fail_containment():
    run = make_run({1: [{1}], 2: [{2}]})
    assert check_containment(run).status == "fail"
    # still fine for ms-ordering: no common messages at all
    assert check_ms_ordering(run).status == "pass"


def test_duplicate_delivery_fails_integrity():
    run = make_run({1: [{1}, {2, 1}]})
    assert check_integrity(run).status == "fail"


def test_unknown_message_fails_validity():
    run = make_run({1: [{1}]})
    run.broadcasts = {}
    assert check_validity(run).status == "fail"


def naive_ms_ordering(logs):
    """Quadratic reference: search all pairs for opposite strict orders."""
    pos = {i: {m: x for x, s in enumerate(sets) for m in s} for i, sets in logs.items()}
    for i, j in itertools.combinations(sorted(pos), 2):
        for m, m2 in itertools.combinations(sorted(set(pos[i]) & set(pos[j]), key=str), 2):
            di = pos[i][m] - pos[i][m2]
            dj = pos[j][m] - pos[j][m2]
            if (di < 0 and dj > 0) or (di > 0 and dj < 0):
                return False
    return True


@settings(max_examples=120, deadline=None)
@given(st.integers(min_value=0, max_value=2**30))
def test_ms_ordering_scan_matches_quadratic_reference(seed):
    rng = random.Random(seed)
    nmsg = rng.randint(1, 8)
    logs = {}
    for i in (1, 2, 3):
        msgs = list(range(nmsg))
        rng.shuffle(msgs)
        msgs = msgs[: rng.randint(0, nmsg)]
        sets, k = [], 0
        while k < len(msgs):
            width = rng.randint(1, 3)
            sets.append(set(msgs[k : k + width]))
            k += width
        logs[i] = sets
    run = make_run(logs)
    expect = naive_ms_ordering(run.logs)
    assert (check_ms_ordering(run).status == "pass") == expect


def test_termination_skips_unfinished_runs():
    run = make_run(GOOD_LOGS, status="stalled")
    assert check_termination(run).status == "skip"


def test_termination_flags_missing_delivery():
    run = make_run({1: [{1}], 2: [], 3: [{1}]})
    for mid, (sender, _) in run.broadcasts.items():
        run.completed[sender].add(mid)
    v = check_termination(run)
    assert v.status == "fail" and "missing at p2" in v.detail


def test_termination_flags_incomplete_broadcast():
    run = make_run({1: [{1}], 2: [{1}], 3: [{1}]})
    assert "never completed" in check_termination(run).detail


def test_termination_ignores_crashed_processes():
    run = make_run({1: [{1}], 2: [{1}], 3: []})
    run.faulty = {3}
    for mid, (sender, _) in run.broadcasts.items():
        run.completed[sender].add(mid)
    assert check_termination(run).status == "pass"


# -- trace-structure checks on live runs ------------------------------------


def test_live_run_passes_fifo_and_silence_and_bound():
    res = run_scenario(
        ScenarioConfig(n=5, t=2, workload="register_ops", op_count=10,
                       crash="random:2", seed=8)
    )
    run = load_run(res.events)
    assert check_fifo(run).status == "pass"
    assert check_crash_silence(run).status == "pass"
    assert check_message_bound(run).status == "pass"


def test_reordered_channel_fails_fifo():
    res = run_scenario(ScenarioConfig(n=3, t=1, workload="raw_broadcast", op_count=3))
    events = list(res.events)
    recvs = [k for k, ev in enumerate(events) if ev.kind == "recv"]
    a = next(k for k in recvs if any(
        events[j].kind == "recv"
        and events[j].proc == events[k].proc
        and events[j].payload["from"] == events[k].payload["from"]
        for j in recvs if j > k))
    b = next(j for j in recvs if j > a
             and events[j].proc == events[a].proc
             and events[j].payload["from"] == events[a].payload["from"])
    events[a], events[b] = events[b], events[a]
    assert check_fifo(load_run(events)).status == "fail"


def test_tampered_send_count_fails_bound():
    res = run_scenario(ScenarioConfig(n=3, t=1, workload="raw_broadcast", op_count=2))
    dup = [ev for ev in res.events if ev.kind == "send"]
    assert check_message_bound(load_run(res.events + dup)).status == "fail"


def test_event_after_crash_fails_silence():
    res = run_scenario(
        ScenarioConfig(n=3, t=1, workload="raw_broadcast", op_count=4,
                       crash="explicit:2@5", seed=1)
    )
    events = list(res.events)
    crash_at = next(k for k, ev in enumerate(events) if ev.kind == "crash")
    moved = next(ev for ev in events[:crash_at] if ev.proc == 2)
    assert check_crash_silence(load_run(events + [moved])).status == "fail"


# -- history checkers --------------------------------------------------------


def op(proc, seq, kind, invoke, ret, r=1, value=None, result=None):
    return OpRecord(
        proc=proc, seq=seq, kind=kind, r=r, value=value,
        result_values=result, invoke_idx=invoke, return_idx=ret,
    )


def test_bruteforce_accepts_overlapping_writes_and_late_read():
    h = History(
        ops=[
            op(1, 0, "write", 0, 4, value=b"a"),
            op(2, 0, "write", 1, 3, value=b"b"),
            op(3, 0, "read", 5, 6, result=(b"a",)),
        ],
        nregs=1,
        faulty=set(),
    )
    assert check_linearizable_bruteforce(h).status == "pass"
    h.ops[2].result_values = (b"b",)
    assert check_linearizable_bruteforce(h).status == "pass"


def test_bruteforce_rejects_value_out_of_thin_air():
    h = History(
        ops=[
            op(1, 0, "write", 0, 1, value=b"a"),
            op(2, 0, "read", 2, 3, result=(b"ghost",)),
        ],
        nregs=1,
        faulty=set(),
    )
    assert check_linearizable_bruteforce(h).status == "fail"


def test_bruteforce_rejects_stale_read_after_completed_write():
    h = History(
        ops=[
            op(1, 0, "write", 0, 1, value=b"a"),
            op(2, 0, "read", 2, 3, result=(b"",)),
        ],
        nregs=1,
        faulty=set(),
    )
    assert check_linearizable_bruteforce(h).status == "fail"
    # sequential consistency only needs program order: this is allowed
    assert check_sequentially_consistent(h).status == "pass"


def test_bruteforce_branches_on_pending_write_of_crashed_process():
    pending = op(1, 0, "write", 0, None, value=b"a")
    saw_it = History(
        ops=[pending, op(2, 0, "read", 2, 3, result=(b"a",))],
        nregs=1, faulty={1},
    )
    missed_it = History(
        ops=[copy.copy(pending), op(2, 0, "read", 2, 3, result=(b"",))],
        nregs=1, faulty={1},
    )
    assert check_linearizable_bruteforce(saw_it).status == "pass"
    assert check_linearizable_bruteforce(missed_it).status == "pass"


def test_bruteforce_skips_oversized_history():
    ops = [op(1, k, "write", 2 * k, 2 * k + 1, value=b"x") for k in range(11)]
    h = History(ops=ops, nregs=1, faulty=set())
    assert check_linearizable_bruteforce(h, bound=10).status == "skip"


def test_sc_rejects_own_program_order_violation():
    h = History(
        ops=[
            op(1, 0, "write", 0, 1, value=b"a"),
            op(1, 1, "read", 2, 3, result=(b"",)),
        ],
        nregs=1,
        faulty=set(),
    )
    assert check_sequentially_consistent(h).status == "fail"


def test_sc_rejects_two_readers_with_opposite_orders():
    h = History(
        ops=[
            op(1, 0, "write", 0, 1, value=b"a"),
            op(2, 0, "write", 2, 3, value=b"b"),
            op(3, 0, "read", 4, 5, result=(b"a",)),
            op(3, 1, "read", 6, 7, result=(b"b",)),
            op(4, 0, "read", 4, 5, result=(b"b",)),
            op(4, 1, "read", 6, 7, result=(b"a",)),
        ],
        nregs=1,
        faulty=set(),
    )
    assert check_sequentially_consistent(h).status == "fail"


# -- witness checker ---------------------------------------------------------


def object_run(seed, workload="register_ops", n=3, ops=8, nregs=1, crash="none"):
    cfg = ScenarioConfig(n=n, t=(n - 1) // 2, workload=workload, op_count=ops,
                         nregs=nregs, crash=crash, seed=seed)
    return load_run(run_scenario(cfg).events)


def test_witness_passes_live_histories():
    for seed in range(6):
        run = object_run(seed, nregs=1)
        h = extract_history(run)
        assert check_linearizable_witness(h, timestamp_metadata(run)).status == "pass"


def test_witness_flags_corrupted_read():
    run = object_run(3)
    h = extract_history(run)
    meta = timestamp_metadata(run)
    bad = copy.deepcopy(h)
    victim = next(o for o in bad.ops if o.kind == "read" and o.return_idx is not None)
    victim.result_values = (b"never-written",)
    assert check_linearizable_witness(bad, meta).status == "fail"
    assert check_linearizable_witness(h, meta).status == "pass"


def test_witness_flags_unknown_tag_array():
    run = object_run(4, workload="snapshot_ops", nregs=2)
    h = extract_history(run)
    meta = timestamp_metadata(run)
    bad = copy.deepcopy(h)
    victim = next(o for o in bad.ops if o.kind == "snapshot" and o.return_idx is not None)
    victim.tsa = tuple(reversed(victim.tsa)) if len(set(victim.tsa)) > 1 else None
    if victim.tsa is None:  # degenerate draw; corrupt a value instead
        victim.result_values = (b"zz",) * len(victim.result_values)
    assert check_linearizable_witness(bad, meta).status == "fail"


@settings(max_examples=30, deadline=None)
@given(st.integers(min_value=0, max_value=2**30))
def test_witness_agrees_with_bruteforce_on_small_histories(seed):
    rng = random.Random(seed)
    run = object_run(
        rng.randint(0, 10**6),
        workload=rng.choice(["register_ops", "snapshot_ops"]),
        ops=rng.randint(2, 8),
        nregs=rng.choice([1, 2]),
        crash=rng.choice(["none", "random:1"]),
    )
    if run.status != "quiescent":
        return
    h = extract_history(run)
    w = check_linearizable_witness(h, timestamp_metadata(run))
    b = check_linearizable_bruteforce(h, bound=10)
    if b.status != "skip":
        assert w.status == b.status, (w.line(), b.line())
    assert w.status == "pass"


def test_evaluate_run_covers_workload_specific_checks():
    run = object_run(2, workload="register_ops")
    props = [v.prop for v in evaluate_run(run)]
    assert "linearizable_witness" in props and "ms_ordering" in props
    run = object_run(2, workload="sc_register_ops")
    props = [v.prop for v in evaluate_run(run)]
    assert "sequentially_consistent" in props
    assert "linearizable_witness" not in props
