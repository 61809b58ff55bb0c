"""Command line interface: subcommands, exit codes, trace files."""
from __future__ import annotations

from scdkit.cli import main


def test_run_reports_verdicts_and_succeeds(capsys):
    code = main(["run", "--n", "3", "--workload", "register_ops",
                 "--ops", "6", "--seed", "5"])
    out = capsys.readouterr().out
    assert code == 0
    assert "status|quiescent" in out
    assert "verdict|linearizable_witness|pass" in out
    assert out.strip().endswith("result|pass")


def test_run_writes_and_check_rereads_trace(tmp_path, capsys):
    code = main(["run", "--n", "3", "--workload", "raw_broadcast", "--ops", "4",
                 "--trace-dir", str(tmp_path)])
    assert code == 0
    run_out = capsys.readouterr().out
    trace = tmp_path / "raw_broadcast_n3_s0.trace"
    assert trace.exists()
    code = main(["check", str(trace)])
    check_out = capsys.readouterr().out
    assert code == 0
    assert f"check|{trace}|pass" in check_out
    # identical verdict lines live and replayed
    live = [l for l in run_out.splitlines() if l.startswith("verdict|")]
    replay = [l for l in check_out.splitlines() if l.startswith("verdict|")]
    assert live == replay


def test_no_trace_flag_suppresses_file(tmp_path, capsys):
    main(["run", "--n", "3", "--workload", "raw_broadcast", "--ops", "2",
          "--trace-dir", str(tmp_path), "--no-trace"])
    capsys.readouterr()
    assert list(tmp_path.iterdir()) == []


def test_print_trace_emits_records(capsys):
    main(["run", "--n", "3", "--workload", "raw_broadcast", "--ops", "2",
          "--print-trace"])
    out = capsys.readouterr().out
    assert "0|config|0|" in out
    assert "|end|0|" in out


def test_fuzz_sweeps_seeds(capsys):
    code = main(["fuzz", "--n", "3", "--workload", "snapshot_ops", "--ops", "6",
                 "--nregs", "2", "--crash", "random:1", "--seeds", "12"])
    out = capsys.readouterr().out
    assert code == 0
    assert "fuzz|seeds=12|quiescent=12" in out
    assert out.strip().endswith("result|pass")


def test_stats_reports_counters(capsys):
    code = main(["stats", "--n", "5", "--workload", "raw_broadcast", "--ops", "4"])
    out = capsys.readouterr().out
    assert code == 0
    assert "sends|total=100|cap_per_broadcast=25|max_per_broadcast=25" in out
    assert "faulty|-" in out


def test_bad_crash_schedule_exits_2(capsys):
    code = main(["run", "--n", "3", "--workload", "raw_broadcast",
                 "--crash", "random:5"])
    assert code == 2
    assert "error:" in capsys.readouterr().err


def test_missing_trace_file_exits_2(capsys):
    code = main(["check", "/nonexistent/trace.log"])
    assert code == 2


def test_default_t_is_floor_half(capsys):
    # n=7 defaults to t=3; a 3-crash schedule is accepted
    code = main(["run", "--n", "7", "--workload", "raw_broadcast", "--ops", "4",
                 "--crash", "random:3", "--seed", "1"])
    assert code == 0
