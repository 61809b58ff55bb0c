"""Command line front end.

    scdkit run    one scenario: execute, check, optionally store the trace
    scdkit fuzz   sweep seeds over one scenario shape, summarize verdicts
    scdkit check  re-check stored trace files
    scdkit stats  execute and report message/step counts instead of verdicts

Exit status: 0 all checks passed, 1 some check failed, 2 bad usage.
"""
from __future__ import annotations

import argparse
import multiprocessing
import os
import sys
from dataclasses import dataclass, field

from .core import UsageError
from .check import count_messages, evaluate_run, load_run
from .sim import RunResult, ScenarioConfig, Simulator, WORKLOADS, parse_trace


@dataclass
class RunReport:
    config: ScenarioConfig
    status: str
    steps: int
    verdicts: list

    @property
    def ok(self) -> bool:
        return all(v.ok for v in self.verdicts)

    def lines(self):
        yield f"status|{self.status}|steps={self.steps}"
        for v in self.verdicts:
            yield v.line()
        yield f"result|{'pass' if self.ok else 'fail'}"


@dataclass
class FuzzSummary:
    total: int = 0
    statuses: dict = field(default_factory=dict)
    failures: list = field(default_factory=list)  # (seed, verdict line)

    @property
    def ok(self) -> bool:
        return not self.failures

    def lines(self):
        counts = " ".join(f"{k}={v}" for k, v in sorted(self.statuses.items()))
        yield f"fuzz|seeds={self.total}|{counts}"
        for seed, line in self.failures[:20]:
            yield f"fail|seed={seed}|{line}"
        if len(self.failures) > 20:
            yield f"fail|...and {len(self.failures) - 20} more"
        yield f"result|{'pass' if self.ok else 'fail'}"


def evaluate(result: RunResult) -> RunReport:
    run = load_run(result.events)
    return RunReport(result.config, result.status, result.steps, evaluate_run(run))


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="scdkit",
        description="run, fuzz and check set-constrained delivery broadcast scenarios",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    scen = argparse.ArgumentParser(add_help=False)
    scen.add_argument("--n", type=int, required=True, help="number of processes")
    scen.add_argument("--t", type=int, default=None,
                      help="assumed crash budget, default (n-1)//2")
    scen.add_argument("--workload", choices=sorted(WORKLOADS), required=True)
    scen.add_argument("--ops", type=int, default=10, help="total operation count")
    scen.add_argument("--crash", default="none",
                      help="none | random:K | explicit:p@step[:keep],...")
    scen.add_argument("--delay", default="uniform", help="uniform | fifo | slow:p,p")
    scen.add_argument("--seed", type=int, default=0)
    scen.add_argument("--budget", type=int, default=10**6, help="step budget")
    scen.add_argument("--nregs", type=int, default=1,
                      help="snapshot width (snapshot workloads)")
    scen.add_argument("--mem", choices=["atomic", "sc"], default="atomic",
                      help="memory model for rw_equivalence")
    scen.add_argument("--writer", type=int, default=1,
                      help="writing process for swmr_register_ops")

    p_run = sub.add_parser("run", parents=[scen], help="run one scenario and check it")
    p_run.add_argument("--trace-dir", default=os.environ.get("SCDKIT_TRACE_DIR"),
                       help="directory to store the trace (default $SCDKIT_TRACE_DIR)")
    p_run.add_argument("--no-trace", action="store_true", help="never store a trace")
    p_run.add_argument("--print-trace", action="store_true",
                       help="print trace records to stdout before the verdicts")
    p_run.set_defaults(func=cmd_run)

    p_fuzz = sub.add_parser("fuzz", parents=[scen], help="sweep seeds over a scenario")
    p_fuzz.add_argument("--seeds", type=int, default=100, help="number of seeds")
    p_fuzz.add_argument("--seed-base", type=int, default=0, help="first seed")
    p_fuzz.add_argument("--jobs", type=int, default=1, help="worker processes")
    p_fuzz.set_defaults(func=cmd_fuzz)

    p_check = sub.add_parser("check", help="re-check stored trace files")
    p_check.add_argument("traces", nargs="+", help="trace files written by run")
    p_check.set_defaults(func=cmd_check)

    p_stats = sub.add_parser("stats", parents=[scen],
                             help="run one scenario and report counters")
    p_stats.set_defaults(func=cmd_stats)
    return parser


def scenario_from_args(args) -> ScenarioConfig:
    t = args.t if args.t is not None else (args.n - 1) // 2
    config = ScenarioConfig(
        n=args.n,
        t=t,
        workload=args.workload,
        op_count=args.ops,
        crash=args.crash,
        delay=args.delay,
        seed=args.seed,
        step_budget=args.budget,
        nregs=args.nregs,
        mem=args.mem,
        writer=args.writer,
    )
    config.validate()
    return config


# ---------------------------------------------------------------------------


def cmd_run(args) -> int:
    config = scenario_from_args(args)
    result = Simulator(config).run()
    if args.print_trace:
        print(result.text, end="")
    if args.trace_dir and not args.no_trace:
        os.makedirs(args.trace_dir, exist_ok=True)
        path = os.path.join(
            args.trace_dir, f"{config.workload}_n{config.n}_s{config.seed}.trace"
        )
        with open(path, "w") as fh:
            fh.write(result.text)
        print(f"trace|{path}")
    report = evaluate(result)
    for line in report.lines():
        print(line)
    return 0 if report.ok else 1


def _fuzz_one(payload) -> tuple:
    config = ScenarioConfig.from_payload(payload)
    report = evaluate(Simulator(config).run())
    bad = [v.line() for v in report.verdicts if not v.ok]
    return config.seed, report.status, bad


def cmd_fuzz(args) -> int:
    base = scenario_from_args(args)
    payloads = []
    for k in range(args.seeds):
        p = base.to_payload()
        p["seed"] = str(args.seed_base + k)
        payloads.append(p)
    summary = FuzzSummary()
    if args.jobs > 1:
        with multiprocessing.Pool(args.jobs) as pool:
            results = pool.map(_fuzz_one, payloads)
    else:
        results = map(_fuzz_one, payloads)
    for seed, status, bad in results:
        summary.total += 1
        summary.statuses[status] = summary.statuses.get(status, 0) + 1
        for line in bad:
            summary.failures.append((seed, line))
    for line in summary.lines():
        print(line)
    return 0 if summary.ok else 1


def cmd_check(args) -> int:
    all_ok = True
    for path in args.traces:
        with open(path) as fh:
            events = parse_trace(fh.read())
        run = load_run(events)
        verdicts = evaluate_run(run)
        ok = all(v.ok for v in verdicts)
        all_ok = all_ok and ok
        print(f"check|{path}|{'pass' if ok else 'fail'}")
        for v in verdicts:
            print(v.line())
    return 0 if all_ok else 1


def cmd_stats(args) -> int:
    config = scenario_from_args(args)
    result = Simulator(config).run()
    run = load_run(result.events)
    counts = count_messages(run)
    sends = sum(counts.values())
    sets_per = {i: len(run.logs[i]) for i in sorted(run.logs)}
    print(f"status|{result.status}|steps={result.steps}")
    print(f"broadcasts|{len(run.broadcasts)}")
    print(f"sends|total={sends}|cap_per_broadcast={config.n ** 2}"
          f"|max_per_broadcast={max(counts.values(), default=0)}")
    print("delivered_sets|" + " ".join(f"p{i}={c}" for i, c in sets_per.items()))
    print("faulty|" + (",".join(str(p) for p in sorted(run.faulty)) or "-"))
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
