"""Command-line entry point for reproducible experiments.

Four subcommands: ``simulate`` runs a protocol under exhaustive, random, or
file-driven schedules and reports per-execution traces plus an aggregate
property report; ``analyze`` classifies valences, lists critical
configurations, and sweeps the object-level case checks; ``search`` runs
the bounded solvability search; ``lincheck`` drives the threaded harness
through the history checker.

Exit codes are a stable contract: 0 all properties hold, 1 a property
violation (or unmet expectation) was found, 2 usage error.  Data goes to
stdout (JSON lines or CSV per ``--format``); diagnostics go to stderr.
``--out DIR`` additionally writes the report files and renders figures
alongside them.  The environment variable ``WRNLAB_BUDGET`` overrides the
exploration node budget.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import analysis, lincheck, protocols, reporting, simulator
from .objects import BOTTOM, ContractViolation, value_to_json

EXIT_OK = 0
EXIT_VIOLATION = 1
EXIT_USAGE = 2

PROTOCOL_NAMES = ("alg2", "alg3", "alg4", "grouped")


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except (ContractViolation, simulator.ScheduleError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="wrnlab",
        description="Concurrency lab for write-and-read-next objects.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run a protocol over schedules")
    sim.add_argument("--protocol", required=True, choices=PROTOCOL_NAMES)
    sim.add_argument("--k", type=int, default=3, help="object arity")
    sim.add_argument("--n", type=int, help="process count (grouped)")
    sim.add_argument("--inputs", help="comma-separated proposals")
    sim.add_argument(
        "--participants", help="comma-separated external names (alg3)"
    )
    sim.add_argument(
        "--family",
        choices=(protocols.FAMILY_COVERING, protocols.FAMILY_FULL),
        default=protocols.FAMILY_COVERING,
    )
    sim.add_argument(
        "--schedule",
        choices=("exhaustive", "random", "file"),
        default="exhaustive",
    )
    sim.add_argument("--seed", type=int, help="required for --schedule random")
    sim.add_argument("--trials", type=int, default=1000)
    sim.add_argument("--schedule-file", help="required for --schedule file")
    sim.add_argument("--format", choices=("json", "csv"), default="json")
    sim.add_argument("--max-traces", type=int, default=10_000)
    sim.add_argument("--budget", type=int, help="node budget override")
    sim.add_argument("--out", help="directory for report files and figures")
    sim.set_defaults(handler=cmd_simulate)

    ana = sub.add_parser("analyze", help="valences, critical configs, case checks")
    ana.add_argument("--protocol", default="alg4")
    ana.add_argument("--k", type=int, default=2)
    ana.add_argument("--inputs", default="0,1")
    ana.add_argument("--case-k-min", type=int, default=3)
    ana.add_argument("--case-k-max", type=int, default=8)
    ana.add_argument("--budget", type=int)
    ana.add_argument("--out", help="directory for report files and figures")
    ana.set_defaults(handler=cmd_analyze)

    sea = sub.add_parser("search", help="bounded consensus-solvability search")
    sea.add_argument("--k", type=int, required=True)
    sea.add_argument("--depth", type=int, required=True, help="max ops per process")
    sea.add_argument("--objects", type=int, default=1)
    sea.add_argument("--expect", choices=("solvable", "unsolvable"))
    sea.add_argument("--budget", type=int)
    sea.add_argument("--out", help="directory for report files and figures")
    sea.set_defaults(handler=cmd_search)

    lin = sub.add_parser("lincheck", help="threaded harness + history checker")
    lin.add_argument("--impl", required=True)
    lin.add_argument("--k", type=int, default=3)
    lin.add_argument("--threads", type=int, default=4)
    lin.add_argument("--ops", type=int, default=6)
    lin.add_argument("--seed", type=int)
    lin.add_argument("--seeds", type=int, help="sweep seeds 0..N-1")
    lin.add_argument("--expect", choices=("accept", "reject"), default="accept")
    lin.add_argument("--out", help="directory for report files and figures")
    lin.set_defaults(handler=cmd_lincheck)

    return parser


def _usage(message: str) -> int:
    print(f"error: {message}", file=sys.stderr)
    return EXIT_USAGE


def _node_budget(args) -> int:
    if args.budget is not None:
        return args.budget
    env = os.environ.get("WRNLAB_BUDGET")
    if env:
        return int(env)
    return simulator.DEFAULT_NODE_BUDGET


def _parse_values(text: str | None, count: int | None = None):
    if text is None:
        return None
    values = [item.strip() for item in text.split(",") if item.strip()]
    if count is not None and len(values) != count:
        raise ContractViolation(f"expected {count} inputs, got {len(values)}")
    return values


def _run_config(args) -> dict:
    return {
        key: value
        for key, value in sorted(vars(args).items())
        if key != "handler" and value is not None
    }


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------


def _build_protocol(args):
    inputs = _parse_values(args.inputs)
    if args.protocol == "alg2":
        if args.k < 2:
            raise ContractViolation("alg2 needs --k >= 2")
        values = inputs or protocols.default_inputs(args.k)
        return protocols.alg2_protocol(args.k, values)
    if args.protocol == "alg4":
        values = inputs or protocols.default_inputs(2)
        if len(values) != 2:
            raise ContractViolation("alg4 takes exactly 2 inputs")
        return protocols.alg4_protocol(values[0], values[1])
    if args.protocol == "alg3":
        family = protocols.build_family(args.k, args.family)
        if args.participants:
            names = [int(p) for p in _parse_values(args.participants)]
        else:
            names = list(range(args.k))
        values = inputs or protocols.default_inputs(len(names))
        if len(values) != len(names):
            raise ContractViolation("one input per participant required")
        return protocols.alg3_protocol(args.k, family, dict(zip(names, values)))
    if args.protocol == "grouped":
        n = args.n if args.n is not None else 2 * args.k
        values = inputs or protocols.default_inputs(n)
        if len(values) != n:
            raise ContractViolation(f"grouped with --n {n} takes {n} inputs")
        return protocols.group_combinator(args.k, values)
    raise ContractViolation(f"unknown protocol {args.protocol!r}")


def cmd_simulate(args) -> int:
    try:
        protocol = _build_protocol(args)
    except ContractViolation as exc:
        return _usage(str(exc))

    rows: list[dict] = []
    trace_docs: list[dict] = []
    violations: list[str] = []

    if args.schedule == "exhaustive":
        report = simulator.explore_all(protocol, _node_budget(args))
        violations.extend(report.violations)
        for leaf in report.executions:
            decisions = leaf.decision_map()
            flags = protocols.decision_violations(protocol, decisions)
            violations.extend(flags)
            rows.append(_row_from_flags(_schedule_id(leaf.schedule), decisions, flags))
            if len(trace_docs) < args.max_traces:
                execution = simulator.run(protocol, leaf.schedule)
                trace_docs.append(reporting.trace_document(protocol, execution))
        executions = len(report.executions)
        complete = report.complete
    elif args.schedule == "random":
        if args.seed is None:
            return _usage("--schedule random requires --seed")
        if args.trials < 1:
            return _usage("--trials must be >= 1")

        def checks(decisions: dict) -> list[str]:
            flags = protocols.decision_violations(protocol, decisions)
            rows.append(_row_from_flags(len(rows), decisions, flags))
            return flags

        report = simulator.run_random(
            protocol, seed=args.seed, trials=args.trials, extra_checks=checks
        )
        for item in report.violations:
            violations.extend(item["flags"])
        executions = report.trials
        complete = True
    else:
        if not args.schedule_file:
            return _usage("--schedule file requires --schedule-file")
        schedules = _load_schedules(args.schedule_file)
        for index, schedule in enumerate(schedules):
            execution = simulator.run(protocol, schedule)
            flags = list(execution.violations)
            flags.extend(
                protocols.decision_violations(protocol, execution.decisions)
            )
            violations.extend(flags)
            rows.append(
                _row_from_flags(
                    _schedule_id(execution.schedule), execution.decisions, flags
                )
            )
            if len(trace_docs) < args.max_traces:
                trace_docs.append(reporting.trace_document(protocol, execution))
        executions = len(schedules)
        complete = True

    summary = {
        "summary": {
            "protocol": protocol.name,
            "executions": executions,
            "max_distinct_decisions": max(
                (row["distinct-decisions"] for row in rows), default=0
            ),
            "agreement_bound": protocol.agreement_bound,
            "violations": len(violations),
            "complete": complete,
            "config": _run_config(args),
        }
    }
    if violations:
        summary["summary"]["violation_samples"] = violations[:10]

    if args.format == "csv":
        reporting.write_aggregate_csv(rows, sys.stdout)
        print(json.dumps(summary, sort_keys=True), file=sys.stderr)
    else:
        reporting.write_json_lines(trace_docs, sys.stdout)
        print(json.dumps(summary, sort_keys=True))

    if args.out:
        reporting.write_report_directory(
            Path(args.out),
            rows,
            trace_docs or None,
            figure_title=f"{protocol.name}: distinct decisions per execution",
        )

    if not complete or violations:
        return EXIT_VIOLATION
    return EXIT_OK


def _schedule_id(schedule) -> str:
    return "-".join(str(pid) for pid, _ in schedule)


def _row_from_flags(schedule_id, decisions: dict, flags: list[str]) -> dict:
    valid = not any(flag.startswith("validity") for flag in flags)
    agreed = not any(flag.startswith("agreement") for flag in flags)
    return reporting.aggregate_row(schedule_id, decisions, valid, agreed)


def _load_schedules(path: str) -> list:
    with open(path) as stream:
        data = json.load(stream)
    if not isinstance(data, list):
        raise ContractViolation("schedule file must hold a JSON list")
    if data and not isinstance(data[0], list):
        data = [data]
    return data


# ---------------------------------------------------------------------------
# analyze
# ---------------------------------------------------------------------------


def cmd_analyze(args) -> int:
    inputs = _parse_values(args.inputs, count=2)
    try:
        binary = tuple(int(v) for v in inputs)
    except ValueError:
        return _usage("analyze needs binary integer inputs, e.g. --inputs 0,1")
    if args.protocol == "alg4":
        protocol = protocols.alg4_protocol(*binary)
    elif args.protocol == "alg2" and args.k == 2:
        protocol = protocols.alg2_protocol(2, binary)
    else:
        return _usage(
            f"analyze needs a 2-process protocol, got {args.protocol!r} k={args.k}"
        )

    valence_analysis = analysis.classify_valences(protocol)
    critical = analysis.find_critical(valence_analysis)
    labels = {id(config): f"C{i}" for i, config in enumerate(valence_analysis.nodes)}
    valences = {
        labels[id(config)]: valence_analysis.valence(config)
        for config in valence_analysis.nodes
    }

    case_report = analysis.sweep_case_checks(
        k_values=range(args.case_k_min, args.case_k_max + 1)
    )
    k2 = analysis.check_commutation(2, (BOTTOM, BOTTOM), 0, "p", 1, "q")

    doc = {
        "protocol": protocol.name,
        "inputs": list(binary),
        "initial": labels[id(valence_analysis.initial)],
        "initial_valence": valence_analysis.initial_valence(),
        "valences": valences,
        "critical": [labels[id(config)] for config in critical],
        "configs": {
            labels[id(config)]: _describe_config(config)
            for config in valence_analysis.nodes
        },
        "case_checks": {
            "k_range": [args.case_k_min, args.case_k_max],
            "absorption_checked": case_report.absorption_checked,
            "commutation_checked": case_report.commutation_checked,
            "counterexamples": len(case_report.counterexamples),
        },
        "k2_order_dependence": {
            "p_response_order_dependent": not k2.p_response_match,
            "q_response_order_dependent": not k2.q_response_match,
        },
        "config": _run_config(args),
    }
    print(json.dumps(doc, sort_keys=True))

    if args.out:
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / "analysis.json").write_text(
            json.dumps(doc, indent=2, sort_keys=True) + "\n"
        )
        tag_counts: dict[str, int] = {}
        for tag in valences.values():
            tag_counts[tag] = tag_counts.get(tag, 0) + 1
        reporting.render_outcome_bars(
            tag_counts, out_dir / "valences.png", "configuration valences"
        )

    if case_report.counterexamples:
        return EXIT_VIOLATION
    return EXIT_OK


def _describe_config(config) -> dict:
    return {
        "processes": {
            str(proc.pid): {
                "status": proc.status,
                "decision": value_to_json(proc.decision),
                "responses": [value_to_json(resp) for _, resp in proc.view],
            }
            for proc in config.processes
        },
        "objects": {
            oid: [value_to_json(cell) for cell in state.cells]
            for oid, state in config.objects
        },
    }


# ---------------------------------------------------------------------------
# search
# ---------------------------------------------------------------------------


def cmd_search(args) -> int:
    if args.depth < 1:
        return _usage("--depth must be >= 1")
    if args.k < 2:
        return _usage("--k must be >= 2")
    budget = args.budget if args.budget is not None else _node_budget(args)
    report = analysis.solvability_search(
        args.k, args.depth, n_objects=args.objects, pattern_budget=budget
    )
    for verdict in report.verdicts:
        print(json.dumps(verdict.to_json(), sort_keys=True))
    solvable = len(report.solvable())
    unsolvable = len(report.unsolvable())
    summary = {
        "summary": {
            "k": args.k,
            "depth": args.depth,
            "objects": args.objects,
            "patterns": len(report.verdicts),
            "solvable": solvable,
            "unsolvable": unsolvable,
            "complete": report.complete,
            "config": _run_config(args),
        }
    }
    print(json.dumps(summary, sort_keys=True))

    if args.out:
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        with (out_dir / "verdicts.jsonl").open("w") as stream:
            reporting.write_json_lines(
                (v.to_json() for v in report.verdicts), stream
            )
        reporting.render_outcome_bars(
            {"SOLVABLE": solvable, "UNSOLVABLE": unsolvable},
            out_dir / "verdicts.png",
            f"pattern verdicts (k={args.k}, depth={args.depth})",
        )

    if not report.complete:
        print("warning: search truncated by budget", file=sys.stderr)
        return EXIT_VIOLATION
    if args.expect == "solvable" and solvable == 0:
        return EXIT_VIOLATION
    if args.expect == "unsolvable" and solvable > 0:
        return EXIT_VIOLATION
    return EXIT_OK


# ---------------------------------------------------------------------------
# lincheck
# ---------------------------------------------------------------------------


def cmd_lincheck(args) -> int:
    if args.impl not in lincheck.IMPLEMENTATIONS:
        return _usage(
            f"unknown implementation {args.impl!r}; "
            f"choose from {', '.join(lincheck.IMPLEMENTATIONS)}"
        )
    if args.seed is None and args.seeds is None:
        return _usage("provide --seed N or --seeds N")
    seeds = [args.seed] if args.seed is not None else list(range(args.seeds))
    spec = lincheck.WrnSequentialSpec(args.k)
    results = []
    histories = []
    accepted = 0
    for seed in seeds:
        history = lincheck.stress_harness(
            args.impl, args.k, args.threads, args.ops, seed
        )
        verdict = lincheck.check_linearizable(history, spec)
        if verdict.accepted:
            accepted += 1
        results.append({"seed": seed, **verdict.to_json()})
        histories.append(history)
        print(json.dumps(results[-1], sort_keys=True))
    rejected = len(seeds) - accepted
    summary = {
        "summary": {
            "impl": args.impl,
            "seeds": len(seeds),
            "accepted": accepted,
            "rejected": rejected,
            "expect": args.expect,
            "config": _run_config(args),
        }
    }
    print(json.dumps(summary, sort_keys=True))

    if args.out:
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        with (out_dir / "histories.jsonl").open("w") as stream:
            for history in histories:
                for line in lincheck.history_to_json_lines(history):
                    stream.write(json.dumps(line, sort_keys=True) + "\n")
        with (out_dir / "verdicts.jsonl").open("w") as stream:
            reporting.write_json_lines(results, stream)
        reporting.render_outcome_bars(
            {"accepted": accepted, "rejected": rejected},
            out_dir / "verdicts.png",
            f"{args.impl}: verdicts over {len(seeds)} seed(s)",
        )

    if args.expect == "accept":
        return EXIT_OK if rejected == 0 else EXIT_VIOLATION
    return EXIT_OK if rejected >= 1 else EXIT_VIOLATION


if __name__ == "__main__":
    sys.exit(main())
