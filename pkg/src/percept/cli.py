"""Command-line front end: run scenarios, sweep budgets, replay knapsacks.

Exit codes: 0 when a run reaches its termination belief, 2 when it goes
quiescent or hits the simulated wall, 1 on load or configuration errors.
All randomness flows from one seed (--seed, then PERCEPT_SEED, then the
scenario's control section); outputs never contain wall-clock time.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from .controller import Controller, audit_report
from .errors import ScenarioError
from .model_base import load_scenario
from .planner import KnapsackInstance, solve_approx, solve_exact

TRACE_COLUMNS = ("step", "action_kind", "target", "value", "cost", "outcome", "finish_time")


def trace_rows(report: dict, level: int = 1) -> list[tuple]:
    """Flatten a report into trace rows (one per selected action).

    Level 2 adds the unselected candidates with an empty outcome column.
    """
    rows = []
    for step in report["steps"]:
        by_id = {c["id"]: c for c in step["candidates"]}
        outcome_of = {cid: (out, fin) for cid, out, fin in step["completions"]}
        for cid in sorted(step["plan"]["selected"]):
            cand = by_id[cid]
            outcome, finish = outcome_of.get(cid, ("cancelled", ""))
            rows.append(
                (
                    step["step"],
                    cand["kind"],
                    cand["target"],
                    f"{cand['value']:.6g}",
                    cand["cost"],
                    outcome,
                    finish,
                )
            )
        if level >= 2:
            for cand in step["candidates"]:
                if cand["id"] in step["plan"]["selected"]:
                    continue
                rows.append(
                    (
                        step["step"],
                        cand["kind"],
                        cand["target"],
                        f"{cand['value']:.6g}",
                        cand["cost"],
                        "",
                        "",
                    )
                )
    return rows


def write_trace(path: Path, report: dict, level: int = 1) -> None:
    lines = ["\t".join(TRACE_COLUMNS)]
    for row in trace_rows(report, level):
        lines.append("\t".join(str(x) for x in row))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_report(path: Path, report: dict) -> None:
    path.write_text(
        json.dumps(report, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


def _seed_from(args) -> int | None:
    if args.seed is not None:
        return args.seed
    env = os.environ.get("PERCEPT_SEED")
    return int(env) if env else None


def cmd_run(args) -> int:
    try:
        mb = load_scenario(args.scenario)
        ctl = Controller(
            mb,
            seed=_seed_from(args),
            budget=args.budget,
            epsilon=args.epsilon,
        )
        report = ctl.run()
    except (ScenarioError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_trace(out / "trace.tsv", report, args.trace_level)
    write_report(out / "report.json", report)
    problems = audit_report(report)
    for p in problems:
        print(f"audit: {p}", file=sys.stderr)
    winner = report["winner"]
    print(
        f"{report['terminated_reason']} after {len(report['steps'])} steps, "
        f"simulated {report['simulated_time']} ms"
    )
    if winner:
        print(f"winner: {winner['label']} at {winner['node']} ({winner['belief']:.4f})")
    if problems:
        return 1
    return 0 if report["terminated_reason"] == "terminated" else 2


def cmd_sweep(args) -> int:
    budgets = args.budgets
    if not budgets:
        print("error: sweep needs at least one budget", file=sys.stderr)
        return 2
    if any(b2 <= b1 for b1, b2 in zip(budgets, budgets[1:])):
        print("error: budgets must be strictly increasing", file=sys.stderr)
        return 2
    try:
        mb = load_scenario(args.scenario)
    except (ScenarioError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    rows = []
    minimum_t = None
    for budget in budgets:
        ctl = Controller(mb, seed=_seed_from(args), budget=budget, epsilon=args.epsilon)
        report = ctl.run()
        final = 0.0
        if report["winner"]:
            final = report["winner"]["belief"]
        terminated = report["terminated_reason"] == "terminated"
        rows.append((budget, terminated, f"{final:.4f}", report["simulated_time"]))
        if terminated and minimum_t is None:
            minimum_t = budget
    print("budget_T\tterminated\tfinal_belief\tsimulated_time")
    for row in rows:
        print("\t".join(str(x) for x in row))
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        lines = ["budget_T\tterminated\tfinal_belief\tsimulated_time"]
        lines += ["\t".join(str(x) for x in row) for row in rows]
        (out / "sweep.tsv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    if minimum_t is None:
        print("no budget reached the termination belief")
        return 2
    print(f"minimum sufficient budget_T: {minimum_t}")
    return 0


def cmd_knapsack(args) -> int:
    try:
        raw = json.loads(Path(args.instance).read_text(encoding="utf-8"))
        inst = KnapsackInstance.from_dict(raw)
        if args.exact:
            plan = solve_exact(inst)
        else:
            plan = solve_approx(inst, args.epsilon if args.epsilon else 0.1)
    except (ValueError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(json.dumps(plan.to_dict(), indent=2, sort_keys=True))
    return 0


def cmd_validate(args) -> int:
    try:
        mb = load_scenario(args.scenario)
    except (ScenarioError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(
        f"OK: {len(mb.nodes)} models, {len(mb.groups)} groups, "
        f"{len(mb.actions)} action templates"
    )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="percept",
        description="Utility-guided control for hierarchical Bayesian recognition",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a scenario end to end")
    run.add_argument("--scenario", required=True)
    run.add_argument("--seed", type=int, default=None)
    run.add_argument("--budget", type=int, default=None)
    run.add_argument("--epsilon", type=float, default=None)
    run.add_argument("--out", default="out")
    run.add_argument("--trace-level", type=int, default=1, choices=(0, 1, 2))
    run.set_defaults(func=cmd_run)

    sweep = sub.add_parser("sweep", help="run once per budget and summarize")
    sweep.add_argument("--scenario", required=True)
    sweep.add_argument("--seed", type=int, default=None)
    sweep.add_argument("--epsilon", type=float, default=None)
    sweep.add_argument("--out", default=None)
    sweep.add_argument("--budgets", type=int, nargs="*", default=[])
    sweep.set_defaults(func=cmd_sweep)

    knap = sub.add_parser("knapsack", help="solve one knapsack instance from JSON")
    knap.add_argument("--instance", required=True)
    knap.add_argument("--exact", action="store_true")
    knap.add_argument("--epsilon", type=float, default=None)
    knap.set_defaults(func=cmd_knapsack)

    val = sub.add_parser("validate", help="load and validate a scenario")
    val.add_argument("--scenario", required=True)
    val.set_defaults(func=cmd_validate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
