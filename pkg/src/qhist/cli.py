"""Command-line front-end.

Subcommands: consistency, probabilities, compatibility, enumerate,
truth-functional, demo. Reports are deterministic: probabilities print with
12 significant digits, witness magnitudes in scientific notation, and the
machine-readable format carries every number shown in the table.

Exit codes: 0 for a positive verdict (all consistent, all compatible, found,
ran), 1 for a negative verdict, 2 for load or usage errors.
"""

from __future__ import annotations

import argparse
import itertools
import json
import math
import sys
from pathlib import Path
from typing import Sequence

from .errors import BudgetExceeded, DimensionCapExceeded, QhistError, ScenarioFormatError
from .frameworks import (
    are_compatible,
    enumerate_frameworks,
    universal_truth_functional_exists,
)
from .histories import decoherence_matrix, is_consistent
from .models import (
    build_cat,
    build_single_spin,
    build_stern_gerlach,
    cat_suppression_curve,
    measurement_framework_selection_report,
)
from .scenario_io import load_scenario, save_scenario
from . import events, histories

AXES = {"z": (0.0, 0.0, 1.0), "x": (1.0, 0.0, 0.0), "y": (0.0, 1.0, 0.0)}

REPORT_SCHEMA = {
    "$schema": "http://json-schema.org/draft-07/schema#",
    "type": "object",
    "required": ["command", "scenario", "exit_status"],
    "properties": {
        "command": {"type": "string"},
        "scenario": {"type": "string"},
        "exit_status": {"type": "integer", "minimum": 0, "maximum": 2},
        "tolerance": {"type": ["number", "null"]},
        "condition": {"type": "string", "enum": ["medium", "weak"]},
        "families": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["name", "consistent", "max_offdiagonal"],
                "properties": {
                    "name": {"type": "string"},
                    "consistent": {"type": "boolean"},
                    "max_offdiagonal": {"type": "number"},
                    "witness": {"type": ["array", "null"]},
                    "probabilities": {"type": ["array", "null"]},
                    "formal_weights": {"type": ["array", "null"]},
                },
            },
        },
        "pairs": {"type": "array"},
        "edges": {"type": "array"},
        "frameworks": {"type": "array"},
        "equivalence_classes": {"type": "array"},
        "candidates": {"type": "integer"},
        "exists": {"type": "boolean"},
        "assignment": {"type": ["array", "null"]},
        "search_space": {"type": "integer"},
        "rows": {"type": "array"},
        "suppression": {"type": "array"},
        "env": {"type": "integer"},
        "theta": {"type": "number"},
        "init_direction": {"type": "array"},
        "measure_direction": {"type": "array"},
        "w_direction": {"type": "array"},
        "scenario_file": {"type": "string"},
    },
}


def fmt_prob(p: float) -> str:
    return f"{p:.12g}"


def fmt_witness(w: float) -> str:
    return f"{w:.6e}"


def _parse_direction(text: str):
    if text in AXES:
        return AXES[text]
    if text.startswith("-") and text[1:] in AXES:
        return tuple(-c for c in AXES[text[1:]])
    parts = text.split(",")
    if len(parts) != 3:
        raise ValueError(f"direction must be an axis name or 'a,b,c', got {text!r}")
    vec = [float(p) for p in parts]
    norm = math.sqrt(sum(c * c for c in vec))
    if norm == 0.0:
        raise ValueError("direction must be nonzero")
    return tuple(c / norm for c in vec)


def _emit(report: dict, table: str, fmt: str, output: str | None) -> None:
    text = (
        json.dumps(report, indent=2, sort_keys=True) + "\n" if fmt == "machine" else table
    )
    if output:
        Path(output).write_text(text)
    else:
        sys.stdout.write(text)


def _pick_families(scenario, names: Sequence[str] | None) -> list[str]:
    if names:
        missing = [n for n in names if n not in scenario.families]
        if missing:
            raise QhistError(f"unknown family {missing[0]!r}")
        return list(names)
    return sorted(scenario.families)


def _consistency_tol(args, scenario) -> float | None:
    # precedence: CLI flag, then scenario file, then the built-in default
    if args.tol is not None:
        return args.tol
    return scenario.consistency_tol


def _probability_lines(pairs, indent: str = "  ") -> list[str]:
    width = max(len(label) for label, _ in pairs)
    return [f"{indent}{label:<{width}}  {fmt_prob(p)}" for label, p in pairs]


def cmd_consistency(args) -> int:
    scenario = load_scenario(args.scenario)
    names = _pick_families(scenario, args.family)
    tol = _consistency_tol(args, scenario)
    condition = "weak" if args.weak_condition else "medium"

    rows = []
    lines = [f"scenario: {scenario.name}", ""]
    all_consistent = True
    for name in names:
        d = decoherence_matrix(scenario.families[name], scenario.tolerances)
        report = is_consistent(d, tol, condition)
        all_consistent &= report.consistent
        row = {
            "name": name,
            "consistent": report.consistent,
            "max_offdiagonal": report.max_offdiag,
            "witness": None if report.consistent else list(report.witness),
            "tolerance": report.tol,
            "probabilities": None,
            "formal_weights": None,
        }
        verdict = "consistent" if report.consistent else "INCONSISTENT"
        lines.append(
            f"family {name}: {verdict}  max|D(a,b)| = {fmt_witness(report.max_offdiag)}"
            f"  (tol {fmt_witness(report.tol)})"
        )
        if not report.consistent:
            lines.append(f"  witness pair: ({report.witness[0]}) , ({report.witness[1]})")
        if report.consistent:
            probs = histories.probabilities(d, tol, condition)
            row["probabilities"] = [[label, p] for label, p in probs]
            lines.append("  probabilities:")
            lines.extend(_probability_lines(probs, "    "))
        elif args.raw_weights:
            weights = list(zip(d.labels, (float(w) for w in d.diagonal_weights())))
            row["formal_weights"] = [[label, w] for label, w in weights]
            lines.append("  formal weights (not probabilities):")
            lines.extend(_probability_lines(weights, "    "))
        rows.append(row)
        lines.append("")

    status = 0 if all_consistent else 1
    report = {
        "command": args.command,
        "scenario": scenario.name,
        "condition": condition,
        "families": rows,
        "exit_status": status,
    }
    _emit(report, "\n".join(lines).rstrip() + "\n", args.format, args.output)
    return status


def cmd_compatibility(args) -> int:
    scenario = load_scenario(args.scenario)
    names = _pick_families(scenario, args.family)
    tol = _consistency_tol(args, scenario)

    pairs, edges = [], []
    lines = [f"scenario: {scenario.name}", ""]
    for a, b in itertools.combinations(names, 2):
        verdict = are_compatible(
            scenario.families[a], scenario.families[b], tol, scenario.tolerances
        )
        pairs.append(
            {
                "pair": [a, b],
                "compatible": verdict.compatible,
                "reason": verdict.reason,
                "witness": verdict.witness,
            }
        )
        if verdict.compatible:
            lines.append(f"{a} , {b}: compatible")
        else:
            edges.append([a, b])
            witness = "" if verdict.witness is None else f"  witness {fmt_witness(verdict.witness)}"
            lines.append(f"{a} , {b}: INCOMPATIBLE ({verdict.reason}){witness}")
    lines.append("")
    lines.append("incompatibility edges:")
    if edges:
        lines.extend(f"  {a} -- {b}" for a, b in edges)
    else:
        lines.append("  none")

    status = 0 if not edges else 1
    report = {
        "command": "compatibility",
        "scenario": scenario.name,
        "pairs": pairs,
        "edges": edges,
        "exit_status": status,
    }
    _emit(report, "\n".join(lines) + "\n", args.format, args.output)
    return status


def cmd_enumerate(args) -> int:
    scenario = load_scenario(args.scenario)
    grid = [slot.split(",") for slot in args.slot]
    tol = _consistency_tol(args, scenario)
    result = enumerate_frameworks(scenario, grid, tol, args.budget)

    lines = [
        f"scenario: {scenario.name}",
        f"candidate families: {result.n_candidates}",
        f"consistent frameworks: {len(result.frameworks)}",
        "",
    ]
    frameworks = []
    for fw in result.frameworks:
        frameworks.append(
            {
                "name": fw.name,
                "grid_indices": list(fw.grid_indices),
                "max_offdiagonal": fw.report.max_offdiag,
                "probabilities": [[label, p] for label, p in fw.probabilities],
            }
        )
        lines.append(f"framework {fw.name}  max|D(a,b)| = {fmt_witness(fw.report.max_offdiag)}")
        lines.extend(_probability_lines(fw.probabilities))
    lines.append("")
    lines.append("incompatibility edges:")
    if result.graph.edges:
        lines.extend(f"  {a} -- {b}" for a, b in result.graph.edges)
    else:
        lines.append("  none")
    lines.append("equivalence classes (identical decoherence matrices):")
    lines.extend("  {" + ", ".join(members) + "}" for members in result.equivalence_classes)

    status = 0 if result.frameworks else 1
    report = {
        "command": "enumerate",
        "scenario": scenario.name,
        "candidates": result.n_candidates,
        "frameworks": frameworks,
        "edges": [list(e) for e in result.graph.edges],
        "equivalence_classes": [list(c) for c in result.equivalence_classes],
        "exit_status": status,
    }
    _emit(report, "\n".join(lines) + "\n", args.format, args.output)
    return status


def cmd_truth_functional(args) -> int:
    scenario = load_scenario(args.scenario)
    names = _pick_families(scenario, args.family)
    tol = _consistency_tol(args, scenario)
    result = universal_truth_functional_exists(
        [scenario.families[n] for n in names],
        names=names,
        tol=tol,
        budget=args.budget,
        tolerances=scenario.tolerances,
    )
    lines = [
        f"scenario: {scenario.name}",
        f"families: {', '.join(names)}",
        f"search space: {result.search_space} assignments"
        f" ({result.n_searched} after support pruning)",
        f"containment constraints: {result.n_constraints}",
        "",
    ]
    if result.exists:
        lines.append("universal truth functional: EXISTS")
        for fam, hist in result.assignment:
            lines.append(f"  true in {fam}: ({hist.label})")
    else:
        lines.append("universal truth functional: none exists (search exhausted)")

    status = 0 if result.exists else 1
    report = {
        "command": "truth-functional",
        "scenario": scenario.name,
        "exists": result.exists,
        "assignment": (
            None
            if result.assignment is None
            else [[fam, hist.label] for fam, hist in result.assignment]
        ),
        "search_space": result.search_space,
        "n_searched": result.n_searched,
        "n_constraints": result.n_constraints,
        "exit_status": status,
    }
    _emit(report, "\n".join(lines) + "\n", args.format, args.output)
    return status


def _demo_spin(args):
    init = _parse_direction(args.init)
    scenario = build_single_spin(init)
    measure = args.measure
    if measure not in scenario.families:
        direction = _parse_direction(measure)
        dec = events.spin_decomposition(direction, "m")
        scenario.decompositions["m"] = dec
        scenario.families["m"] = histories.family_on_grid(
            scenario.dynamics, [dec], scenario.initial, scenario.t0
        )
        measure = "m"
    d = decoherence_matrix(scenario.families[measure], scenario.tolerances)
    probs = histories.probabilities(d, args.tol)
    lines = [f"single spin prepared along {args.init}, measured along {args.measure}", ""]
    lines.extend(_probability_lines(probs))
    payload = {
        "init_direction": list(init),
        "measure_direction": list(_parse_direction(args.measure)),
        "rows": [[label, p] for label, p in probs],
    }
    return scenario, payload, lines


def _demo_stern_gerlach(args):
    w = _parse_direction(args.w)
    init = _parse_direction(args.init)
    v_flags = args.v if args.v else ["x", "y", "z"]
    candidates = [(text, _parse_direction(text)) for text in v_flags]
    scenario = build_stern_gerlach(w, args.env, init, candidates)
    report = measurement_framework_selection_report(scenario, candidates, args.tol)
    lines = [
        f"apparatus measuring along w = {args.w} with {args.env} environment qubit(s)",
        "",
        "framework selection:",
    ]
    rows: list[dict] = []
    payload = {
        "env": args.env,
        "w_direction": list(w),
        "init_direction": list(init),
        "rows": rows,
    }
    for row in report.rows:
        verdict = "consistent" if row.consistent else "INCONSISTENT"
        lines.append(f"  v = {row.label}: {verdict}  witness {fmt_witness(row.witness)}")
        if row.probabilities:
            lines.extend(_probability_lines(row.probabilities, "    "))
        rows.append(
            {
                "label": row.label,
                "consistent": row.consistent,
                "witness": row.witness,
                "probabilities": (
                    None
                    if row.probabilities is None
                    else [[label, p] for label, p in row.probabilities]
                ),
            }
        )
    return scenario, payload, lines


def _demo_cat(args):
    curve = cat_suppression_curve(args.theta, args.env)
    scenario = build_cat(args.env, args.theta)
    d = decoherence_matrix(scenario.families["cat"], scenario.tolerances)
    probs = histories.probabilities(d, args.tol)
    lines = [
        f"cat coupled to n environment qubit(s) at angle theta = {fmt_prob(args.theta)}",
        "",
        "branch coherence suppression (|cos theta|^n):",
        "  n  suppression",
    ]
    for n, s in curve:
        lines.append(f"  {n}  {fmt_witness(s)}")
    lines.append("")
    lines.append(f"cat framework probabilities at n = {args.env}:")
    lines.extend(_probability_lines(probs))
    payload = {
        "env": args.env,
        "theta": args.theta,
        "suppression": [[n, s] for n, s in curve],
        "rows": [[label, p] for label, p in probs],
    }
    return scenario, payload, lines


def cmd_demo(args) -> int:
    builders = {
        "spin": _demo_spin,
        "stern-gerlach": _demo_stern_gerlach,
        "cat": _demo_cat,
    }
    scenario, payload, lines = builders[args.name](args)
    scenario_path = args.scenario_out or f"{scenario.name}.scenario.json"
    save_scenario(scenario, scenario_path)
    lines.append("")
    lines.append(f"scenario written to {scenario_path}")
    report = {
        "command": "demo",
        "scenario": scenario.name,
        "scenario_file": str(scenario_path),
        "exit_status": 0,
        **payload,
    }
    _emit(report, "\n".join(lines) + "\n", args.format, args.output)
    return 0


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--tol", type=float, default=None, help="consistency tolerance override")
    p.add_argument(
        "--format", choices=("table", "machine"), default="table", help="output format"
    )
    p.add_argument("--output", default=None, help="write the report to this path")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qhist",
        description="Decoherence functionals, consistency and framework analysis "
        "for finite-dimensional quantum systems",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("consistency", help="consistency verdicts and probabilities")
    p.add_argument("scenario", help="scenario file path")
    p.add_argument("--family", action="append", help="family name (repeatable; default all)")
    p.add_argument(
        "--weak-condition",
        action="store_true",
        help="test only the real part of each off-diagonal entry",
    )
    p.add_argument(
        "--raw-weights",
        action="store_true",
        help="show diagonal weights of inconsistent families (formal weights, "
        "not probabilities)",
    )
    _add_common(p)
    p.set_defaults(func=cmd_consistency)

    p = sub.add_parser("probabilities", help="alias of consistency")
    p.add_argument("scenario")
    p.add_argument("--family", action="append")
    p.add_argument("--weak-condition", action="store_true")
    p.add_argument("--raw-weights", action="store_true")
    _add_common(p)
    p.set_defaults(func=cmd_consistency)

    p = sub.add_parser("compatibility", help="pairwise single-framework verdicts")
    p.add_argument("scenario")
    p.add_argument("--family", action="append")
    _add_common(p)
    p.set_defaults(func=cmd_compatibility)

    p = sub.add_parser("enumerate", help="test every candidate framework on a grid")
    p.add_argument("scenario")
    p.add_argument(
        "--slot",
        action="append",
        required=True,
        help="comma-separated candidate decomposition names for one time slot "
        "(repeat per slot)",
    )
    p.add_argument("--budget", type=int, default=10**6)
    _add_common(p)
    p.set_defaults(func=cmd_enumerate)

    p = sub.add_parser("truth-functional", help="search for a universal truth functional")
    p.add_argument("scenario")
    p.add_argument("--family", action="append")
    p.add_argument("--budget", type=int, default=2**20)
    _add_common(p)
    p.set_defaults(func=cmd_truth_functional)

    p = sub.add_parser("demo", help="build a model scenario, analyze it, write the file")
    demo_sub = p.add_subparsers(dest="name", required=True)

    d = demo_sub.add_parser("spin", help="single spin, one measurement axis")
    d.add_argument("--init", default="z", help="preparation axis or 'a,b,c'")
    d.add_argument("--measure", default="z", help="measurement axis or 'a,b,c'")
    d.add_argument("--scenario-out", default=None, help="scenario file path")
    _add_common(d)
    d.set_defaults(func=cmd_demo, name="spin")

    d = demo_sub.add_parser("stern-gerlach", help="spin + pointer + environment")
    d.add_argument("--w", default="z", help="apparatus axis")
    d.add_argument("--init", default="z", help="spin preparation axis")
    d.add_argument("--env", type=int, default=0, help="environment qubits")
    d.add_argument("--v", action="append", help="candidate axis (repeatable; default x,y,z)")
    d.add_argument("--scenario-out", default=None)
    _add_common(d)
    d.set_defaults(func=cmd_demo, name="stern-gerlach")

    d = demo_sub.add_parser("cat", help="cat-state decoherence")
    d.add_argument("--env", type=int, default=3, help="environment qubits")
    d.add_argument("--theta", type=float, default=0.3, help="coupling angle in (0, pi/2]")
    d.add_argument("--scenario-out", default=None)
    _add_common(d)
    d.set_defaults(func=cmd_demo, name="cat")

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ScenarioFormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (BudgetExceeded, DimensionCapExceeded) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (QhistError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
