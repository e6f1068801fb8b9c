"""Build (and sanity-run) the bundled brigade scenario.

Outcome tables are factored as p(child, outcome | parent) =
P(child | parent) * Q(outcome | child), where P blends the linking
conditional table toward the marginal child distribution with a
per-action discrimination knob gamma (gamma=1 reproduces the table,
gamma=0 is parent-independent and therefore worth exactly zero).

Run:  python3 tools/gen_brigade_scenario.py [--check]
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

OUT = Path(__file__).resolve().parents[1] / "src" / "percept" / "scenarios" / "brigade.json"

# -- model space -------------------------------------------------------------

COMPANY = ["team", "tf-hq", "battery"]          # + "other" appended by loader
FORCE = ["task-force", "catapult-battalion"]    # + "other"
COMPANY_PRIORS = {"team": 0.28, "tf-hq": 0.14, "battery": 0.28}
FORCE_PRIORS = {"task-force": 0.30, "catapult-battalion": 0.25}
BRIGADE_PRIOR = 0.5

CPT_FORCE = {  # p(force | brigade-level)
    "brigade": [0.45, 0.35, 0.20],
    "other": [0.05, 0.05, 0.90],
}
CPT_COMPANY = {  # p(company | force)
    "task-force": [0.50, 0.25, 0.04, 0.21],
    "catapult-battalion": [0.05, 0.05, 0.66, 0.24],
    "other": [0.08, 0.04, 0.08, 0.80],
}

# -- action discrimination and outcome fidelity knobs -------------------------

GAMMA = {
    "refine_company": 1.00,
    "search_company": 0.075,
    "class_company": 0.20,
    "terrain_company": 0.135,
    "search_force": 0.45,
    "terrain_force": 0.22,
    "refineform_force": 0.26,
}

Q_REFINE = {  # p(outcome | true company type), outcomes looks-*
    "team": [0.58, 0.14, 0.11, 0.17],
    "tf-hq": [0.15, 0.56, 0.10, 0.19],
    "battery": [0.10, 0.11, 0.60, 0.19],
    "other": [0.17, 0.15, 0.17, 0.51],
}
Q_CLASS = {
    "team": [0.90, 0.04, 0.03, 0.03],
    "tf-hq": [0.05, 0.88, 0.03, 0.04],
    "battery": [0.03, 0.04, 0.90, 0.03],
    "other": [0.08, 0.07, 0.08, 0.77],
}
Q_SEARCH_UNIT = {
    "team": [0.93, 0.07],
    "tf-hq": [0.93, 0.07],
    "battery": [0.93, 0.07],
    "other": [0.15, 0.85],
}
Q_TERRAIN_UNIT = {
    "team": [0.68, 0.26, 0.06],
    "tf-hq": [0.68, 0.26, 0.06],
    "battery": [0.68, 0.26, 0.06],
    "other": [0.30, 0.40, 0.30],
}
Q_SEARCH_FORCE = {
    "task-force": [0.94, 0.06],
    "catapult-battalion": [0.94, 0.06],
    "other": [0.12, 0.88],
}
Q_TERRAIN_FORCE = {
    "task-force": [0.74, 0.21, 0.05],
    "catapult-battalion": [0.74, 0.21, 0.05],
    "other": [0.26, 0.42, 0.32],
}
Q_REFINEFORM = {
    "task-force": [0.64, 0.26, 0.10],
    "catapult-battalion": [0.26, 0.60, 0.14],
    "other": [0.16, 0.20, 0.64],
}
Q_TERRAIN_BRIGADE = {
    "brigade": [0.78, 0.17, 0.05],
    "other": [0.20, 0.42, 0.38],
}

COSTS = {
    "refine-type": 400,
    "classify": 1320,
    "terrain-unit": 820,
    "search-unit": 210,
    "search-force": 210,
    "terrain-force": 820,
    "refine-formation": 2100,
    "search-brigade": 210,
    "terrain-brigade": 820,
}

CONTROL = {
    "budget_T": 5720,
    "epsilon": 0.02,
    "processors": 4,
    "termination_belief": 0.99,
    "seed": 7,
    "max_wall": 60000,
    "value_mode": "OUTCOME_MARGINAL",
}

CONFIRM_BELIEF = 0.78


def full_labels(names, priors):
    labels = list(names) + ["other"]
    p = [priors[n] for n in names]
    p.append(1.0 - sum(p))
    return labels, np.array(p)


def blended(cpt_rows, parent_labels, child_labels, gamma, parent_priors):
    """P(child|parent) pulled toward the prior-weighted child marginal."""
    rows = np.array([cpt_rows[p] for p in parent_labels])
    marginal = parent_priors @ rows
    return (1 - gamma) * marginal[None, :] + gamma * rows


def outcome_table(kind, parent_labels, child_labels, p_rows, q, outcomes):
    """entries[c][o][p] = P(c|p) * Q(o|c)."""
    qm = np.array([q[c] for c in child_labels])
    entries = np.einsum("pc,co->cop", p_rows, qm)
    return {
        "action_kind": kind,
        "child_labels": list(child_labels),
        "outcomes": list(outcomes),
        "parent_labels": list(parent_labels),
        "entries": entries.tolist(),
    }


def vehicle_ring(cx, cy, count):
    offsets = [
        (0.0, 0.0), (1.3, 0.0), (-1.3, 0.0), (0.0, 1.3), (0.0, -1.3),
        (0.95, 0.95), (-0.95, 0.95), (0.95, -0.95), (-0.95, -0.95),
        (1.6, 0.8), (-1.6, -0.8), (0.8, 1.6),
    ]
    return [(cx + dx, cy + dy) for dx, dy in offsets[:count]]


def build() -> dict:
    company_labels, company_prior = full_labels(COMPANY, COMPANY_PRIORS)
    force_labels, force_prior = full_labels(FORCE, FORCE_PRIORS)
    brigade_labels = ["brigade", "other"]
    brigade_prior = np.array([BRIGADE_PRIOR, 1.0 - BRIGADE_PRIOR])

    models = [
        {
            "id": "brigade",
            "label": "Brigade",
            "prior": BRIGADE_PRIOR,
            "isa_group": "brigade-level",
            "min_parts": 1,
            "parts": [
                {"child": "task-force", "cpt": "cpt_force"},
                {"child": "catapult-battalion", "cpt": "cpt_force"},
            ],
        },
        {
            "id": "task-force",
            "label": "Task Force",
            "prior": FORCE_PRIORS["task-force"],
            "isa_group": "force",
            "min_parts": 2,
            "parts": [
                {"child": "team", "cpt": "cpt_company"},
                {"child": "tf-hq", "cpt": "cpt_company"},
            ],
        },
        {
            "id": "catapult-battalion",
            "label": "Catapult Battalion",
            "prior": FORCE_PRIORS["catapult-battalion"],
            "isa_group": "force",
            "min_parts": 1,
            "parts": [{"child": "battery", "cpt": "cpt_company"}],
        },
        {"id": "team", "label": "Team", "prior": COMPANY_PRIORS["team"], "isa_group": "company"},
        {"id": "tf-hq", "label": "Task Force HQ", "prior": COMPANY_PRIORS["tf-hq"], "isa_group": "company"},
        {"id": "battery", "label": "Catapult Battery", "prior": COMPANY_PRIORS["battery"], "isa_group": "company"},
    ]

    cpts = {
        "cpt_force": {
            "parent_labels": brigade_labels,
            "child_labels": force_labels,
            "rows": [CPT_FORCE["brigade"], CPT_FORCE["other"]],
        },
        "cpt_company": {
            "parent_labels": force_labels,
            "child_labels": company_labels,
            "rows": [CPT_COMPANY[f] for f in force_labels],
        },
    }

    p_unit = lambda g: blended(CPT_COMPANY, force_labels, company_labels, g, force_prior)
    p_force = lambda g: blended(CPT_FORCE, brigade_labels, force_labels, g, brigade_prior)

    outcome_tables = {
        "refine_company": outcome_table(
            "REFINE-TYPE", force_labels, company_labels,
            p_unit(GAMMA["refine_company"]), Q_REFINE,
            ["looks-team", "looks-hq", "looks-battery", "ambiguous"],
        ),
        "class_company": outcome_table(
            "CLASSIFICATION", force_labels, company_labels,
            p_unit(GAMMA["class_company"]), Q_CLASS,
            ["class-team", "class-hq", "class-battery", "class-unknown"],
        ),
        "search_company": outcome_table(
            "SEARCH", force_labels, company_labels,
            p_unit(GAMMA["search_company"]), Q_SEARCH_UNIT,
            ["match", "no_match"],
        ),
        "terrain_company": outcome_table(
            "TERRAIN-SUPPORT", force_labels, company_labels,
            p_unit(GAMMA["terrain_company"]), Q_TERRAIN_UNIT,
            ["supports", "neutral", "contradicts"],
        ),
        "search_force": outcome_table(
            "SEARCH", brigade_labels, force_labels,
            p_force(GAMMA["search_force"]), Q_SEARCH_FORCE,
            ["match", "no_match"],
        ),
        "terrain_force": outcome_table(
            "TERRAIN-SUPPORT", brigade_labels, force_labels,
            p_force(GAMMA["terrain_force"]), Q_TERRAIN_FORCE,
            ["supports", "neutral", "contradicts"],
        ),
        "refineform_force": outcome_table(
            "REFINE-FORMATION", brigade_labels, force_labels,
            p_force(GAMMA["refineform_force"]), Q_REFINEFORM,
            ["formation-line", "formation-column", "formation-none"],
        ),
        "terrain_brigade": outcome_table(
            "TERRAIN-SUPPORT", brigade_labels, brigade_labels,
            np.array([[0.85, 0.15], [0.15, 0.85]]), Q_TERRAIN_BRIGADE,
            ["supports", "neutral", "contradicts"],
        ),
        # parent-independent by construction: worth exactly zero, never selected
        "search_brigade": outcome_table(
            "SEARCH", brigade_labels, brigade_labels,
            np.array([[0.5, 0.5], [0.5, 0.5]]), {"brigade": [0.5, 0.5], "other": [0.5, 0.5]},
            ["match", "no_match"],
        ),
    }

    units = COMPANY
    actions = [
        {"id": "refine-type", "kind": "REFINE-TYPE", "applicable_to": units,
         "cost": COSTS["refine-type"], "outcome_table": "refine_company"},
        {"id": "classify", "kind": "CLASSIFICATION", "applicable_to": units,
         "cost": COSTS["classify"], "outcome_table": "class_company"},
        {"id": "terrain-unit", "kind": "TERRAIN-SUPPORT", "applicable_to": units,
         "cost": COSTS["terrain-unit"], "outcome_table": "terrain_company"},
        {"id": "search-unit", "kind": "SEARCH", "applicable_to": units,
         "cost": COSTS["search-unit"], "outcome_table": "search_company", "repeatable": True},
        {"id": "search-force", "kind": "SEARCH", "applicable_to": FORCE,
         "cost": COSTS["search-force"], "outcome_table": "search_force", "repeatable": True},
        {"id": "terrain-force", "kind": "TERRAIN-SUPPORT", "applicable_to": FORCE,
         "cost": COSTS["terrain-force"], "outcome_table": "terrain_force"},
        {"id": "refine-formation", "kind": "REFINE-FORMATION", "applicable_to": FORCE,
         "cost": COSTS["refine-formation"], "outcome_table": "refineform_force"},
        {"id": "search-brigade", "kind": "SEARCH", "applicable_to": ["brigade"],
         "cost": COSTS["search-brigade"], "outcome_table": "search_brigade", "repeatable": True},
        {"id": "terrain-brigade", "kind": "TERRAIN-SUPPORT", "applicable_to": ["brigade"],
         "cost": COSTS["terrain-brigade"], "outcome_table": "terrain_brigade"},
    ]

    companies = [
        ("w-team-a", "team", 12.0, 10.0, "w-tf", 9),
        ("w-team-b", "team", 16.0, 21.0, "w-tf", 9),
        ("w-hq", "tf-hq", 23.0, 12.0, "w-tf", 5),
        ("w-battery", "battery", 33.0, 24.0, "w-cb", 6),
    ]
    entities = [
        {"id": "w-brigade", "type": "brigade", "x": 22.0, "y": 17.0},
        {"id": "w-tf", "type": "task-force", "x": 17.0, "y": 14.0, "member_of": "w-brigade"},
        {"id": "w-cb", "type": "catapult-battalion", "x": 33.0, "y": 23.0, "member_of": "w-brigade"},
    ]
    for cid, ctype, cx, cy, parent, nveh in companies:
        entities.append({"id": cid, "type": ctype, "x": cx, "y": cy, "member_of": parent})
        for i, (vx, vy) in enumerate(vehicle_ring(cx, cy, nveh)):
            entities.append(
                {"id": f"{cid}-v{i + 1}", "type": "vehicle", "x": vx, "y": vy, "member_of": cid}
            )

    cells = [["open"] * 10 for _ in range(8)]
    for r in range(8):
        cells[r][8] = "water"
    cells[0][0] = cells[0][1] = cells[1][0] = "forest"

    world = {
        "entities": entities,
        "terrain": {
            "width": 50,
            "height": 40,
            "cells": cells,
            "support": {
                "open": {"default": "supports"},
                "forest": {"default": "neutral"},
                "water": {"default": "contradicts"},
            },
        },
        "detect_prob": 0.9,
        "false_alarm_rate": 0.0008,
        "detection_strength": {"true": [0.65, 0.95], "false": [0.08, 0.40]},
        "cluster_params": {
            "max_intervehicle_distance": 4.0,
            "min_count": 3,
            "max_count": 15,
            "max_extent": 9.0,
        },
        "search": {"confirm_belief": CONFIRM_BELIEF},
    }

    return {
        "models": models,
        "cpts": cpts,
        "outcome_tables": outcome_tables,
        "actions": actions,
        "goal_values": {"brigade": 10000.0},
        "world": world,
        "control": CONTROL,
    }


def check(scenario_path: Path) -> None:
    from percept.controller import Controller, audit_report
    from percept.model_base import load_scenario

    mb = load_scenario(scenario_path)
    ctl = Controller(mb)
    report = ctl.run()
    print(f"reason={report['terminated_reason']} steps={len(report['steps'])} "
          f"time={report['simulated_time']} winner={report['winner']}")
    for step in report["steps"]:
        kinds = {}
        for c in step["candidates"]:
            kinds.setdefault(c["kind"], []).append(round(c["value"], 1))
        print(f"\nstep {step['step']}: {len(step['candidates'])} candidates")
        for k in sorted(kinds):
            print(f"  value {k}: {kinds[k]}")
        sel = [c for c in step["candidates"] if c["id"] in set(step["plan"]["selected"])]
        print(f"  plan cost={step['plan']['total_cost']} value={round(step['plan']['total_value'],1)}")
        print("  selected:", sorted(f"{c['target']}:{c['kind']}" for c in sel))
        print("  completions:", [(c[0], c[1], c[2]) for c in step["completions"]])
        if step["cancelled"]:
            print("  cancelled:", step["cancelled"])
        for n in step["beliefs_after"]["nodes"]:
            top = max(zip(n["belief"], n["labels"]))
            print(f"    {n['id']}: {top[1]}={top[0]:.3f}")
    print("\naudit:", audit_report(report) or "clean")


def scan(scenario_path: Path, seeds) -> None:
    from percept.controller import Controller
    from percept.model_base import load_scenario

    mb = load_scenario(scenario_path)
    for seed in seeds:
        ctl = Controller(mb, seed=seed)
        report = ctl.run()
        groups_born = [
            sorted(n["id"] for n in step["beliefs_after"]["nodes"])
            for step in report["steps"]
        ]
        nodes_final = groups_born[-1] if groups_born else []
        w = report["winner"]
        print(
            f"seed {seed}: {report['terminated_reason']:<9} steps={len(report['steps']):>3} "
            f"clusters={len(report['initial_net']['nodes'])} nodes={nodes_final} "
            f"winner={w['label'] if w else '-'}@{w['belief']:.4f}" if w else
            f"seed {seed}: {report['terminated_reason']} steps={len(report['steps'])} no goal node"
        )


if __name__ == "__main__":
    ap = argparse.ArgumentParser()
    ap.add_argument("--check", action="store_true")
    ap.add_argument("--scan", type=int, default=0, help="try seeds 1..N")
    args = ap.parse_args()
    OUT.parent.mkdir(parents=True, exist_ok=True)
    OUT.write_text(json.dumps(build(), indent=1) + "\n", encoding="utf-8")
    print(f"wrote {OUT}")
    if args.scan:
        scan(OUT, range(1, args.scan + 1))
    if args.check:
        check(OUT)
