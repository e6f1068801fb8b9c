"""Top-level control loop: enumerate, value, select, execute, accrue, test.

Each step gets a fresh time budget.  Selected actions run on a simulated
processor pool; completions return asynchronously (in deterministic
finish-time order) and their evidence is attached and propagated one by
one.  A step ends early, cancelling whatever is still in flight, as soon
as a goal node's belief crosses the termination threshold.

The decision layer (valuation + knapsack) never touches beliefs: replaying
a recorded plan sequence with the planner disabled reproduces the same
evidence stream and therefore the exact same posteriors.
"""

from __future__ import annotations

import heapq
from collections import deque
from dataclasses import dataclass

import numpy as np

from . import world as world_sim
from .bayes_net import BayesNet
from .errors import ScenarioError, UnknownIdError
from .model_base import ControlConfig, ModelBase
from .planner import KnapsackInstance, KnapsackItem, Plan, solve_approx
from .valuation import ActionInstance, Valuer, ValueMode

TERMINATED = "TERMINATED"
CONTINUE = "CONTINUE"

_DETECT_STREAM = 13
_ACTION_STREAM = 29
_JITTER_STREAM = 43


@dataclass
class StepRecord:
    """One control-loop iteration, sufficient to audit and replay the run."""

    index: int
    candidates: list[ActionInstance]
    plan: Plan
    completions: list[tuple[str, str, int]]  # (action id, outcome id, finish time)
    cancelled: list[str]
    beliefs_after: dict

    def to_dict(self) -> dict:
        return {
            "step": self.index,
            "candidates": [
                {
                    "id": c.id,
                    "kind": c.kind,
                    "target": c.target_node,
                    "value": c.value,
                    "cost": c.cost,
                }
                for c in self.candidates
            ],
            "plan": self.plan.to_dict(),
            "completions": [list(c) for c in self.completions],
            "cancelled": list(self.cancelled),
            "beliefs_after": self.beliefs_after,
        }


class SimulatedPool:
    """Discrete-event pool: at most `processors` actions in flight."""

    def __init__(self, processors: int, clock: int = 0):
        if processors < 1:
            raise ValueError("pool needs at least one processor")
        self.processors = processors
        self.clock = clock
        self._queue: deque[tuple[ActionInstance, int]] = deque()
        self._in_flight: list[tuple[int, int, ActionInstance]] = []
        self._seq = 0
        self.dispatched: list[ActionInstance] = []

    def submit(self, actions, durations=None) -> None:
        """Queue actions; a duration defaults to the action's declared cost."""
        actions = list(actions)
        if durations is None:
            durations = [int(a.cost) for a in actions]
        self._queue.extend(zip(actions, durations))
        self._fill()

    def _fill(self) -> None:
        while self._queue and len(self._in_flight) < self.processors:
            action, duration = self._queue.popleft()
            heapq.heappush(
                self._in_flight, (self.clock + duration, self._seq, action)
            )
            self._seq += 1
            self.dispatched.append(action)

    @property
    def in_flight_count(self) -> int:
        return len(self._in_flight)

    def in_flight_ids(self) -> tuple[str, ...]:
        return tuple(a.id for _, _, a in sorted(self._in_flight))

    def next_completion(self) -> tuple[int, ActionInstance] | None:
        """Pop the earliest completion, advance the clock, refill the pool."""
        if not self._in_flight:
            return None
        finish, _, action = heapq.heappop(self._in_flight)
        self.clock = max(self.clock, finish)
        self._fill()
        return finish, action

    def cancel_all(self) -> list[ActionInstance]:
        """Drop everything in flight or still queued; the clock stays put."""
        out = [a for _, _, a in sorted(self._in_flight)]
        out.extend(a for a, _ in self._queue)
        self._in_flight.clear()
        self._queue.clear()
        return out


def check_termination(net: BayesNet, config: ControlConfig, goal_nodes) -> str:
    """TERMINATED once any goal node's maximum belief reaches the threshold."""
    for nid in goal_nodes:
        if float(net.belief(nid).max()) >= config.termination_belief:
            return TERMINATED
    return CONTINUE


class Controller:
    """Owns one run: the net, the simulated world, and the step loop."""

    def __init__(
        self,
        model_base: ModelBase,
        *,
        seed: int | None = None,
        budget: int | None = None,
        epsilon: float | None = None,
        termination_belief: float | None = None,
        max_wall: float | None = None,
        value_mode: str | None = None,
    ):
        base = model_base.control
        self.mb = model_base
        self.config = ControlConfig(
            budget_t=base.budget_t if budget is None else int(budget),
            epsilon=base.epsilon if epsilon is None else float(epsilon),
            processors=base.processors,
            termination_belief=(
                base.termination_belief
                if termination_belief is None
                else float(termination_belief)
            ),
            seed=base.seed if seed is None else int(seed),
            max_wall=base.max_wall if max_wall is None else float(max_wall),
            value_mode=base.value_mode if value_mode is None else str(value_mode),
            duration_jitter=base.duration_jitter,
        )
        self.mode = ValueMode.from_str(self.config.value_mode)
        self.net = BayesNet()
        self.world = world_sim.World.from_dict(
            model_base.world, known_types=set(model_base.nodes)
        )
        self.bindings: dict[str, world_sim.Binding] = {}
        self.node_group: dict[str, str] = {}
        self.node_seq: dict[str, int] = {}
        self.init_priors: dict[str, np.ndarray] = {}
        self.fired: set[tuple[str, str]] = set()
        self._adopted: set[str] = set()
        self._active: dict[str, ActionInstance] = {}
        self._template_index = {t.id: i for i, t in enumerate(model_base.actions)}
        self.clock = 0
        self.steps: list[StepRecord] = []
        self.detections: tuple = ()
        self.clusters: list = []

    # -- setup -------------------------------------------------------------

    def initialize(self) -> None:
        """Detect, cluster, and instantiate the initial unit-level nodes."""
        rng = np.random.default_rng(
            np.random.SeedSequence((self.config.seed, _DETECT_STREAM))
        )
        self.detections = world_sim.generate_detections(self.world, rng=rng)
        leaf = self.mb.leaf_group()
        base = self.mb.hypothesis_set(leaf)
        self.clusters = world_sim.cluster_detections(
            self.detections, self.world.cluster_params, base=base
        )
        unit_types = {lab for lab in base.labels if lab in self.mb.nodes}
        refs = self.mb.model_refs(leaf)
        for k, cluster in enumerate(self.clusters):
            node_id = f"u{k + 1}"
            self.net.instantiate_node(cluster.seed, refs, node_id=node_id)
            self._register(node_id, leaf)
            self.init_priors[node_id] = np.array(cluster.seed.priors)
            self.bindings[node_id] = world_sim.bind_cluster(
                self.world, cluster, unit_types
            )
        self.net.propagate()

    def _register(self, node_id: str, group: str) -> None:
        self.node_group[node_id] = group
        self.node_seq[node_id] = len(self.node_seq)

    def goal_nodes(self) -> list[str]:
        return [
            nid
            for nid, g in self.node_group.items()
            if g == self.mb.goal_group and nid in self.net.nodes
        ]

    # -- candidate enumeration ----------------------------------------------

    def enumerate_candidates(self) -> list[ActionInstance]:
        """Every applicable, non-exhausted template of every node, in
        (node id, kind, template id) order."""
        out = []
        templates = sorted(self.mb.actions, key=lambda t: (t.kind, t.id))
        for node_id in sorted(self.net.nodes):
            node = self.net.node(node_id)
            model_ids = [m for m in node.model_refs.values() if m is not None]
            for t in templates:
                if not any(t.applies_to(m) for m in model_ids):
                    continue
                if not t.repeatable and (node_id, t.id) in self.fired:
                    continue
                out.append(
                    ActionInstance(
                        id=f"{node_id}:{t.id}",
                        kind=t.kind,
                        target_node=node_id,
                        cost=t.cost,
                        outcome_table=t.outcome_table,
                        template_id=t.id,
                    )
                )
        return out

    # -- evidence handling ----------------------------------------------------

    def _likelihood_from_outcome(self, table, outcome: str) -> np.ndarray:
        """Per-label outcome likelihood from the table slice.

        The parent axis is collapsed with the a priori group priors and the
        result normalized per child label, i.e. lambda(x) = p(outcome | x)
        under a priori parent mixing.  Static priors keep the conversion
        independent of arrival order, so end-of-step beliefs cannot depend
        on completion scheduling.
        """
        oi = table.outcome_index(outcome)
        group = self.mb.group_for_labels(table.parent_labels)
        priors = np.array(self.mb.hypothesis_set(group).priors)
        joint = table.entries @ priors  # (child, outcome)
        totals = joint.sum(axis=1)
        lam = np.divide(
            joint[:, oi], totals, out=np.zeros(len(table.child_labels)), where=totals > 0
        )
        return lam

    def _adopt(self, parent_id: str, child_id: str, cpt) -> None:
        """Link an existing root node under a new parent.

        The child's instantiation prior encoded real detection evidence; it
        is converted into an equivalent likelihood before the parent's
        causal message supersedes it, so no information is lost.
        """
        if child_id not in self._adopted:
            w = self.init_priors.get(child_id)
            if w is not None:
                group = self.node_group[child_id]
                base = np.array(self.mb.hypothesis_set(group).priors)
                if not np.allclose(w, base, atol=1e-12):
                    adj = np.divide(w, base, out=np.zeros_like(w), where=base > 0)
                    self.net.attach_evidence(child_id, adj)
            self._adopted.add(child_id)
        self.net.link(parent_id, child_id, cpt)

    def _parent_cpt(self, child_group: str, parent_group: str):
        for pg, cpt_id in self.mb.group_parents.get(child_group, ()):
            if pg == parent_group:
                return self.mb.cpt(cpt_id)
        raise ScenarioError(
            f"no model edge from group {parent_group!r} to {child_group!r}"
        )

    def _handle_match(self, action: ActionInstance, result) -> None:
        table = self.mb.outcome_table(action.outcome_table)
        parent_group = self.mb.group_for_labels(table.parent_labels)
        child_group = self.node_group[action.target_node]
        if parent_group == child_group:
            return  # self-bearing table, nothing to instantiate
        cpt = self._parent_cpt(child_group, parent_group)
        parent_id = None
        for nid, g in self.node_group.items():
            if g == parent_group and self.bindings.get(nid) is not None:
                if self.bindings[nid].entity == result.parent_entity:
                    parent_id = nid
                    break
        if parent_id is None:
            count = sum(1 for g in self.node_group.values() if g == parent_group)
            parent_id = f"{parent_group}{count + 1}"
            hs = self.mb.hypothesis_set(parent_group)
            self.net.instantiate_node(hs, self.mb.model_refs(parent_group), node_id=parent_id)
            self._register(parent_id, parent_group)
            xs = [self.bindings[s].x for s in result.siblings]
            ys = [self.bindings[s].y for s in result.siblings]
            self.bindings[parent_id] = world_sim.Binding(
                entity=result.parent_entity,
                x=sum(xs) / len(xs),
                y=sum(ys) / len(ys),
            )
        for sib in result.siblings:
            already = any(
                self.node_group.get(pid) == parent_group
                for pid, _ in self.net.parents(sib)
            )
            if not already:
                self._adopt(parent_id, sib, cpt)

    def apply_completion(self, action: ActionInstance, result) -> None:
        """Attach one completed action's evidential return and propagate."""
        if result.siblings is not None:
            self._handle_match(action, result)
        if result.informative:
            table = self.mb.outcome_table(action.outcome_table)
            lam = self._likelihood_from_outcome(table, result.outcome)
            self.net.attach_evidence(action.target_node, lam)
        self.net.propagate()

    def on_completion(self, action_id: str, outcome: str) -> None:
        """Asynchronous return path: resolve an in-flight action by id."""
        action = self._active.get(action_id)
        if action is None:
            raise UnknownIdError(f"action {action_id!r} is not in flight")
        self.apply_completion(
            action, world_sim.ActionResult(outcome=outcome, duration=action.cost)
        )

    def _action_rng(self, step: int, action: ActionInstance) -> np.random.Generator:
        # keyed, not sequential: replays and permutations see identical streams
        return np.random.default_rng(
            np.random.SeedSequence(
                (
                    self.config.seed,
                    _ACTION_STREAM,
                    step,
                    self.node_seq[action.target_node],
                    self._template_index[action.template_id],
                )
            )
        )

    def _duration(self, step: int, action: ActionInstance) -> int:
        """Actual runtime: the declared cost, optionally jittered.

        Budget accounting always uses declared costs; jitter only moves
        completion times, from a keyed stream so replays stay exact.
        """
        jitter = self.config.duration_jitter
        if jitter <= 0.0:
            return int(action.cost)
        rng = np.random.default_rng(
            np.random.SeedSequence(
                (
                    self.config.seed,
                    _JITTER_STREAM,
                    step,
                    self.node_seq[action.target_node],
                    self._template_index[action.template_id],
                )
            )
        )
        factor = 1.0 + jitter * (2.0 * rng.random() - 1.0)
        return max(0, int(round(action.cost * factor)))

    # -- the loop ---------------------------------------------------------------

    def run_step(self, replay_ids: list[str] | None = None) -> StepRecord | None:
        """One full iteration; None when nothing is selectable (quiescent)."""
        index = len(self.steps) + 1
        candidates = self.enumerate_candidates()
        if not candidates:
            return None
        if replay_ids is None:
            Valuer(self.net, self.mb, mode=self.mode).value_all_candidates(candidates)
            instance = KnapsackInstance(
                items=tuple(
                    KnapsackItem(id=c.id, value=c.value, cost=c.cost)
                    for c in candidates
                ),
                budget=self.config.budget_t,
            )
            plan = solve_approx(instance, self.config.epsilon)
        else:
            by_id = {c.id: c for c in candidates}
            missing = [i for i in replay_ids if i not in by_id]
            if missing:
                raise ScenarioError(f"replay references unknown candidates {missing}")
            chosen = [by_id[i] for i in replay_ids]
            plan = Plan(
                selected=tuple(sorted(replay_ids)),
                total_value=float(sum(c.value for c in chosen)),
                total_cost=float(sum(c.cost for c in chosen)),
            )
        if not plan.selected:
            return None
        if plan.total_cost > self.config.budget_t and replay_ids is None:
            raise RuntimeError("planner exceeded the step budget")

        selected = set(plan.selected)
        ordered = [c for c in candidates if c.id in selected]
        pool = SimulatedPool(self.config.processors, clock=self.clock)
        self._active = {c.id: c for c in ordered}
        pool.submit(ordered, [self._duration(index, c) for c in ordered])

        completions: list[tuple[str, str, int]] = []
        cancelled: list[str] = []
        while True:
            ev = pool.next_completion()
            if ev is None:
                break
            finish, action = ev
            result = world_sim.execute_action(
                action,
                self.world,
                self.net,
                self._action_rng(index, action),
                self.bindings,
                self.mb,
            )
            self.apply_completion(action, result)
            completions.append((action.id, result.outcome, finish))
            if check_termination(self.net, self.config, self.goal_nodes()) == TERMINATED:
                cancelled = [a.id for a in pool.cancel_all()]
                break
        self.clock = pool.clock
        self.fired.update((a.target_node, a.template_id) for a in pool.dispatched)
        self._active = {}
        return StepRecord(
            index=index,
            candidates=candidates,
            plan=plan,
            completions=completions,
            cancelled=cancelled,
            beliefs_after=self.net.snapshot(),
        )

    def run(self, replay_plans: list[list[str]] | None = None) -> dict:
        """Drive steps until termination, quiescence, or the wall."""
        self.initialize()
        initial = self.net.snapshot()
        reason = None
        while True:
            if check_termination(self.net, self.config, self.goal_nodes()) == TERMINATED:
                reason = "terminated"
                break
            if self.clock >= self.config.max_wall:
                reason = "max_wall"
                break
            if len(self.steps) >= 10_000:
                raise RuntimeError("run exceeded 10000 steps; scenario is unbounded")
            replay_ids = None
            if replay_plans is not None:
                if len(self.steps) >= len(replay_plans):
                    reason = "quiescent"
                    break
                replay_ids = replay_plans[len(self.steps)]
            record = self.run_step(replay_ids)
            if record is None:
                reason = "quiescent"
                break
            self.steps.append(record)
        return self._report(initial, reason)

    def _report(self, initial: dict, reason: str) -> dict:
        winner = None
        for nid in sorted(self.goal_nodes()):
            belief = self.net.belief(nid)
            best = int(np.argmax(belief))
            cand = {
                "node": nid,
                "label": self.net.node(nid).labels[best],
                "belief": float(belief[best]),
            }
            if winner is None or cand["belief"] > winner["belief"]:
                winner = cand
        return {
            "config": {
                "budget_T": self.config.budget_t,
                "epsilon": self.config.epsilon,
                "processors": self.config.processors,
                "termination_belief": self.config.termination_belief,
                "seed": self.config.seed,
                "value_mode": self.config.value_mode,
                "duration_jitter": self.config.duration_jitter,
            },
            "initial_net": initial,
            "steps": [s.to_dict() for s in self.steps],
            "final_beliefs": self.net.snapshot(),
            "winner": winner,
            "terminated_reason": reason,
            "simulated_time": self.clock,
        }


def run_scenario(model_base: ModelBase, **overrides) -> dict:
    return Controller(model_base, **overrides).run()


def recorded_plans(report: dict) -> list[list[str]]:
    """Extract the per-step selected action ids for a separability replay."""
    return [list(step["plan"]["selected"]) for step in report["steps"]]


def replay_scenario(model_base: ModelBase, report: dict, **overrides) -> dict:
    """Re-run with the planner disabled, following a recorded plan sequence."""
    ctl = Controller(model_base, **overrides)
    return ctl.run(replay_plans=recorded_plans(report))


def audit_report(report: dict) -> list[str]:
    """Check pool and budget discipline over a recorded run.

    Returns human-readable violations; an empty list means the trace is
    clean.  In-flight intervals are reconstructed from (finish - cost,
    finish], which is exact because completion times equal declared costs;
    with duration jitter enabled the interval check is skipped.
    """
    violations = []
    budget = report["config"]["budget_T"]
    processors = report["config"]["processors"]
    jittered = report["config"].get("duration_jitter", 0.0) > 0.0
    for step in report["steps"]:
        idx = step["step"]
        cost_of = {c["id"]: c["cost"] for c in step["candidates"]}
        cand_ids = set(cost_of)
        plan_ids = set(step["plan"]["selected"])
        if not plan_ids <= cand_ids:
            violations.append(f"step {idx}: plan selects non-candidates")
        if step["plan"]["total_cost"] > budget + 1e-9:
            violations.append(
                f"step {idx}: selected cost {step['plan']['total_cost']} "
                f"exceeds budget {budget}"
            )
        seen = set()
        events = []
        for action_id, _, finish in step["completions"]:
            if action_id in seen:
                violations.append(f"step {idx}: {action_id} completed twice")
            seen.add(action_id)
            if action_id not in plan_ids:
                violations.append(f"step {idx}: completion {action_id} not in plan")
                continue
            start = finish - cost_of[action_id]
            events.append((start, 1))
            events.append((finish, -1))
        if not jittered:
            flying = 0
            for _, delta in sorted(events, key=lambda e: (e[0], e[1])):
                flying += delta
                if flying > processors:
                    violations.append(f"step {idx}: {flying} actions in flight")
                    break
        unresolved = plan_ids - seen - set(step["cancelled"])
        if unresolved:
            violations.append(
                f"step {idx}: selected actions neither completed nor cancelled: "
                f"{sorted(unresolved)}"
            )
    return violations
