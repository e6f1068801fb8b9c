"""Synthetic ground truth and stochastic execution of the five action kinds.

The world is immutable during a run.  Sampled outcomes condition on true
entity types; the inference side only ever sees outcome ids (and, for
searches, the matched sibling node set), never the truth itself.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .bayes_net import BayesNet
from .errors import ScenarioError, UnknownIdError
from .model_base import NO_MATCH_OUTCOME, HypothesisSet, ModelBase

VEHICLE_TYPE = "vehicle"


@dataclass(frozen=True)
class WorldEntity:
    id: str
    type: str  # model node id, or "vehicle" below the modeled hierarchy
    x: float
    y: float
    member_of: str | None = None


@dataclass(frozen=True)
class Detection:
    x: float
    y: float
    strength: float  # detection likelihood in [0, 1]
    is_false_alarm: bool = False  # hidden from the engine; scoring only
    source: str | None = None

    def __post_init__(self):
        if not (0.0 <= self.strength <= 1.0):
            raise ValueError(f"detection strength {self.strength} outside [0, 1]")


@dataclass(frozen=True)
class ClusterParams:
    max_intervehicle_distance: float
    min_count: int
    max_count: int
    max_extent: float

    def __post_init__(self):
        if self.max_intervehicle_distance <= 0 or self.max_extent <= 0:
            raise ScenarioError("cluster distances must be > 0")
        if self.min_count > self.max_count:
            raise ScenarioError(
                f"cluster min_count {self.min_count} > max_count {self.max_count}"
            )


@dataclass(frozen=True)
class Cluster:
    """A detection grouping proposed as one unit-level hypothesis."""

    members: tuple[int, ...]  # indices into the detection sequence
    centroid: tuple[float, float]
    extent: float
    strength: float
    seed: HypothesisSet | None = None


@dataclass(frozen=True)
class Binding:
    """World-side association of a net node with ground truth."""

    entity: str | None
    x: float
    y: float


@dataclass(frozen=True)
class ActionResult:
    outcome: str
    duration: int
    siblings: tuple[str, ...] | None = None
    parent_entity: str | None = None
    #: False when the process aborted before observing anything (for SEARCH,
    #: the matcher could not even be run); such returns carry no evidence
    informative: bool = True


class TerrainGrid:
    """Rectangular grid of terrain classes over [0, width) x [0, height).

    Positions outside the rectangle clamp to the nearest cell.
    """

    def __init__(self, width: float, height: float, cells: list[list[str]], support: dict):
        if width <= 0 or height <= 0 or not cells or not cells[0]:
            raise ScenarioError("terrain grid needs positive size and cells")
        widths = {len(row) for row in cells}
        if len(widths) != 1:
            raise ScenarioError("terrain rows have inconsistent lengths")
        self.width = float(width)
        self.height = float(height)
        self.cells = [list(row) for row in cells]
        self.support = support  # terrain class -> {force type or "default": outcome}

    def class_at(self, x: float, y: float) -> str:
        if not (math.isfinite(x) and math.isfinite(y)):
            raise ValueError(f"terrain lookup at non-finite position ({x}, {y})")
        rows, cols = len(self.cells), len(self.cells[0])
        col = min(max(int(x / self.width * cols), 0), cols - 1)
        row = min(max(int(y / self.height * rows), 0), rows - 1)
        return self.cells[row][col]


def terrain_support(position: tuple[float, float], grid: TerrainGrid, force_type: str | None) -> str:
    """Deterministic (terrain class, force type) -> support outcome lookup."""
    terrain_class = grid.class_at(*position)
    try:
        table = grid.support[terrain_class]
    except KeyError:
        raise ScenarioError(f"no support mapping for terrain class {terrain_class!r}") from None
    key = force_type if force_type in table else "default"
    try:
        return table[key]
    except KeyError:
        raise ScenarioError(
            f"no support outcome for ({terrain_class!r}, {force_type!r})"
        ) from None


class World:
    def __init__(
        self,
        entities: dict[str, WorldEntity],
        terrain: TerrainGrid,
        detect_prob: float,
        false_alarm_rate: float,
        cluster_params: ClusterParams,
        confirm_belief: float = 0.8,
        strength_true: tuple[float, float] = (0.6, 0.95),
        strength_false: tuple[float, float] = (0.05, 0.45),
    ):
        self.entities = entities
        self.terrain = terrain
        self.detect_prob = detect_prob
        self.false_alarm_rate = false_alarm_rate
        self.cluster_params = cluster_params
        self.confirm_belief = confirm_belief
        self.strength_true = strength_true
        self.strength_false = strength_false
        self._validate()

    def _validate(self):
        if not (0.0 <= self.detect_prob <= 1.0):
            raise ScenarioError(f"detect_prob {self.detect_prob} outside [0, 1]")
        if self.false_alarm_rate < 0:
            raise ScenarioError("false_alarm_rate must be >= 0")
        for e in self.entities.values():
            if not (math.isfinite(e.x) and math.isfinite(e.y)):
                raise ScenarioError(f"entity {e.id}: non-finite position")
            if e.member_of is not None and e.member_of not in self.entities:
                raise ScenarioError(f"entity {e.id}: unknown member_of {e.member_of!r}")
        # membership must be acyclic
        for e in self.entities.values():
            seen, cur = {e.id}, e.member_of
            while cur is not None:
                if cur in seen:
                    raise ScenarioError(f"membership cycle through entity {cur!r}")
                seen.add(cur)
                cur = self.entities[cur].member_of

    @staticmethod
    def from_dict(raw: dict, known_types: set[str] | None = None) -> "World":
        entities = {}
        for rec in raw.get("entities", []):
            ent = WorldEntity(
                id=rec["id"],
                type=rec["type"],
                x=float(rec["x"]),
                y=float(rec["y"]),
                member_of=rec.get("member_of"),
            )
            if ent.id in entities:
                raise ScenarioError(f"duplicate entity id {ent.id!r}")
            if known_types is not None and ent.type != VEHICLE_TYPE and ent.type not in known_types:
                raise ScenarioError(f"entity {ent.id}: unknown type {ent.type!r}")
            entities[ent.id] = ent
        t = raw.get("terrain", {"width": 1, "height": 1, "cells": [["open"]], "support": {"open": {"default": "supports"}}})
        grid = TerrainGrid(t["width"], t["height"], t["cells"], t.get("support", {}))
        cp = raw.get("cluster_params", {})
        params = ClusterParams(
            max_intervehicle_distance=float(cp.get("max_intervehicle_distance", 1.0)),
            min_count=int(cp.get("min_count", 1)),
            max_count=int(cp.get("max_count", 10**6)),
            max_extent=float(cp.get("max_extent", 1e9)),
        )
        return World(
            entities=entities,
            terrain=grid,
            detect_prob=float(raw.get("detect_prob", 1.0)),
            false_alarm_rate=float(raw.get("false_alarm_rate", 0.0)),
            cluster_params=params,
            confirm_belief=float(raw.get("search", {}).get("confirm_belief", 0.8)),
            strength_true=tuple(raw.get("detection_strength", {}).get("true", (0.6, 0.95))),
            strength_false=tuple(raw.get("detection_strength", {}).get("false", (0.05, 0.45))),
        )

    def vehicles(self) -> list[WorldEntity]:
        return [e for e in self.entities.values() if e.type == VEHICLE_TYPE]

    def entity(self, entity_id: str) -> WorldEntity:
        try:
            return self.entities[entity_id]
        except KeyError:
            raise UnknownIdError(f"unknown entity {entity_id!r}") from None


def generate_detections(
    world: World,
    detect_prob: float | None = None,
    false_alarm_rate: float | None = None,
    rng: np.random.Generator | None = None,
) -> tuple[Detection, ...]:
    """Detect each true vehicle independently; scatter uniform false alarms.

    The false alarm rate is an expected count per unit of map area.
    Deterministic given the generator state.
    """
    rng = rng if rng is not None else np.random.default_rng(0)
    p = world.detect_prob if detect_prob is None else detect_prob
    rate = world.false_alarm_rate if false_alarm_rate is None else false_alarm_rate
    lo, hi = world.strength_true
    out = []
    for veh in world.vehicles():
        if rng.random() < p:
            out.append(
                Detection(
                    x=veh.x,
                    y=veh.y,
                    strength=float(rng.uniform(lo, hi)),
                    is_false_alarm=False,
                    source=veh.id,
                )
            )
    area = world.terrain.width * world.terrain.height
    flo, fhi = world.strength_false
    for _ in range(int(rng.poisson(rate * area))):
        out.append(
            Detection(
                x=float(rng.uniform(0.0, world.terrain.width)),
                y=float(rng.uniform(0.0, world.terrain.height)),
                strength=float(rng.uniform(flo, fhi)),
                is_false_alarm=True,
            )
        )
    return tuple(out)


def cluster_detections(
    detections,
    params: ClusterParams,
    base: HypothesisSet | None = None,
) -> list[Cluster]:
    """Single-linkage clustering under the inter-vehicle distance threshold.

    Components are filtered to the allowed member count and maximum extent;
    each survivor yields one hypothesis seed whose priors tilt the base set
    by the cluster's mean detection strength (the null label receives the
    complement).  The result is invariant to detection order.
    """
    detections = list(detections)
    n = len(detections)
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    # permutation invariance: process pairs on canonical positions, and
    # union-find components do not depend on processing order anyway
    for i in range(n):
        for j in range(i + 1, n):
            d = math.hypot(
                detections[i].x - detections[j].x, detections[i].y - detections[j].y
            )
            if d <= params.max_intervehicle_distance:
                ri, rj = find(i), find(j)
                if ri != rj:
                    parent[ri] = rj

    groups: dict[int, list[int]] = {}
    for i in range(n):
        groups.setdefault(find(i), []).append(i)

    clusters = []
    for members in groups.values():
        if not (params.min_count <= len(members) <= params.max_count):
            continue
        pts = [(detections[i].x, detections[i].y) for i in members]
        extent = max(
            (math.hypot(a[0] - b[0], a[1] - b[1]) for a in pts for b in pts),
            default=0.0,
        )
        if extent > params.max_extent:
            continue
        cx = sum(p[0] for p in pts) / len(pts)
        cy = sum(p[1] for p in pts) / len(pts)
        strength = sum(detections[i].strength for i in members) / len(members)
        seed = None
        if base is not None:
            tilt = np.array(
                [
                    (1.0 - strength) if lab == base.null_label else strength
                    for lab in base.labels
                ]
            )
            priors = np.array(base.priors) * tilt
            total = priors.sum()
            if total <= 0:
                priors = np.array(base.priors)
            else:
                priors = priors / total
            seed = HypothesisSet(
                labels=base.labels, priors=priors, null_label=base.null_label
            )
        clusters.append(
            Cluster(
                members=tuple(sorted(members)),
                centroid=(cx, cy),
                extent=extent,
                strength=strength,
                seed=seed,
            )
        )
    clusters.sort(key=lambda c: (c.centroid[0], c.centroid[1]))
    return clusters


def bind_cluster(world: World, cluster: Cluster, group_types: set[str]) -> Binding:
    """Associate a cluster with the nearest unit-level entity, if close enough."""
    cx, cy = cluster.centroid
    best, best_d = None, math.inf
    for e in world.entities.values():
        if e.type not in group_types:
            continue
        d = math.hypot(e.x - cx, e.y - cy)
        if d < best_d:
            best, best_d = e, d
    if best is not None and best_d <= world.cluster_params.max_extent:
        return Binding(entity=best.id, x=cx, y=cy)
    return Binding(entity=None, x=cx, y=cy)


def _confirmed(net: BayesNet, node_id: str, threshold: float) -> bool:
    node = net.node(node_id)
    belief = net.belief(node_id)
    null = node.hypotheses.null_label
    best = max(
        (float(b) for lab, b in zip(node.labels, belief) if lab != null),
        default=0.0,
    )
    return best >= threshold


def execute_action(
    action,
    world: World,
    net: BayesNet,
    rng: np.random.Generator,
    bindings: dict[str, Binding],
    model_base: ModelBase,
) -> ActionResult:
    """Run one action against ground truth and report its outcome id.

    Outcomes are sampled from the action's outcome table conditioned on
    the target's true (child, parent) labels; targets without a bound
    entity draw from the null-parent slice.  TERRAIN-SUPPORT is a
    deterministic grid lookup.  SEARCH reports ``no_match`` unless the
    matcher can assemble enough confirmed sibling hypotheses around the
    true parent, and on a match carries the sibling set for instantiation.
    """
    table = model_base.outcome_table(action.outcome_table)
    binding = bindings.get(action.target_node)
    if binding is None:
        raise UnknownIdError(f"action {action.id}: target has no world binding")
    entity = world.entity(binding.entity) if binding.entity else None
    parent_ent = (
        world.entity(entity.member_of) if entity and entity.member_of else None
    )

    parent_group = model_base.group_for_labels(table.parent_labels)
    parent_hs = model_base.hypothesis_set(parent_group)
    if parent_ent is not None and parent_ent.type in table.parent_labels:
        parent_label = parent_ent.type
    elif action.kind != "SEARCH" and entity is not None and entity.type in table.parent_labels:
        # self-bearing tables: the node's own truth sits on the parent axis
        parent_label = entity.type
    else:
        parent_label = parent_hs.null_label
    duration = int(action.cost)

    if action.kind == "TERRAIN-SUPPORT":
        outcome = terrain_support(
            (binding.x, binding.y), world.terrain, entity.type if entity else None
        )
        if outcome not in table.outcomes:
            raise ScenarioError(
                f"terrain outcome {outcome!r} missing from table {table.id}"
            )
        return ActionResult(outcome=outcome, duration=duration)

    if action.kind == "SEARCH":
        if not _confirmed(net, action.target_node, world.confirm_belief):
            # matcher was never run: the target is not an established
            # hypothesis yet, so this return is not evidence of anything
            return ActionResult(
                outcome=NO_MATCH_OUTCOME, duration=duration, informative=False
            )
        if entity is None or parent_ent is None:
            # an established hypothesis with nothing real behind it: the
            # matcher runs and genuinely finds no parent formation
            outcome = _sample_null_parent(table, parent_hs.null_label, rng)
            return ActionResult(outcome=outcome, duration=duration)
        target_labels = net.node(action.target_node).labels
        siblings = tuple(
            nid
            for nid in sorted(net.nodes)
            if net.node(nid).labels == target_labels
            and bindings.get(nid) is not None
            and bindings[nid].entity is not None
            and world.entity(bindings[nid].entity).member_of == parent_ent.id
            and _confirmed(net, nid, world.confirm_belief)
        )
        if len(siblings) < model_base.node(parent_ent.type).min_parts:
            return ActionResult(
                outcome=NO_MATCH_OUTCOME, duration=duration, informative=False
            )
        outcome = _sample_outcome(table, entity.type, parent_label, rng)
        if outcome == NO_MATCH_OUTCOME:
            return ActionResult(outcome=outcome, duration=duration)
        return ActionResult(
            outcome=outcome,
            duration=duration,
            siblings=siblings,
            parent_entity=parent_ent.id,
        )

    # REFINE-TYPE, REFINE-FORMATION, CLASSIFICATION: plain table sampling
    if entity is None:
        outcome = _sample_null_parent(table, parent_hs.null_label, rng)
    else:
        outcome = _sample_outcome(table, entity.type, parent_label, rng)
    return ActionResult(outcome=outcome, duration=duration)


def _sample_outcome(
    table, child_label: str, parent_label: str | None, rng: np.random.Generator
) -> str:
    if child_label not in table.child_labels:
        raise ScenarioError(
            f"table {table.id}: true type {child_label!r} not among child labels"
        )
    if parent_label is None or parent_label not in table.parent_labels:
        raise ScenarioError(
            f"table {table.id}: no parent label for truth {parent_label!r}"
        )
    ci = table.child_labels.index(child_label)
    pi = table.parent_labels.index(parent_label)
    row = table.entries[ci, :, pi]
    total = row.sum()
    if total <= 0:
        raise ScenarioError(
            f"table {table.id}: truth ({child_label!r} | {parent_label!r}) "
            "has zero probability"
        )
    idx = rng.choice(len(table.outcomes), p=row / total)
    return table.outcomes[int(idx)]


def _sample_null_parent(table, null_label: str | None, rng: np.random.Generator) -> str:
    """Outcome distribution when no true entity backs the target."""
    if null_label is None or null_label not in table.parent_labels:
        raise ScenarioError(
            f"table {table.id}: no null parent label to sample an absent target"
        )
    pi = table.parent_labels.index(null_label)
    probs = table.entries[:, :, pi].sum(axis=0)  # child marginalized out
    idx = rng.choice(len(table.outcomes), p=probs / probs.sum())
    return table.outcomes[int(idx)]
