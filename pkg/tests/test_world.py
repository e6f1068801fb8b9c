"""Ground truth, detection statistics, clustering, and outcome sampling."""

from pathlib import Path

import numpy as np
import pytest

from percept.controller import Controller
from percept.errors import ScenarioError
from percept.model_base import HypothesisSet, load_scenario
from percept.world import (
    ClusterParams,
    Detection,
    TerrainGrid,
    World,
    WorldEntity,
    cluster_detections,
    generate_detections,
    terrain_support,
)

BRIGADE = Path(__file__).resolve().parents[1] / "src/percept/scenarios/brigade.json"


def grid_world(vehicles, detect_prob=1.0, far=0.0, params=None):
    entities = {}
    for i, (x, y) in enumerate(vehicles):
        e = WorldEntity(id=f"v{i}", type="vehicle", x=x, y=y)
        entities[e.id] = e
    return World(
        entities=entities,
        terrain=TerrainGrid(100, 100, [["open"]], {"open": {"default": "supports"}}),
        detect_prob=detect_prob,
        false_alarm_rate=far,
        cluster_params=params
        or ClusterParams(
            max_intervehicle_distance=5.0, min_count=1, max_count=100, max_extent=1000.0
        ),
    )


class TestDetections:
    def test_perfect_detection_no_false_alarms(self):
        world = grid_world([(1, 1), (2, 2), (50, 50)])
        dets = generate_detections(world, rng=np.random.default_rng(0))
        assert len(dets) == 3
        assert {(d.x, d.y) for d in dets} == {(1, 1), (2, 2), (50, 50)}
        assert not any(d.is_false_alarm for d in dets)

    def test_no_detections(self):
        world = grid_world([(1, 1), (2, 2)], detect_prob=0.0)
        assert generate_detections(world, rng=np.random.default_rng(0)) == ()

    def test_detection_rate_monte_carlo(self):
        # 50 vehicles x 200 trials = 10^4 vehicle-trials at p = 0.8
        world = grid_world([(i, i) for i in range(50)], detect_prob=0.8)
        rng = np.random.default_rng(7)
        total = sum(len(generate_detections(world, rng=rng)) for _ in range(200))
        assert abs(total / 10_000 - 0.8) < 0.02

    def test_false_alarm_rate_is_per_unit_area(self):
        world = grid_world([], far=0.002)  # rate * area = 20 expected
        rng = np.random.default_rng(11)
        counts = [len(generate_detections(world, rng=rng)) for _ in range(300)]
        assert abs(np.mean(counts) - 20.0) < 1.0
        assert all(d.is_false_alarm for d in generate_detections(world, rng=rng))

    def test_seed_determinism(self):
        world = grid_world([(i, 2 * i) for i in range(20)], detect_prob=0.7, far=0.001)
        a = generate_detections(world, rng=np.random.default_rng(3))
        b = generate_detections(world, rng=np.random.default_rng(3))
        assert a == b


def det(x, y, s=0.8):
    return Detection(x=x, y=y, strength=s)


class TestClustering:
    def test_far_apart_singletons_filtered_by_min_count(self):
        params = ClusterParams(
            max_intervehicle_distance=1.0, min_count=2, max_count=10, max_extent=100.0
        )
        assert cluster_detections([det(0, 0), det(10, 10)], params) == []

    def test_far_apart_singletons_survive_with_min_count_one(self):
        params = ClusterParams(
            max_intervehicle_distance=1.0, min_count=1, max_count=10, max_extent=100.0
        )
        clusters = cluster_detections([det(0, 0), det(10, 10)], params)
        assert [c.members for c in clusters] == [(0,), (1,)]

    def test_single_linkage_chains(self):
        params = ClusterParams(
            max_intervehicle_distance=1.5, min_count=1, max_count=10, max_extent=100.0
        )
        chain = [det(0, 0), det(1, 0), det(2, 0), det(3, 0)]
        clusters = cluster_detections(chain, params)
        assert len(clusters) == 1
        assert clusters[0].members == (0, 1, 2, 3)

    def test_max_extent_filter(self):
        params = ClusterParams(
            max_intervehicle_distance=1.5, min_count=1, max_count=10, max_extent=2.0
        )
        chain = [det(0, 0), det(1, 0), det(2, 0), det(3, 0)]
        assert cluster_detections(chain, params) == []

    def test_permutation_invariance(self):
        rng = np.random.default_rng(5)
        pts = [det(float(x), float(y), 0.7) for x, y in rng.uniform(0, 30, (40, 2))]
        params = ClusterParams(
            max_intervehicle_distance=3.0, min_count=1, max_count=50, max_extent=100.0
        )

        def membership(clusters, source):
            return sorted(
                tuple(sorted((source[i].x, source[i].y) for i in c.members))
                for c in clusters
            )

        base = membership(cluster_detections(pts, params), pts)
        for seed in range(5):
            perm = np.random.default_rng(seed).permutation(len(pts))
            shuffled = [pts[i] for i in perm]
            again = membership(cluster_detections(shuffled, params), shuffled)
            assert again == base

    def test_strength_tilts_seed_priors(self):
        base = HypothesisSet(
            labels=("a", "b", "other"), priors=np.array([0.4, 0.4, 0.2]), null_label="other"
        )
        params = ClusterParams(
            max_intervehicle_distance=2.0, min_count=2, max_count=10, max_extent=10.0
        )
        strong = cluster_detections([det(0, 0, 0.9), det(1, 0, 0.9)], params, base=base)
        weak = cluster_detections([det(0, 0, 0.2), det(1, 0, 0.2)], params, base=base)
        s, w = strong[0].seed, weak[0].seed
        assert s.priors[2] < base.priors[2] < w.priors[2]
        assert abs(s.priors.sum() - 1) < 1e-9 and abs(w.priors.sum() - 1) < 1e-9

    def test_bundled_scenario_yields_four_company_clusters(self):
        mb = load_scenario(BRIGADE)
        ctl = Controller(mb)
        ctl.initialize()
        assert len(ctl.clusters) == 4
        assert sorted(ctl.net.nodes) == ["u1", "u2", "u3", "u4"]


class TestTerrain:
    def grid(self):
        return TerrainGrid(
            width=20,
            height=10,
            cells=[["open", "water"], ["forest", "open"]],
            support={
                "open": {"default": "supports"},
                "water": {"default": "contradicts"},
                "forest": {"default": "neutral", "scout": "supports"},
            },
        )

    def test_open_supports_any_force(self):
        assert terrain_support((5, 2), self.grid(), "team") == "supports"
        assert terrain_support((5, 2), self.grid(), None) == "supports"

    def test_water_contradicts_ground_force(self):
        assert terrain_support((15, 2), self.grid(), "team") == "contradicts"

    def test_force_specific_entry_wins(self):
        assert terrain_support((5, 7), self.grid(), "scout") == "supports"
        assert terrain_support((5, 7), self.grid(), "team") == "neutral"

    def test_out_of_grid_clamps_to_nearest_cell(self):
        assert terrain_support((-3, -3), self.grid(), "team") == "supports"
        assert terrain_support((1000, -5), self.grid(), "team") == "contradicts"

    def test_non_finite_position_rejected(self):
        with pytest.raises(ValueError):
            terrain_support((float("nan"), 0), self.grid(), "team")


@pytest.fixture(scope="module")
def started():
    mb = load_scenario(BRIGADE)
    ctl = Controller(mb)
    ctl.initialize()
    return mb, ctl


class TestExecution:
    def find(self, ctl, kind, target):
        return next(
            c
            for c in ctl.enumerate_candidates()
            if c.kind == kind and c.target_node == target
        )

    def test_classification_correct_type_rate(self, started):
        from percept.world import execute_action

        mb, ctl = started
        battery_node = next(
            n for n, b in ctl.bindings.items() if b.entity == "w-battery"
        )
        act = self.find(ctl, "CLASSIFICATION", battery_node)
        rng = np.random.default_rng(123)
        hits = 0
        n = 4000
        for _ in range(n):
            res = execute_action(act, ctl.world, ctl.net, rng, ctl.bindings, mb)
            hits += res.outcome == "class-battery"
        assert hits / n >= 0.88  # table rate is 0.90

    def test_outcome_frequencies_match_table(self, started):
        from percept.world import _sample_outcome

        mb, _ = started
        table = mb.outcome_table("refine_company")
        rng = np.random.default_rng(9)
        n = 100_000
        counts = dict.fromkeys(table.outcomes, 0)
        for _ in range(n):
            counts[_sample_outcome(table, "team", "task-force", rng)] += 1
        ci = table.child_labels.index("team")
        pi = table.parent_labels.index("task-force")
        row = table.entries[ci, :, pi]
        row = row / row.sum()
        for oi, outcome in enumerate(table.outcomes):
            assert abs(counts[outcome] / n - row[oi]) < 0.01

    def test_terrain_action_is_deterministic(self, started):
        from percept.world import execute_action

        mb, ctl = started
        act = self.find(ctl, "TERRAIN-SUPPORT", "u1")
        outs = {
            execute_action(
                act, ctl.world, ctl.net, np.random.default_rng(s), ctl.bindings, mb
            ).outcome
            for s in range(10)
        }
        assert outs == {"supports"}

    def test_search_aborts_while_unconfirmed(self, started):
        from percept.world import execute_action

        mb, ctl = started
        act = self.find(ctl, "SEARCH", "u1")
        res = execute_action(
            act, ctl.world, ctl.net, np.random.default_rng(0), ctl.bindings, mb
        )
        assert res.outcome == "no_match"
        assert not res.informative
        assert res.siblings is None

    def test_search_matches_once_confirmed(self):
        from percept.world import execute_action

        mb = load_scenario(BRIGADE)
        ctl = Controller(mb)
        ctl.initialize()
        # confirm the three task-force companies directly
        for nid, binding in ctl.bindings.items():
            ent = ctl.world.entity(binding.entity)
            lam = [
                8.0 if lab == ent.type else 0.02
                for lab in ctl.net.node(nid).labels
            ]
            ctl.net.attach_evidence(nid, np.array(lam))
        ctl.net.propagate()
        team_node = next(n for n, b in ctl.bindings.items() if b.entity == "w-team-a")
        act = self.find(ctl, "SEARCH", team_node)
        res = execute_action(
            act, ctl.world, ctl.net, np.random.default_rng(1), ctl.bindings, mb
        )
        assert res.outcome == "match"
        assert res.parent_entity == "w-tf"
        assert len(res.siblings) == 3  # both teams and the HQ

    def test_outcome_determinism_per_stream(self, started):
        from percept.world import execute_action

        mb, ctl = started
        act = self.find(ctl, "REFINE-TYPE", "u2")
        a = execute_action(act, ctl.world, ctl.net, np.random.default_rng(4), ctl.bindings, mb)
        b = execute_action(act, ctl.world, ctl.net, np.random.default_rng(4), ctl.bindings, mb)
        assert a == b


def test_membership_cycle_rejected():
    with pytest.raises(ScenarioError):
        World(
            entities={
                "a": WorldEntity(id="a", type="vehicle", x=0, y=0, member_of="b"),
                "b": WorldEntity(id="b", type="vehicle", x=1, y=1, member_of="a"),
            },
            terrain=TerrainGrid(1, 1, [["open"]], {"open": {"default": "supports"}}),
            detect_prob=1.0,
            false_alarm_rate=0.0,
            cluster_params=ClusterParams(
                max_intervehicle_distance=1, min_count=1, max_count=5, max_extent=5
            ),
        )
