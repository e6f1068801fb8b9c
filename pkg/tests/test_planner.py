"""Exact knapsack oracle, approximation guarantee, and budget sweeps."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import brute_force_knapsack
from percept.errors import ExactSolverLimitError
from percept.planner import (
    KnapsackInstance,
    KnapsackItem,
    enumerate_optima,
    plan_sweep,
    solve_approx,
    solve_exact,
)

# step-1 action values and costs from the worked selection trace
STEP1_ITEMS = (
    KnapsackItem("refine-type", 11522, 1600),
    KnapsackItem("search", 5761, 842),
    KnapsackItem("terrain-1", 1125, 820),
    KnapsackItem("terrain-2", 769, 820),
    KnapsackItem("terrain-3", 769, 820),
    KnapsackItem("terrain-4", 217, 820),
)


def random_instance(rng, max_n=12, max_cost=100, integral=True):
    n = int(rng.integers(1, max_n + 1))
    items = []
    for i in range(n):
        cost = int(rng.integers(1, max_cost + 1))
        if not integral:
            cost = float(cost) + float(rng.random())
        value = float(rng.integers(0, 500))
        items.append(KnapsackItem(f"i{i:02d}", value, cost))
    budget = float(rng.integers(0, int(sum(it.cost for it in items)) + 2))
    return KnapsackInstance(items=tuple(items), budget=budget)


class TestExact:
    def test_zero_budget_gives_empty_plan(self):
        inst = KnapsackInstance(items=STEP1_ITEMS, budget=0)
        plan = solve_exact(inst)
        assert plan.selected == () and plan.total_value == 0.0

    def test_everything_fits(self):
        inst = KnapsackInstance(items=STEP1_ITEMS, budget=10**6)
        plan = solve_exact(inst)
        assert set(plan.selected) == {it.id for it in STEP1_ITEMS}

    def test_step1_budget_selects_all_six(self):
        # total cost is exactly 1600 + 842 + 4 * 820 = 5722
        inst = KnapsackInstance(items=STEP1_ITEMS, budget=5722)
        plan = solve_exact(inst)
        assert len(plan.selected) == 6
        assert plan.total_value == 11522 + 5761 + 1125 + 769 + 769 + 217 == 20163
        assert plan.total_cost == 5722

    def test_tight_budget_takes_the_dominant_item(self):
        inst = KnapsackInstance(items=STEP1_ITEMS, budget=1600)
        plan = solve_exact(inst)
        assert plan.selected == ("refine-type",)
        assert plan.total_value == 11522

    @pytest.mark.parametrize("case", range(300))
    def test_matches_brute_force(self, case):
        rng = np.random.default_rng(2000 + case)
        inst = random_instance(rng)
        plan = solve_exact(inst)
        value, cost, ids = brute_force_knapsack(inst.items, inst.budget)
        assert plan.total_value == pytest.approx(value, abs=1e-9)
        assert plan.total_cost == pytest.approx(cost, abs=1e-9)
        assert plan.selected == ids

    @pytest.mark.parametrize("case", range(40))
    def test_fractional_costs_small_instances(self, case):
        rng = np.random.default_rng(3000 + case)
        inst = random_instance(rng, max_n=10, integral=False)
        plan = solve_exact(inst)
        value, cost, ids = brute_force_knapsack(inst.items, inst.budget)
        assert plan.total_value == pytest.approx(value, abs=1e-9)
        assert plan.selected == ids

    def test_fractional_costs_above_limit_raise(self):
        items = tuple(KnapsackItem(f"i{k}", 1.0, 0.5 + k) for k in range(30))
        with pytest.raises(ExactSolverLimitError):
            solve_exact(KnapsackInstance(items=items, budget=100.0), oracle_limit=24)

    def test_determinism(self):
        rng = np.random.default_rng(11)
        inst = random_instance(rng, max_n=12)
        assert solve_exact(inst) == solve_exact(inst)

    def test_duplicate_ids_rejected(self):
        with pytest.raises(ValueError):
            KnapsackInstance(
                items=(KnapsackItem("a", 1, 1), KnapsackItem("a", 2, 2)), budget=3
            )


class TestApprox:
    def test_single_dominant_item(self):
        items = (
            KnapsackItem("big", 100.0, 5),
            KnapsackItem("small", 1.0, 5),
        )
        plan = solve_approx(KnapsackInstance(items=items, budget=5), epsilon=0.5)
        assert plan.selected == ("big",)

    def test_density_trap(self):
        # greedy by value density picks the 60@10 item first and misses 220
        items = (
            KnapsackItem("a", 60, 10),
            KnapsackItem("b", 100, 20),
            KnapsackItem("c", 120, 30),
        )
        inst = KnapsackInstance(items=items, budget=50)
        assert brute_force_knapsack(items, 50)[0] == 220
        for eps in (0.25, 0.1, 0.01):
            plan = solve_approx(inst, eps)
            assert (220 - plan.total_value) / 220 < eps

    @pytest.mark.parametrize("eps", [0.25, 0.1, 0.01])
    def test_guarantee_against_exact(self, eps):
        rng = np.random.default_rng(77)
        for _ in range(120):
            inst = random_instance(rng, max_n=14, max_cost=200)
            opt = solve_exact(inst).total_value
            got = solve_approx(inst, eps).total_value
            if opt > 0:
                assert (opt - got) / opt < eps
            assert got <= opt + 1e-9

    def test_feasibility(self):
        rng = np.random.default_rng(123)
        for _ in range(100):
            inst = random_instance(rng)
            plan = solve_approx(inst, 0.2)
            assert plan.total_cost <= inst.budget

    def test_epsilon_validation(self):
        inst = KnapsackInstance(items=STEP1_ITEMS, budget=100)
        with pytest.raises(ValueError):
            solve_approx(inst, 0.0)
        with pytest.raises(ValueError):
            solve_approx(inst, 1.0)

    def test_determinism(self):
        rng = np.random.default_rng(9)
        inst = random_instance(rng, max_n=14)
        assert solve_approx(inst, 0.1) == solve_approx(inst, 0.1)


class TestSweep:
    def test_endpoints(self):
        plans = plan_sweep(STEP1_ITEMS, [0, 10**9])
        assert plans[0].selected == ()
        assert set(plans[1].selected) == {it.id for it in STEP1_ITEMS}

    def test_step1_sweep_sizes(self):
        plans = plan_sweep(STEP1_ITEMS, [842, 2442, 5722])
        assert [len(p.selected) for p in plans] == [1, 2, 6]
        assert plans[0].selected == ("search",)
        assert set(plans[1].selected) == {"refine-type", "search"}

    def test_values_nondecreasing(self):
        rng = np.random.default_rng(55)
        for _ in range(200):
            inst = random_instance(rng, max_n=10)
            budgets = sorted({int(rng.integers(0, 400)) for _ in range(5)})
            if len(budgets) < 2:
                continue
            plans = plan_sweep(inst.items, budgets)
            values = [p.total_value for p in plans]
            assert all(b >= a - 1e-9 for a, b in zip(values, values[1:]))

    def test_budgets_must_increase(self):
        with pytest.raises(ValueError):
            plan_sweep(STEP1_ITEMS, [5, 5])


@settings(max_examples=60, deadline=None)
@given(
    st.lists(
        st.tuples(
            st.integers(min_value=0, max_value=300),
            st.integers(min_value=1, max_value=60),
        ),
        min_size=1,
        max_size=10,
    ),
    st.integers(min_value=0, max_value=400),
    st.sampled_from([0.3, 0.1, 0.02]),
)
def test_property_exact_and_guarantee(pairs, budget, eps):
    items = tuple(
        KnapsackItem(f"i{k:02d}", float(v), float(c)) for k, (v, c) in enumerate(pairs)
    )
    inst = KnapsackInstance(items=items, budget=float(budget))
    plan = solve_exact(inst)
    value, cost, ids = brute_force_knapsack(items, budget)
    assert plan.total_value == pytest.approx(value, abs=1e-9)
    assert plan.selected == ids
    approx = solve_approx(inst, eps)
    assert approx.total_cost <= budget
    if value > 0:
        assert (value - approx.total_value) / value < eps


def test_enumerate_optima_lists_ties():
    items = (
        KnapsackItem("a", 10, 5),
        KnapsackItem("b", 10, 5),
        KnapsackItem("c", 1, 5),
    )
    plans = enumerate_optima(KnapsackInstance(items=items, budget=5), limit=5)
    assert [p.selected for p in plans] == [("a",), ("b",)]
    assert all(p.total_value == 10 for p in plans)
