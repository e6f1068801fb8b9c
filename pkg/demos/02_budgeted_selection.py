"""Selecting evidence-gathering actions under a time budget.

Feeds a published six-action selection step into the exact knapsack
solver and the approximation scheme, then sweeps the budget to show the
family of plans it induces.
"""

from percept import KnapsackInstance, KnapsackItem, plan_sweep, solve_approx, solve_exact

items = (
    KnapsackItem("refine-type", 11522, 1600),
    KnapsackItem("search", 5761, 842),
    KnapsackItem("terrain-1", 1125, 820),
    KnapsackItem("terrain-2", 769, 820),
    KnapsackItem("terrain-3", 769, 820),
    KnapsackItem("terrain-4", 217, 820),
)

print("budget 5722 (everything just fits):")
plan = solve_exact(KnapsackInstance(items=items, budget=5722))
print(f"  exact: {plan.selected} value={plan.total_value:.0f} cost={plan.total_cost:.0f}")

print("\nbudget 1600 (forced to choose):")
plan = solve_exact(KnapsackInstance(items=items, budget=1600))
print(f"  exact: {plan.selected} value={plan.total_value:.0f}")

print("\napproximation guarantee at eps=0.1:")
inst = KnapsackInstance(items=items, budget=3000)
exact = solve_exact(inst)
approx = solve_approx(inst, epsilon=0.1)
gap = (exact.total_value - approx.total_value) / exact.total_value
print(f"  exact value {exact.total_value:.0f}, approx value {approx.total_value:.0f}, "
      f"relative gap {gap:.4f} < 0.1")

print("\nbudget sweep (plan family, values nondecreasing):")
for budget, plan in zip((842, 2442, 5722), plan_sweep(items, (842, 2442, 5722))):
    print(f"  T={budget:>5}: {len(plan.selected)} actions, value {plan.total_value:.0f}")
