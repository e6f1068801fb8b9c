"""0/1 knapsack solvers for action selection under a time budget.

``solve_exact`` is the reference oracle: a dynamic program over integral
costs (or exhaustive enumeration for small instances with fractional
costs).  ``solve_approx`` is a value-scaling approximation scheme whose
result value P satisfies (P' - P) / P' < epsilon against the optimum P'.
Both are pure and deterministic; ties are broken toward the plan with the
lower total cost and then the lexicographically smallest id set.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ExactSolverLimitError

VALUE_TOL = 1e-9  # relative slack when matching float value sums

DEFAULT_ORACLE_LIMIT = 24


@dataclass(frozen=True)
class KnapsackItem:
    id: str
    value: float
    cost: float

    def __post_init__(self):
        if not (math.isfinite(self.value) and math.isfinite(self.cost)):
            raise ValueError(f"item {self.id}: value and cost must be finite")
        if self.value < 0 or self.cost < 0:
            raise ValueError(f"item {self.id}: value and cost must be >= 0")


@dataclass(frozen=True)
class KnapsackInstance:
    items: tuple[KnapsackItem, ...]
    budget: float

    def __post_init__(self):
        ids = [it.id for it in self.items]
        if len(set(ids)) != len(ids):
            raise ValueError("knapsack item ids must be distinct")
        if self.budget < 0:
            raise ValueError(f"budget must be >= 0, got {self.budget}")

    @staticmethod
    def from_dict(raw: dict) -> "KnapsackInstance":
        budget = raw.get("budget_T", raw.get("budget"))
        if budget is None:
            raise ValueError("instance needs a budget_T field")
        items = tuple(
            KnapsackItem(id=str(r["id"]), value=float(r["value"]), cost=float(r["cost"]))
            for r in raw.get("items", [])
        )
        return KnapsackInstance(items=items, budget=float(budget))


@dataclass(frozen=True)
class Plan:
    selected: tuple[str, ...]
    total_value: float
    total_cost: float

    def to_dict(self) -> dict:
        return {
            "selected": list(self.selected),
            "total_value": self.total_value,
            "total_cost": self.total_cost,
        }


EMPTY_PLAN = Plan(selected=(), total_value=0.0, total_cost=0.0)


def _plan_from_ids(inst: KnapsackInstance, ids) -> Plan:
    chosen = [it for it in inst.items if it.id in set(ids)]
    return Plan(
        selected=tuple(sorted(ids)),
        total_value=float(sum(it.value for it in chosen)),
        total_cost=float(sum(it.cost for it in chosen)),
    )


def _integral_costs(items) -> bool:
    return all(abs(it.cost - round(it.cost)) <= 1e-9 for it in items)


def solve_exact(inst: KnapsackInstance, oracle_limit: int = DEFAULT_ORACLE_LIMIT) -> Plan:
    """Maximum-value plan within the budget, canonically tie-broken.

    Requires integral costs (dynamic program) or at most ``oracle_limit``
    items (exhaustive enumeration); anything larger raises
    :class:`ExactSolverLimitError`.
    """
    items = sorted(
        (it for it in inst.items if it.cost <= inst.budget), key=lambda it: it.id
    )
    if not items:
        return EMPTY_PLAN
    if _integral_costs(items):
        return _solve_dp(inst, items)
    if len(items) <= oracle_limit:
        return _solve_enum(inst, items)
    raise ExactSolverLimitError(
        f"{len(items)} items with fractional costs exceed the oracle limit "
        f"{oracle_limit}"
    )


def _solve_dp(inst: KnapsackInstance, items) -> Plan:
    costs = [int(round(it.cost)) for it in items]
    cap = sum(costs)
    if math.isfinite(inst.budget):
        cap = min(cap, int(math.floor(inst.budget + 1e-9)))

    # forced choices for zero-cost items: take them iff they carry value
    forced = [it for it, w in zip(items, costs) if w == 0 and it.value > 0]
    rest = [(it, w) for it, w in zip(items, costs) if w > 0]

    best_v = np.zeros(cap + 1)
    best_c = np.zeros(cap + 1, dtype=np.int64)
    for it, w in rest:
        if w > cap:
            continue
        cand_v = best_v[: cap + 1 - w] + it.value
        cand_c = best_c[: cap + 1 - w] + w
        cur_v = best_v[w:]
        cur_c = best_c[w:]
        better = cand_v > cur_v
        tie = cand_v == cur_v
        best_v[w:] = np.where(better, cand_v, cur_v)
        best_c[w:] = np.where(better, cand_c, np.where(tie, np.minimum(cur_c, cand_c), cur_c))

    target_v = float(best_v[cap])
    target_c = int(best_c[cap])

    # suffix tables: m[i][c] = max value from items[i:] at cost exactly c
    n = len(rest)
    neg = -math.inf
    m = [None] * (n + 1)
    m[n] = np.full(target_c + 1, neg)
    m[n][0] = 0.0
    for i in range(n - 1, -1, -1):
        it, w = rest[i]
        cur = m[i + 1].copy()
        if w <= target_c:
            shifted = np.full(target_c + 1, neg)
            shifted[w:] = m[i + 1][: target_c + 1 - w] + it.value
            cur = np.maximum(cur, shifted)
        m[i] = cur

    # lexicographically smallest id set among (target_v, target_c) optima:
    # walking ids in ascending order, stop as soon as the remainder is zero,
    # otherwise include the item whenever a feasible completion exists
    tol = VALUE_TOL * max(1.0, abs(target_v))
    sel = []
    dv, dc = target_v, target_c
    for i, (it, w) in enumerate(rest):
        if dc == 0 and abs(dv) <= tol:
            break
        if w <= dc and m[i + 1][dc - w] >= dv - it.value - tol:
            sel.append(it.id)
            dv -= it.value
            dc -= w
    sel.extend(it.id for it in forced)
    return _plan_from_ids(inst, sel)


def _subset_sums(values: np.ndarray) -> np.ndarray:
    """Sums over all 2^n subsets, subset bitmask k uses item i iff bit i of k."""
    out = np.zeros(1)
    for v in values:
        out = np.concatenate([out, out + v])
    return out


def _solve_enum(inst: KnapsackInstance, items) -> Plan:
    n = len(items)
    values = np.array([it.value for it in items])
    costs = np.array([it.cost for it in items])
    low = min(n, 16)
    v_low, c_low = _subset_sums(values[:low]), _subset_sums(costs[:low])
    best = None  # (-value, cost, id tuple)
    for high in range(1 << (n - low)):
        hv = hc = 0.0
        for b in range(n - low):
            if high >> b & 1:
                hv += values[low + b]
                hc += costs[low + b]
        feas = c_low + hc <= inst.budget
        if not np.any(feas):
            continue
        tot = np.where(feas, v_low + hv, -np.inf)
        vmax = tot.max()
        tol = VALUE_TOL * max(1.0, abs(vmax))
        for k in np.flatnonzero(tot >= vmax - tol):
            mask = int(k) | (high << low)
            ids = tuple(items[i].id for i in range(n) if mask >> i & 1)
            key = (-float(v_low[k] + hv), float(c_low[k] + hc), ids)
            if best is None or key < best:
                best = key
    if best is None:
        return EMPTY_PLAN
    return _plan_from_ids(inst, best[2])


def solve_approx(inst: KnapsackInstance, epsilon: float) -> Plan:
    """Approximate plan with relative value error strictly below ``epsilon``.

    Value-scaling scheme: values are scaled by K = epsilon * Vmax / N and
    floored, then a min-cost dynamic program over scaled value recovers a
    plan whose true value P satisfies (P' - P)/P' < epsilon.  Deterministic
    for fixed input; zero-value items are never selected.
    """
    if not (0.0 < epsilon < 1.0):
        raise ValueError(f"epsilon must be in (0, 1), got {epsilon}")
    items = sorted(
        (it for it in inst.items if it.cost <= inst.budget and it.value > 0),
        key=lambda it: it.id,
    )
    if not items:
        return EMPTY_PLAN
    vmax = max(it.value for it in items)
    scale = epsilon * vmax / len(items)
    scaled = [int(math.floor(it.value / scale)) for it in items]
    total = sum(scaled)

    inf = math.inf
    min_cost = np.full(total + 1, inf)
    min_cost[0] = 0.0
    keep = np.zeros((len(items), total + 1), dtype=bool)
    for i, (it, s) in enumerate(zip(items, scaled)):
        if s == 0:
            continue
        cand = np.full(total + 1, inf)
        cand[s:] = min_cost[:-s] + it.cost
        takes = cand < min_cost  # strict: prefer excluding on cost ties
        keep[i] = takes
        min_cost = np.where(takes, cand, min_cost)

    reachable = np.flatnonzero(min_cost <= inst.budget)
    best_s = int(reachable.max())
    sel = []
    s = best_s
    for i in range(len(items) - 1, -1, -1):
        if keep[i, s]:
            sel.append(items[i].id)
            s -= scaled[i]
    return _plan_from_ids(inst, sel)


def plan_sweep(items, budgets) -> list[Plan]:
    """One exact plan per budget; budgets must be strictly increasing."""
    budgets = list(budgets)
    if any(b2 <= b1 for b1, b2 in zip(budgets, budgets[1:])):
        raise ValueError("budgets must be strictly increasing")
    items = tuple(items)
    return [solve_exact(KnapsackInstance(items=items, budget=b)) for b in budgets]


def enumerate_optima(
    inst: KnapsackInstance, limit: int = 10, oracle_limit: int = 20
) -> list[Plan]:
    """Up to ``limit`` optimal plans (the paper's equivalence class), canonical
    order.  Exhaustive; intended for small instances only."""
    items = [it for it in inst.items if it.cost <= inst.budget]
    if len(items) > oracle_limit:
        raise ExactSolverLimitError(f"{len(items)} items exceed limit {oracle_limit}")
    best = solve_exact(inst)
    tol = VALUE_TOL * max(1.0, abs(best.total_value))
    found = []
    for mask in range(1 << len(items)):
        ids = [items[i].id for i in range(len(items)) if mask >> i & 1]
        cost = sum(it.cost for it in items if it.id in set(ids))
        value = sum(it.value for it in items if it.id in set(ids))
        if cost <= inst.budget and value >= best.total_value - tol:
            found.append(_plan_from_ids(inst, ids))
    found.sort(key=lambda p: (p.total_cost, p.selected))
    return found[:limit]
