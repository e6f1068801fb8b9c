"""Action valuation: expected effect of evidence-gathering on parent beliefs.

The value of confirming a hypothesis label is seeded by the goal values at
the top of the model hierarchy and propagated downward: a label is worth
the belief change its confirmation would induce at its parents, weighted
by their values.  An action at a node is then valued by how far its
Bayes-rule posterior over the parent labels moves from the current parent
probabilities.

Two modes are provided.  OUTCOME_MARGINAL marginalizes the action's outcomes
before applying Bayes rule, so an action whose outcomes are informative
but symmetric can score 0.  EXPECTED_ABS_CHANGE averages the absolute
posterior shift over outcomes instead and never scores below the
marginalized mode.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .bayes_net import BayesNet
from .errors import UnsupportedConfigurationError, UnvaluedAncestorError
from .model_base import ModelBase, OutcomeTable


class ValueMode(enum.Enum):
    OUTCOME_MARGINAL = "OUTCOME_MARGINAL"
    EXPECTED_ABS_CHANGE = "EXPECTED_ABS_CHANGE"

    @staticmethod
    def from_str(name: str) -> "ValueMode":
        return ValueMode(name)


@dataclass
class ActionInstance:
    """A concrete executable action bound to a net node."""

    id: str
    kind: str
    target_node: str
    cost: int
    outcome_table: str
    template_id: str
    value: float = 0.0

    def __post_init__(self):
        if self.cost < 0:
            raise ValueError(f"action {self.id}: negative cost")


@dataclass(frozen=True)
class _ParentContext:
    """One resolved bearing of an action: labels, current probability, values."""

    labels: tuple[str, ...]
    prior: np.ndarray
    values: np.ndarray


def _bayes(likelihood: np.ndarray, prior: np.ndarray, what: str) -> np.ndarray:
    joint = likelihood * prior
    total = joint.sum()
    if total <= 0.0:
        raise UnsupportedConfigurationError(
            f"{what}: zero total probability, action cannot bear on this parent"
        )
    return joint / total


class Valuer:
    """Values candidate actions against one immutable snapshot of the net.

    Parent values are computed once per node or prospective group and
    reused across candidates (the memoized top-down pass).
    """

    def __init__(
        self,
        net: BayesNet,
        model_base: ModelBase,
        goal_values: dict[str, float] | None = None,
        mode: ValueMode = ValueMode.OUTCOME_MARGINAL,
    ):
        self.net = net
        self.mb = model_base
        self.goal_values = dict(
            model_base.goal_values if goal_values is None else goal_values
        )
        self.mode = mode
        self.posterior_evals = 0  # vectorized posterior_given_action evaluations
        self._node_values: dict[str, np.ndarray] = {}
        self._group_values: dict[str, np.ndarray] = {}
        self._beliefs: dict[str, np.ndarray] = {
            nid: net.belief(nid) for nid in net.nodes
        }

    # -- value recursion ---------------------------------------------------

    def _node_group(self, node_id: str) -> str | None:
        node = self.net.node(node_id)
        for ref in node.model_refs.values():
            if ref is not None:
                return self.mb.group_of.get(ref)
        return self.mb.group_for_labels(node.labels)

    def node_value_vector(self, node_id: str) -> np.ndarray:
        """V(label) for each label of an instantiated node."""
        if node_id in self._node_values:
            return self._node_values[node_id]
        node = self.net.node(node_id)
        group = self._node_group(node_id)
        if group == self.mb.goal_group:
            vec = np.array(
                [self.goal_values.get(lab, 0.0) for lab in node.labels]
            )
        else:
            parents = self.net.parents(node_id)
            if parents:
                vec = np.zeros(len(node.labels))
                for pid, cpt in parents:
                    vec += self._confirmation_values(
                        cpt.rows, self._beliefs[pid], self.node_value_vector(pid)
                    )
            elif group is not None:
                vec = self.group_value_vector(group)
            else:
                raise UnvaluedAncestorError(
                    f"node {node_id!r} has no parents, no group, and no goal values"
                )
        self._node_values[node_id] = vec
        return vec

    def group_value_vector(self, group: str) -> np.ndarray:
        """V(label) for a not-yet-instantiated group, via a priori priors."""
        if group in self._group_values:
            return self._group_values[group]
        hs = self.mb.hypothesis_set(group)
        if group == self.mb.goal_group:
            vec = np.array([self.goal_values.get(lab, 0.0) for lab in hs.labels])
        else:
            parent_edges = self.mb.group_parents.get(group, ())
            if not parent_edges:
                raise UnvaluedAncestorError(
                    f"group {group!r} has no parents and carries no goal values"
                )
            vec = np.zeros(len(hs.labels))
            for parent_group, cpt_id in parent_edges:
                cpt = self.mb.cpt(cpt_id)
                parent_hs = self.mb.hypothesis_set(parent_group)
                vec += self._confirmation_values(
                    cpt.rows,
                    np.array(parent_hs.priors),
                    self.group_value_vector(parent_group),
                )
        self._group_values[group] = vec
        return vec

    @staticmethod
    def _confirmation_values(
        rows: np.ndarray, parent_prob: np.ndarray, parent_values: np.ndarray
    ) -> np.ndarray:
        """Per-child-label value of full confirmation, via the linking table.

        A child label whose posterior is undefined (zero joint mass) simply
        contributes nothing.
        """
        joint = rows * parent_prob[:, None]  # (parent, child)
        totals = joint.sum(axis=0)
        out = np.zeros(rows.shape[1])
        ok = totals > 0
        post = np.zeros_like(joint)
        post[:, ok] = joint[:, ok] / totals[ok]
        shift = np.abs(post[:, ok] - parent_prob[:, None])
        out[ok] = (shift * parent_values[:, None]).sum(axis=0)
        return out

    # -- parent context resolution ------------------------------------------

    def _contexts(self, action: ActionInstance) -> list[_ParentContext]:
        """Resolve what an action bears on, in precedence order.

        An instantiated net parent wins; otherwise the prospective model
        parent group (a priori probabilities); otherwise, when the outcome
        table's parent axis is the target's own label set, the action bears
        on the node itself.  Anything else bears on nothing and is worth 0.
        """
        table = self.mb.outcome_table(action.outcome_table)
        node = self.net.node(action.target_node)
        out = []
        for pid, _ in self.net.parents(action.target_node):
            pnode = self.net.node(pid)
            if pnode.labels == table.parent_labels:
                out.append(
                    _ParentContext(
                        labels=pnode.labels,
                        prior=self._beliefs[pid],
                        values=self.node_value_vector(pid),
                    )
                )
        if out:
            return out
        group = self._node_group(action.target_node)
        if group is not None:
            for parent_group, _ in self.mb.group_parents.get(group, ()):
                hs = self.mb.hypothesis_set(parent_group)
                if hs.labels == table.parent_labels:
                    out.append(
                        _ParentContext(
                            labels=hs.labels,
                            prior=np.array(hs.priors),
                            values=self.group_value_vector(parent_group),
                        )
                    )
        if out:
            return out
        if table.parent_labels == node.labels:
            return [
                _ParentContext(
                    labels=node.labels,
                    prior=self._beliefs[action.target_node],
                    values=self.node_value_vector(action.target_node),
                )
            ]
        return []

    # -- the operations ------------------------------------------------------

    def _posterior_vector(
        self, table: OutcomeTable, child_label: str, prior: np.ndarray
    ) -> np.ndarray:
        """p(parent | child label, action), outcomes marginalized; Bayes rule."""
        self.posterior_evals += 1
        ci = table.child_labels.index(child_label)
        likelihood = table.entries[ci].sum(axis=0)  # p(child, action | parent)
        return _bayes(likelihood, prior, f"action over table {table.id}")

    def posterior_given_action(
        self, parent_label: str, child_label: str, action: ActionInstance
    ) -> float:
        """Posterior probability of one parent label given the child and action."""
        table = self.mb.outcome_table(action.outcome_table)
        contexts = self._contexts(action)
        for ctx in contexts:
            if parent_label in ctx.labels:
                post = self._posterior_vector(table, child_label, ctx.prior)
                return float(post[ctx.labels.index(parent_label)])
        raise UnsupportedConfigurationError(
            f"action {action.id}: no parent context carries label {parent_label!r}"
        )

    def value_of_action_at_hypothesis(
        self, h_label: str, action: ActionInstance, mode: ValueMode | None = None
    ) -> float:
        mode = mode or self.mode
        table = self.mb.outcome_table(action.outcome_table)
        if h_label not in table.child_labels:
            raise UnsupportedConfigurationError(
                f"action {action.id}: table {table.id} does not cover label {h_label!r}"
            )
        total = 0.0
        for ctx in self._contexts(action):
            if mode is ValueMode.OUTCOME_MARGINAL:
                post = self._posterior_vector(table, h_label, ctx.prior)
                shift = np.abs(post - ctx.prior)
            else:
                ci = table.child_labels.index(h_label)
                self.posterior_evals += 1
                joint = table.entries[ci] * ctx.prior[None, :]  # (outcome, parent)
                denom = joint.sum()
                if denom <= 0.0:
                    raise UnsupportedConfigurationError(
                        f"action {action.id}: zero probability for label {h_label!r}"
                    )
                shift = np.zeros(len(ctx.labels))
                for oi in range(len(table.outcomes)):
                    mass = joint[oi].sum()
                    if mass <= 0.0:
                        continue
                    post_o = joint[oi] / mass
                    shift += (mass / denom) * np.abs(post_o - ctx.prior)
            total += float((shift * ctx.values).sum())
        return total

    def value_of_action_at_node(
        self, action: ActionInstance, mode: ValueMode | None = None
    ) -> float:
        """Sum of per-hypothesis values over the target node's labels."""
        node = self.net.node(action.target_node)
        table = self.mb.outcome_table(action.outcome_table)
        if table.child_labels != node.labels:
            raise UnsupportedConfigurationError(
                f"action {action.id}: table {table.id} child labels do not match "
                f"node {node.id!r}"
            )
        return float(
            sum(self.value_of_action_at_hypothesis(lab, action, mode) for lab in node.labels)
        )

    def value_all_candidates(self, candidates) -> list[ActionInstance]:
        """Fill in the value of every candidate; parent values are shared."""
        for cand in candidates:
            cand.value = self.value_of_action_at_node(cand)
        return list(candidates)


def value_all_candidates(
    net: BayesNet,
    model_base: ModelBase,
    candidates,
    goal_values: dict[str, float] | None = None,
    mode: ValueMode = ValueMode.OUTCOME_MARGINAL,
) -> list[ActionInstance]:
    return Valuer(net, model_base, goal_values, mode).value_all_candidates(candidates)
