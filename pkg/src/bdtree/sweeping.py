"""Sweeping strategy: range-based implicit split prior, whole-range rule
proposals, and removal of undersized partitions after birth/change moves.

Rules are proposed over a feature's full training range regardless of how
narrow the data range at the proposing node is. Deep nodes therefore draw
mostly useless rules, which get swept or resampled; that falling success
probability is what realizes the depth-decaying split prior without ever
evaluating it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import Dataset, FeatureIndex, FeatureKind, Nominal
from .tree import (
    Category,
    Leaf,
    Node,
    Split,
    SplitRule,
    Threshold,
    Tree,
    fit_subtree,
    path_to,
    replace_node,
    subtree_leaves,
    subtree_members,
)


@dataclass(frozen=True)
class Proceed:
    """All new partitions are big enough; the candidate stands."""

    tree: Tree
    changed: Node


@dataclass(frozen=True)
class SweptToDeath:
    """One undersized partition was removed; the move became a death."""

    tree: Tree
    changed: Node


class Resample:
    """The candidate is discarded and the move redrawn."""

    __slots__ = ()


RESAMPLE = Resample()

SweepOutcome = Proceed | SweptToDeath | Resample


def split_probability(level_range: tuple[float, float], root_range: tuple[float, float]) -> float:
    """Width of the node-level value range relative to the whole-data range."""
    lo, hi = level_range
    root_lo, root_hi = root_range
    if root_hi <= root_lo:
        raise ValueError("degenerate root range")
    if lo < root_lo or hi > root_hi:
        raise ValueError("level range must be contained in the root range")
    return max(hi - lo, 0.0) / (root_hi - root_lo)


def draw_rule_uniform(feature: int, index: FeatureIndex, kind: FeatureKind, rng) -> SplitRule:
    """Threshold uniform over the feature's full observed range; nominal
    features draw a category uniformly instead."""
    if isinstance(kind, Nominal):
        cats = index.values[feature]
        return SplitRule(feature=feature, predicate=Category(value=int(rng.choice(cats))))
    lo, hi = index.value_range(feature)
    if hi <= lo:
        raise ValueError(f"feature {feature} has a degenerate range [{lo}, {hi}]")
    return SplitRule(feature=feature, predicate=Threshold(value=float(rng.uniform(lo, hi))))


def draw_variable_excluding(current: int, m: int, rng) -> int:
    """Uniform over the other m - 1 features."""
    if m < 2:
        raise ValueError("need at least 2 features to exclude one")
    v = int(rng.integers(m - 1))
    return v if v < current else v + 1


def draw_rule_gaussian(rule: SplitRule, sigma: float, index: FeatureIndex, kind: FeatureKind, rng) -> SplitRule:
    """Local walk: a Gaussian step on the threshold. Nominal features fall
    back to a uniform category redraw."""
    if sigma <= 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    if isinstance(kind, Nominal):
        cats = index.values[rule.feature]
        return SplitRule(feature=rule.feature, predicate=Category(value=int(rng.choice(cats))))
    if not isinstance(rule.predicate, Threshold):
        raise ValueError("gaussian walk needs a threshold rule")
    t = float(rng.normal(rule.predicate.value, sigma))
    return SplitRule(feature=rule.feature, predicate=Threshold(value=t))


def _undersized(leaves: list[Leaf], p_min: int) -> list[Leaf]:
    return [lf for lf in leaves if lf.size < p_min]


def _without_leaf(node: Node, offender: Leaf, d: Dataset) -> Node | None:
    """Copy of `node` with the offending leaf removed: its parent is
    replaced by the sibling subtree refitted over the united points.
    None when the offender is not below `node`."""
    if isinstance(node, Leaf):
        return None
    if node.left is offender or node.right is offender:
        sibling = node.right if node.left is offender else node.left
        united = np.concatenate([offender.members, subtree_members(sibling)])
        return fit_subtree(sibling, united, d)
    left_new = _without_leaf(node.left, offender, d)
    if left_new is not None:
        return Split(rule=node.rule, left=left_new, right=node.right)
    right_new = _without_leaf(node.right, offender, d)
    if right_new is not None:
        return Split(rule=node.rule, left=node.left, right=right_new)
    return None


def resolve(move_kind: str, candidate: Tree, p_min: int, changed: Node, d: Dataset) -> SweepOutcome:
    """Sort a refitted candidate into proceed / swept death / resample.

    New partitions are the leaves of the subtree below the modified node.
    With none undersized the candidate proceeds. With exactly one, a birth
    is resampled while a change move removes the offending leaf: its parent
    is replaced by the sibling subtree, refitted over the united points.
    With two or more undersized partitions the move is resampled.
    """
    if move_kind not in ("birth", "change"):
        raise ValueError(f"unknown move kind {move_kind!r}")
    new_leaves = subtree_leaves(changed)
    offenders = _undersized(new_leaves, p_min)
    if not offenders:
        return Proceed(tree=candidate, changed=changed)
    if len(offenders) > 1 or move_kind == "birth":
        return RESAMPLE
    offender = offenders[0]
    if changed is offender:
        return RESAMPLE  # nothing left to keep below the modified node
    swept_subtree = _without_leaf(changed, offender, d)
    if swept_subtree is None:
        return RESAMPLE
    path = path_to(candidate, changed)
    swept = replace_node(candidate, path, swept_subtree)
    swept.log_lik = None
    return SweptToDeath(tree=swept, changed=swept_subtree)
