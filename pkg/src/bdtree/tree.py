"""Binary classification trees: split rules, leaf statistics, routing, and
the structural counts the sampler's proposal ratios need.

Trees built by the sampler are persistent: moves produce a new tree that
shares all untouched nodes with the old one, so accepted candidates simply
replace the current tree. Leaves carry the indices of the training points
they hold plus per-class counts; snapshots taken for an ensemble drop the
indices and keep only rules and counts.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import Continuous, Dataset, FeatureKind, Nominal


@dataclass(frozen=True)
class Threshold:
    """Continuous predicate: x[feature] <= value routes left."""

    value: float


@dataclass(frozen=True)
class Category:
    """Nominal predicate: x[feature] == value routes left."""

    value: int


Predicate = Threshold | Category


@dataclass(frozen=True)
class SplitRule:
    feature: int  # 0-based
    predicate: Predicate

    def goes_left(self, x) -> bool:
        v = x[self.feature]
        if isinstance(self.predicate, Threshold):
            return bool(v <= self.predicate.value)
        return bool(v == self.predicate.value)

    def mask(self, column: np.ndarray) -> np.ndarray:
        # NaN (sentinel) compares False either way and routes right
        if isinstance(self.predicate, Threshold):
            return column <= self.predicate.value
        return column == self.predicate.value

    def matches_kind(self, kind: FeatureKind) -> bool:
        if isinstance(self.predicate, Threshold):
            return isinstance(kind, Continuous)
        return isinstance(kind, Nominal)


class Leaf:
    """Terminal node: member row indices and per-class counts.

    `members` is None on ensemble snapshots. `term` caches this leaf's
    log-likelihood contribution under the chain's prior.
    """

    __slots__ = ("members", "counts", "term")

    def __init__(self, members, counts, term=None):
        self.members = members
        self.counts = counts
        self.term = term

    @property
    def size(self) -> int:
        return int(self.counts.sum())


class Split:
    __slots__ = ("rule", "left", "right")

    def __init__(self, rule: SplitRule, left, right):
        self.rule = rule
        self.left = left
        self.right = right


Node = Leaf | Split


class Tree:
    """A binary decision tree over one dataset's schema."""

    __slots__ = ("root", "class_count", "log_lik")

    def __init__(self, root: Node, class_count: int, log_lik: float | None = None):
        self.root = root
        self.class_count = class_count
        self.log_lik = log_lik

    def leaves(self) -> list[Leaf]:
        out, stack = [], [self.root]
        while stack:
            node = stack.pop()
            if isinstance(node, Leaf):
                out.append(node)
            else:
                stack.append(node.right)
                stack.append(node.left)
        return out

    def leaf_count(self) -> int:
        return len(self.leaves())

    def split_count(self) -> int:
        return self.leaf_count() - 1

    def node_count(self) -> int:
        return 2 * self.leaf_count() - 1


def make_leaf(members: np.ndarray, y: np.ndarray, class_count: int) -> Leaf:
    counts = np.bincount(y[members], minlength=class_count + 1)[1:]
    return Leaf(members=members, counts=counts)


def single_leaf_tree(d: Dataset) -> Tree:
    return Tree(root=make_leaf(np.arange(d.n_rows), d.y, d.class_count), class_count=d.class_count)


def subtree_leaves(node: Node) -> list[Leaf]:
    out, stack = [], [node]
    while stack:
        nd = stack.pop()
        if isinstance(nd, Leaf):
            out.append(nd)
        else:
            stack.append(nd.right)
            stack.append(nd.left)
    return out


def subtree_members(node: Node) -> np.ndarray:
    parts = [lf.members for lf in subtree_leaves(node)]
    return parts[0] if len(parts) == 1 else np.concatenate(parts)


def split_sites(tree: Tree) -> list[tuple[Split, Split | None, str | None]]:
    """All split nodes as (node, parent, side) with preorder positions."""
    out = []
    stack: list[tuple[Node, Split | None, str | None]] = [(tree.root, None, None)]
    while stack:
        node, parent, side = stack.pop()
        if isinstance(node, Split):
            out.append((node, parent, side))
            stack.append((node.right, node, "right"))
            stack.append((node.left, node, "left"))
    return out


def leaf_sites(tree: Tree) -> list[tuple[Leaf, Split | None, str | None]]:
    out = []
    stack: list[tuple[Node, Split | None, str | None]] = [(tree.root, None, None)]
    while stack:
        node, parent, side = stack.pop()
        if isinstance(node, Leaf):
            out.append((node, parent, side))
        else:
            stack.append((node.right, node, "right"))
            stack.append((node.left, node, "left"))
    return out


def prunable_sites(tree: Tree) -> list[tuple[Split, Split | None, str | None]]:
    """Split nodes whose children are both leaves, the death-move targets."""
    return [
        (node, parent, side)
        for node, parent, side in split_sites(tree)
        if isinstance(node.left, Leaf) and isinstance(node.right, Leaf)
    ]


def prunable_count(tree: Tree) -> int:
    return len(prunable_sites(tree))


def route(tree: Tree, x) -> Leaf:
    """Follow split predicates for one feature vector down to its leaf."""
    node = tree.root
    while isinstance(node, Split):
        if node.rule.feature >= len(x):
            raise ValueError(f"rule on feature {node.rule.feature} but vector has {len(x)} components")
        node = node.left if node.rule.goes_left(x) else node.right
    return node


def route_all(tree: Tree, x: np.ndarray) -> list[tuple[Leaf, np.ndarray]]:
    """Vectorized routing of a matrix: (leaf, row indices) per leaf reached."""
    out = []
    stack: list[tuple[Node, np.ndarray]] = [(tree.root, np.arange(x.shape[0]))]
    while stack:
        node, idx = stack.pop()
        if isinstance(node, Leaf):
            out.append((node, idx))
            continue
        mask = node.rule.mask(x[idx, node.rule.feature])
        stack.append((node.right, idx[~mask]))
        stack.append((node.left, idx[mask]))
    return out


def check_compatible(tree: Tree, kinds: tuple[FeatureKind, ...]) -> None:
    for node, _, _ in split_sites(tree):
        f = node.rule.feature
        if f < 0 or f >= len(kinds):
            raise ValueError(f"rule references feature {f} outside schema of {len(kinds)} features")
        if not tree_rule_matches(node.rule, kinds[f]):
            raise ValueError(f"rule kind mismatch on feature {f}")


def tree_rule_matches(rule: SplitRule, kind: FeatureKind) -> bool:
    return rule.matches_kind(kind)


def fit_subtree(node: Node, members: np.ndarray, d: Dataset) -> Node:
    """Rebuild a subtree with fresh leaves holding `members` routed through
    the existing rules. Structure and rules are shared semantics, new nodes."""
    if isinstance(node, Leaf):
        return make_leaf(members, d.y, d.class_count)
    mask = node.rule.mask(d.x[members, node.rule.feature])
    return Split(
        rule=node.rule,
        left=fit_subtree(node.left, members[mask], d),
        right=fit_subtree(node.right, members[~mask], d),
    )


def refit_leaves(tree: Tree, d: Dataset) -> Tree:
    """Recompute every leaf's membership and counts from scratch; the cached
    log-likelihood is dropped."""
    tree.root = fit_subtree(tree.root, np.arange(d.n_rows), d)
    tree.log_lik = None
    return tree


def replace_node(tree: Tree, path: list[tuple[Split, str]], replacement: Node) -> Tree:
    """New tree with the node at `path` swapped out; nodes along the path are
    copied, everything else is shared."""
    node = replacement
    for parent, side in reversed(path):
        if side == "left":
            node = Split(rule=parent.rule, left=node, right=parent.right)
        else:
            node = Split(rule=parent.rule, left=parent.left, right=node)
    return Tree(root=node, class_count=tree.class_count, log_lik=tree.log_lik)


def path_to(tree: Tree, target: Node) -> list[tuple[Split, str]] | None:
    """Parent chain from the root down to `target` (exclusive), as
    (split, side) steps; None if the node is not in the tree."""

    def walk(node, acc):
        if node is target:
            return acc
        if isinstance(node, Split):
            found = walk(node.left, acc + [(node, "left")])
            if found is not None:
                return found
            return walk(node.right, acc + [(node, "right")])
        return None

    return walk(tree.root, [])


def predict_leaf_posterior(tree: Tree, leaf: Leaf, alpha: np.ndarray) -> np.ndarray:
    """Dirichlet posterior-mean class probabilities for one leaf."""
    alpha = np.asarray(alpha, dtype=np.float64)
    if alpha.sum() <= 0:
        raise ValueError("alpha must sum to a positive value")
    return (leaf.counts + alpha) / (leaf.size + alpha.sum())


def snapshot(tree: Tree) -> Tree:
    """Immutable copy for an ensemble: rules and counts only, no members."""

    def copy(node):
        if isinstance(node, Leaf):
            return Leaf(members=None, counts=node.counts.copy(), term=node.term)
        return Split(rule=node.rule, left=copy(node.left), right=copy(node.right))

    return Tree(root=copy(tree.root), class_count=tree.class_count, log_lik=tree.log_lik)


def to_record(tree: Tree, iteration: int) -> dict:
    """JSON-ready record: preorder node list with 1-based feature indices."""
    nodes = []

    def emit(node):
        if isinstance(node, Leaf):
            nodes.append({"kind": "leaf", "counts": [int(c) for c in node.counts]})
            return
        pred = node.rule.predicate
        predicate = (
            {"type": "threshold", "value": float(pred.value)}
            if isinstance(pred, Threshold)
            else {"type": "category", "value": int(pred.value)}
        )
        nodes.append({"kind": "split", "feature": node.rule.feature + 1, "predicate": predicate})
        emit(node.left)
        emit(node.right)

    emit(tree.root)
    return {
        "iteration": int(iteration),
        "log_lik": None if tree.log_lik is None else float(tree.log_lik),
        "nodes": nodes,
    }


def from_record(record: dict, class_count: int | None = None) -> tuple[Tree, int]:
    """Rebuild a (member-free) tree from a `to_record` dict; returns the tree
    and its iteration number."""
    nodes = record["nodes"]
    pos = 0

    def build():
        nonlocal pos
        spec = nodes[pos]
        pos += 1
        if spec["kind"] == "leaf":
            return Leaf(members=None, counts=np.asarray(spec["counts"], dtype=np.int64))
        pred = spec["predicate"]
        predicate = (
            Threshold(value=float(pred["value"]))
            if pred["type"] == "threshold"
            else Category(value=int(pred["value"]))
        )
        rule = SplitRule(feature=int(spec["feature"]) - 1, predicate=predicate)
        return Split(rule=rule, left=build(), right=build())

    root = build()
    if pos != len(nodes):
        raise ValueError("trailing nodes in tree record")
    if class_count is None:
        first_leaf = subtree_leaves(root)[0]
        class_count = len(first_leaf.counts)
    tree = Tree(root=root, class_count=class_count, log_lik=record.get("log_lik"))
    return tree, int(record["iteration"])
