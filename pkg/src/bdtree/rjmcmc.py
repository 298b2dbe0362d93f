"""Reversible-jump sampling over classification trees.

Birth and death moves change the number of leaves and carry the printed
proposal ratios built from leaf counts, prunable-node counts and Catalan
numbers; change moves redraw a split's feature or rule in place and are
accepted on the likelihood ratio alone. Proposals that would leave a
partition below the pruning factor are unavailable: the standard strategy
redraws the move, the sweeping strategy additionally converts one-offender
change moves into deaths.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .dataset import Continuous, Dataset, FeatureIndex, Nominal, feature_index
from .likelihood import PriorConfig, leaf_log_term
from .sweeping import (
    RESAMPLE,
    Proceed,
    SweptToDeath,
    draw_rule_gaussian,
    draw_rule_uniform,
    draw_variable_excluding,
)
from .tree import (
    Category,
    Leaf,
    Split,
    SplitRule,
    Threshold,
    Tree,
    leaf_sites,
    make_leaf,
    path_to,
    prunable_count,
    prunable_sites,
    replace_node,
    snapshot,
    split_sites,
    subtree_leaves,
    subtree_members,
)
from . import sweeping
from .tree import fit_subtree


@dataclass(frozen=True)
class ProposalConfig:
    """Move-type probabilities and the change-rule walk scale."""

    p_birth: float = 0.1
    p_death: float = 0.1
    p_change_split: float = 0.2
    p_change_rule: float = 0.6
    sigma: float = 1.0

    def __post_init__(self):
        probs = (self.p_birth, self.p_death, self.p_change_split, self.p_change_rule)
        if any(p < 0 for p in probs):
            raise ValueError("move probabilities must be non-negative")
        if abs(sum(probs) - 1.0) > 1e-12:
            raise ValueError(f"move probabilities must sum to 1, got {sum(probs)}")
        if self.sigma <= 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")


@dataclass(frozen=True)
class ChainConfig:
    burn_in: int
    post_burn_in: int
    thin: int = 7
    seed: int = 0
    strategy: str = "sweeping"
    prior: PriorConfig = PriorConfig()
    proposal: ProposalConfig = ProposalConfig()

    def __post_init__(self):
        if self.burn_in < 0 or self.post_burn_in < 1 or self.thin < 1:
            raise ValueError("need burn_in >= 0, post_burn_in >= 1, thin >= 1")
        if self.strategy not in ("standard", "sweeping"):
            raise ValueError(f"unknown strategy {self.strategy!r}")


@dataclass
class ChainDiagnostics:
    """Per-iteration traces plus whole-run rates.

    acceptance_rate counts accepted/executed proposals over post-burn-in;
    resample_rate is the fraction of all drawn proposals that were declared
    unavailable and redrawn.
    """

    log_lik: np.ndarray
    split_count: np.ndarray
    accepted: np.ndarray
    unavailable: np.ndarray
    acceptance_rate: float
    resample_rate: float
    swept_count: int
    resampled_count: int


@dataclass
class Ensemble:
    """Thinned post-burn-in tree snapshots, the unit of prediction."""

    trees: list[Tree]
    iterations: list[int]
    config: ChainConfig

    def __len__(self) -> int:
        return len(self.trees)

    def mean_split_count(self) -> float:
        return float(np.mean([t.split_count() for t in self.trees]))

    def mean_node_count(self) -> float:
        return float(np.mean([t.node_count() for t in self.trees]))


@dataclass
class Proposal:
    tree: Tree
    log_ratio: float
    leaf_delta: int
    swept: bool = False


def substream(seed: int, *path: int) -> np.random.Generator:
    """Named deterministic RNG stream derived from one root seed."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=tuple(int(p) for p in path)))


def subseed(seed: int, *path: int) -> int:
    """Serializable integer seed for a named substream."""
    return int(np.random.SeedSequence(seed, spawn_key=tuple(int(p) for p in path)).generate_state(1)[0])


def log_catalan(k: int) -> float:
    """Natural log of the k-th Catalan number (2k choose k) / (k + 1)."""
    if k < 1:
        raise ValueError(f"need k >= 1, got {k}")
    return float(gammaln(2 * k + 1) - 2.0 * gammaln(k + 1) - math.log(k + 1))


def chipman_split_prior(depth: int, gamma: float, delta: float) -> float:
    """Depth-decaying split probability gamma * (1 + depth)^-delta."""
    if not 0.0 <= gamma <= 1.0:
        raise ValueError(f"gamma must lie in [0, 1], got {gamma}")
    if delta < 0 or depth < 0:
        raise ValueError("delta and depth must be non-negative")
    return min(max(gamma * (1.0 + depth) ** (-delta), 0.0), 1.0)


def chipman_log_prior(tree: Tree, gamma: float, delta: float) -> float:
    """Log prior of the tree shape under the depth-decaying split prior."""
    total = 0.0
    stack = [(tree.root, 0)]
    while stack:
        node, depth = stack.pop()
        p = chipman_split_prior(depth, gamma, delta)
        p = min(max(p, 1e-300), 1.0 - 1e-16)
        if isinstance(node, Leaf):
            total += math.log(1.0 - p)
        else:
            total += math.log(p)
            stack.append((node.left, depth + 1))
            stack.append((node.right, depth + 1))
    return total


def _draw_standard_rule(feature: int, fidx: FeatureIndex, kind, rng) -> SplitRule:
    values = fidx.values[feature]
    v = values[int(rng.integers(len(values)))]
    if isinstance(kind, Nominal):
        return SplitRule(feature=feature, predicate=Category(value=int(v)))
    return SplitRule(feature=feature, predicate=Threshold(value=float(v)))


def _draw_prior_rule(feature: int, d: Dataset, fidx: FeatureIndex, strategy: str, rng) -> SplitRule | None:
    """Rule from the strategy's prior; None when the feature cannot split."""
    kind = d.kinds[feature]
    if strategy == "standard":
        return _draw_standard_rule(feature, fidx, kind, rng)
    if isinstance(kind, Continuous):
        lo, hi = fidx.value_range(feature)
        if hi <= lo:
            return None
    return draw_rule_uniform(feature, fidx, kind, rng)


def propose_birth(
    tree: Tree,
    d: Dataset,
    fidx: FeatureIndex,
    prior: PriorConfig,
    proposal: ProposalConfig,
    strategy: str,
    alpha: np.ndarray,
    rng,
    catalan=log_catalan,
) -> Proposal | None:
    """Split a uniformly chosen leaf with a fresh feature and rule.

    Returns None when the candidate is unavailable (an undersized child).
    """
    sites = leaf_sites(tree)
    k = len(sites)
    leaf, parent, _ = sites[int(rng.integers(k))]
    feature = int(rng.integers(d.n_features))
    rule = _draw_prior_rule(feature, d, fidx, strategy, rng)
    if rule is None:
        return None
    members = leaf.members
    mask = rule.mask(d.x[members, feature])
    n_left = int(mask.sum())
    if n_left < prior.p_min or members.size - n_left < prior.p_min:
        return None
    left = make_leaf(members[mask], d.y, d.class_count)
    right = make_leaf(members[~mask], d.y, d.class_count)
    left.term = leaf_log_term(left.counts, alpha)
    right.term = leaf_log_term(right.counts, alpha)
    delta = left.term + right.term - leaf.term
    # prunable count of the candidate: the new split gains one, a parent
    # that had two leaf children stops being prunable
    d_q1 = prunable_count(tree) + 1
    if parent is not None and isinstance(parent.left, Leaf) and isinstance(parent.right, Leaf):
        d_q1 -= 1
    log_ratio = (
        math.log(proposal.p_death / proposal.p_birth)
        + math.log(k)
        - math.log(d_q1)
        + catalan(k)
        - catalan(k + 1)
    )
    path = path_to(tree, leaf)
    candidate = replace_node(tree, path, Split(rule=rule, left=left, right=right))
    candidate.log_lik = tree.log_lik + delta
    return Proposal(tree=candidate, log_ratio=log_ratio, leaf_delta=1)


def propose_death(
    tree: Tree,
    alpha: np.ndarray,
    proposal: ProposalConfig,
    rng,
    catalan=log_catalan,
) -> Proposal | None:
    """Merge the children of a uniformly chosen prunable split."""
    sites = prunable_sites(tree)
    if not sites:
        return None
    node, _, _ = sites[int(rng.integers(len(sites)))]
    k = tree.leaf_count()
    merged = Leaf(
        members=None if node.left.members is None else np.concatenate([node.left.members, node.right.members]),
        counts=node.left.counts + node.right.counts,
    )
    merged.term = leaf_log_term(merged.counts, alpha)
    delta = merged.term - node.left.term - node.right.term
    log_ratio = (
        math.log(proposal.p_birth / proposal.p_death)
        + math.log(len(sites))
        - math.log(k - 1)
        + catalan(k)
        - catalan(k - 1)
    )
    path = path_to(tree, node)
    candidate = replace_node(tree, path, merged)
    candidate.log_lik = tree.log_lik + delta
    return Proposal(tree=candidate, log_ratio=log_ratio, leaf_delta=-1)


def _propose_change(
    tree: Tree,
    d: Dataset,
    fidx: FeatureIndex,
    prior: PriorConfig,
    proposal: ProposalConfig,
    strategy: str,
    which: str,
    alpha: np.ndarray,
    rng,
    catalan=log_catalan,
) -> Proposal | None:
    m = d.n_features
    if which == "split" and m == 1:
        which = "rule"  # no other feature to move to
    sites = split_sites(tree)
    node, _, _ = sites[int(rng.integers(len(sites)))]
    kind = d.kinds[node.rule.feature]
    if which == "split":
        if strategy == "standard":
            feature = int(rng.integers(m))
            rule = _draw_standard_rule(feature, fidx, d.kinds[feature], rng)
        else:
            feature = draw_variable_excluding(node.rule.feature, m, rng)
            rule = _draw_prior_rule(feature, d, fidx, strategy, rng)
            if rule is None:
                return None
    else:
        if strategy == "standard":
            rule = _draw_standard_rule(node.rule.feature, fidx, kind, rng)
        else:
            rule = draw_rule_gaussian(node.rule, proposal.sigma, fidx, kind, rng)

    members = subtree_members(node)
    new_subtree = fit_subtree(Split(rule=rule, left=node.left, right=node.right), members, d)
    new_leaves = subtree_leaves(new_subtree)
    old_leaves = subtree_leaves(node)
    old_sum = sum(lf.term for lf in old_leaves)

    if strategy == "standard":
        if any(lf.size < prior.p_min for lf in new_leaves):
            return None
        for lf in new_leaves:
            lf.term = leaf_log_term(lf.counts, alpha)
        candidate = replace_node(tree, path_to(tree, node), new_subtree)
        candidate.log_lik = tree.log_lik + sum(lf.term for lf in new_leaves) - old_sum
        return Proposal(tree=candidate, log_ratio=0.0, leaf_delta=0)

    candidate = replace_node(tree, path_to(tree, node), new_subtree)
    outcome = sweeping.resolve("change", candidate, prior.p_min, new_subtree, d)
    if outcome is RESAMPLE:
        return None
    if isinstance(outcome, Proceed):
        for lf in new_leaves:
            lf.term = leaf_log_term(lf.counts, alpha)
        candidate.log_lik = tree.log_lik + sum(lf.term for lf in new_leaves) - old_sum
        return Proposal(tree=candidate, log_ratio=0.0, leaf_delta=0)
    # swept: the change became a death on the post-change candidate
    k = tree.leaf_count()
    d_q = prunable_count(candidate)
    log_ratio = (
        math.log(proposal.p_birth / proposal.p_death)
        + math.log(max(d_q, 1))
        - math.log(k - 1)
        + catalan(k)
        - catalan(k - 1)
    )
    swept = outcome.tree
    kept = subtree_leaves(outcome.changed)
    for lf in kept:
        if lf.term is None:
            lf.term = leaf_log_term(lf.counts, alpha)
    swept.log_lik = tree.log_lik + sum(lf.term for lf in kept) - old_sum
    return Proposal(tree=swept, log_ratio=log_ratio, leaf_delta=-1, swept=True)


def propose_change_split(tree, d, fidx, prior, proposal, strategy, alpha, rng) -> Proposal | None:
    """Redraw one split's feature and rule; the subtree below is refitted."""
    return _propose_change(tree, d, fidx, prior, proposal, strategy, "split", alpha, rng)


def propose_change_rule(tree, d, fidx, prior, proposal, strategy, alpha, rng) -> Proposal | None:
    """Redraw one split's rule on its current feature."""
    return _propose_change(tree, d, fidx, prior, proposal, strategy, "rule", alpha, rng)


def accept(current: Tree, candidate: Tree, log_proposal_ratio: float, prior: PriorConfig, rng) -> bool:
    """Metropolis-Hastings decision on the log acceptance ratio."""
    log_a = candidate.log_lik - current.log_lik + log_proposal_ratio
    if prior.tree_prior is not None:
        tp = prior.tree_prior
        log_a += chipman_log_prior(candidate, tp.gamma, tp.delta) - chipman_log_prior(current, tp.gamma, tp.delta)
    if math.isnan(log_a) or log_a == -math.inf:
        return False
    if log_a >= 0:
        return True
    return rng.random() < math.exp(log_a)


def _initial_tree(d, fidx, prior, strategy, alpha, rng, max_tries=1000) -> Tree:
    all_rows = np.arange(d.n_rows)
    for _ in range(max_tries):
        feature = int(rng.integers(d.n_features))
        rule = _draw_prior_rule(feature, d, fidx, strategy, rng)
        if rule is None:
            continue
        mask = rule.mask(d.x[:, feature])
        n_left = int(mask.sum())
        if n_left < prior.p_min or d.n_rows - n_left < prior.p_min:
            continue
        left = make_leaf(all_rows[mask], d.y, d.class_count)
        right = make_leaf(all_rows[~mask], d.y, d.class_count)
        left.term = leaf_log_term(left.counts, alpha)
        right.term = leaf_log_term(right.counts, alpha)
        tree = Tree(root=Split(rule=rule, left=left, right=right), class_count=d.class_count)
        tree.log_lik = left.term + right.term
        return tree
    raise ValueError("dataset admits no legal initial split at this p_min")


_MOVES = ("birth", "death", "change_split", "change_rule")


def run_chain(d: Dataset, cfg: ChainConfig) -> tuple[Ensemble, ChainDiagnostics]:
    """Run one chain: burn in, then sample every `thin`-th tree.

    Starts from a single random split. Each iteration executes exactly one
    available proposal; unavailable draws are redrawn within the iteration
    and counted. Deterministic for a fixed seed.
    """
    prior = cfg.prior
    if d.n_rows <= 2 * prior.p_min:
        raise ValueError(f"need more than {2 * prior.p_min} rows for p_min={prior.p_min}")
    rng = np.random.default_rng(cfg.seed)
    fidx = feature_index(d)
    alpha = prior.resolve_alpha(d.class_count)
    big_k = d.n_rows - 1
    pc = cfg.proposal
    move_p = np.array([pc.p_birth, pc.p_death, pc.p_change_split, pc.p_change_rule])

    # Catalan table: leaf counts up to big_k + 1
    ks = np.arange(1, big_k + 2)
    catalan_table = gammaln(2 * ks + 1) - 2.0 * gammaln(ks + 1) - np.log(ks + 1)
    catalan = lambda k: catalan_table[k - 1]

    tree = _initial_tree(d, fidx, prior, cfg.strategy, alpha, rng)
    k = 2

    total = cfg.burn_in + cfg.post_burn_in
    trace_ll = np.empty(total)
    trace_sc = np.empty(total, dtype=np.int64)
    trace_acc = np.zeros(total, dtype=bool)
    trace_unav = np.zeros(total, dtype=np.int64)
    snapshots: list[Tree] = []
    snap_iters: list[int] = []
    accepted_post = 0
    unavailable_total = 0
    swept_count = 0

    for it in range(total):
        resamples = 0
        while True:
            if resamples > 100_000:
                raise RuntimeError("no available proposal after 100000 redraws")
            if k == 1:
                move = "birth"
            else:
                weights = move_p.copy()
                if k >= big_k:
                    weights[0] = 0.0
                u = rng.random() * weights.sum()
                idx = 0
                acc = weights[0]
                while u >= acc and idx < 3:
                    idx += 1
                    acc += weights[idx]
                move = _MOVES[idx]
            if move == "birth":
                prop = propose_birth(tree, d, fidx, prior, pc, cfg.strategy, alpha, rng, catalan)
            elif move == "death":
                prop = propose_death(tree, alpha, pc, rng, catalan)
            elif move == "change_split":
                prop = _propose_change(tree, d, fidx, prior, pc, cfg.strategy, "split", alpha, rng, catalan)
            else:
                prop = _propose_change(tree, d, fidx, prior, pc, cfg.strategy, "rule", alpha, rng, catalan)
            if prop is None:
                resamples += 1
                unavailable_total += 1
                continue
            break
        if prop.swept:
            swept_count += 1
        ok = accept(tree, prop.tree, prop.log_ratio, prior, rng)
        if ok:
            tree = prop.tree
            k += prop.leaf_delta
            if it >= cfg.burn_in:
                accepted_post += 1
        trace_ll[it] = tree.log_lik
        trace_sc[it] = k - 1
        trace_acc[it] = ok
        trace_unav[it] = resamples
        post_i = it - cfg.burn_in + 1
        if post_i >= 1 and post_i % cfg.thin == 0:
            snapshots.append(snapshot(tree))
            snap_iters.append(it + 1)

    attempts = total + unavailable_total
    diag = ChainDiagnostics(
        log_lik=trace_ll,
        split_count=trace_sc,
        accepted=trace_acc,
        unavailable=trace_unav,
        acceptance_rate=accepted_post / cfg.post_burn_in,
        resample_rate=unavailable_total / attempts,
        swept_count=swept_count,
        resampled_count=unavailable_total,
    )
    return Ensemble(trees=snapshots, iterations=snap_iters, config=cfg), diag
