import json

import numpy as np
import pytest

from bdtree.dataset import Continuous, Dataset, Nominal, gen_xor3
from bdtree.tree import (
    Category,
    Leaf,
    Split,
    SplitRule,
    Threshold,
    Tree,
    check_compatible,
    from_record,
    make_leaf,
    predict_leaf_posterior,
    prunable_count,
    refit_leaves,
    route,
    route_all,
    single_leaf_tree,
    snapshot,
    to_record,
)


def two_split_tree():
    # x1 at 0, then x2 at 0 on the right branch only
    inner = Split(
        rule=SplitRule(feature=1, predicate=Threshold(0.0)),
        left=Leaf(None, np.zeros(2, dtype=np.int64)),
        right=Leaf(None, np.zeros(2, dtype=np.int64)),
    )
    root = Split(
        rule=SplitRule(feature=0, predicate=Threshold(0.0)),
        left=Leaf(None, np.zeros(2, dtype=np.int64)),
        right=inner,
    )
    return Tree(root=root, class_count=2)


class TestRoute:
    def test_single_leaf(self):
        d = gen_xor3(10, seed=0)
        t = single_leaf_tree(d)
        assert route(t, d.x[3]) is t.root

    def test_two_comparisons(self):
        t = two_split_tree()
        leaf = route(t, np.array([0.3, 0.2, 0.0]))
        assert leaf is t.root.right.right  # both comparisons fail the <= test

    def test_threshold_boundary_goes_left(self):
        t = two_split_tree()
        assert route(t, np.array([0.0, 1.0, 0.0])) is t.root.left

    def test_sentinel_nan_goes_right(self):
        t = two_split_tree()
        leaf = route(t, np.array([np.nan, np.nan, 0.0]))
        assert leaf is t.root.right.right

    def test_category_rule(self):
        root = Split(
            rule=SplitRule(feature=0, predicate=Category(1)),
            left=Leaf(None, np.zeros(2, dtype=np.int64)),
            right=Leaf(None, np.zeros(2, dtype=np.int64)),
        )
        t = Tree(root=root, class_count=2)
        assert route(t, np.array([1.0])) is root.left
        assert route(t, np.array([0.0])) is root.right

    def test_xor_oracle_majorities(self, xor3_1000, xor_oracle_tree):
        # every generated point lands in a leaf whose majority matches its label
        for leaf, idx in route_all(xor_oracle_tree, xor3_1000.x):
            majority = int(np.argmax(leaf.counts)) + 1
            assert (xor3_1000.y[idx] == majority).all()

    def test_route_all_partitions(self, xor3_1000, xor_oracle_tree):
        seen = np.concatenate([idx for _, idx in route_all(xor_oracle_tree, xor3_1000.x)])
        np.testing.assert_array_equal(np.sort(seen), np.arange(1000))

    def test_feature_out_of_range(self):
        root = Split(
            rule=SplitRule(feature=5, predicate=Threshold(0.0)),
            left=Leaf(None, np.zeros(2, dtype=np.int64)),
            right=Leaf(None, np.zeros(2, dtype=np.int64)),
        )
        with pytest.raises(ValueError, match="feature 5"):
            route(Tree(root=root, class_count=2), np.array([1.0]))

    def test_check_compatible_kind_mismatch(self):
        root = Split(
            rule=SplitRule(feature=0, predicate=Category(0)),
            left=Leaf(None, np.zeros(2, dtype=np.int64)),
            right=Leaf(None, np.zeros(2, dtype=np.int64)),
        )
        t = Tree(root=root, class_count=2)
        with pytest.raises(ValueError, match="mismatch"):
            check_compatible(t, (Continuous(),))
        check_compatible(t, (Nominal(categories=2),))


class TestRefit:
    def test_single_leaf_counts(self):
        x = np.zeros((6, 1))
        y = np.array([1, 1, 1, 2, 2, 2])
        d = Dataset(x=x + np.arange(6)[:, None], y=y, kinds=(Continuous(),), class_count=2)
        t = single_leaf_tree(d)
        np.testing.assert_array_equal(t.root.counts, [3, 3])
        assert t.root.size == 6

    def test_empty_leaf_recorded(self):
        x = np.array([[1.0], [2.0], [3.0]])
        d = Dataset(x=x, y=np.array([1, 2, 1]), kinds=(Continuous(),), class_count=2)
        root = Split(
            rule=SplitRule(feature=0, predicate=Threshold(10.0)),
            left=Leaf(None, None),
            right=Leaf(None, None),
        )
        t = refit_leaves(Tree(root=root, class_count=2), d)
        assert t.root.right.size == 0
        np.testing.assert_array_equal(t.root.left.counts, [2, 1])

    def test_refit_conserves_points(self, xor3_1000, xor_oracle_tree):
        leaves = xor_oracle_tree.leaves()
        assert sum(lf.size for lf in leaves) == 1000
        for lf in leaves:
            assert lf.counts.sum() == lf.size == len(lf.members)

    def test_refit_resets_log_lik(self, xor3_1000, xor_oracle_tree):
        assert xor_oracle_tree.log_lik is not None
        refit_leaves(xor_oracle_tree, xor3_1000)
        assert xor_oracle_tree.log_lik is None


class TestPrunable:
    def test_single_split(self):
        t = Tree(
            root=Split(
                rule=SplitRule(feature=0, predicate=Threshold(0.0)),
                left=Leaf(None, np.zeros(2, dtype=np.int64)),
                right=Leaf(None, np.zeros(2, dtype=np.int64)),
            ),
            class_count=2,
        )
        assert prunable_count(t) == 1

    def test_left_chain(self):
        # three splits chained on the left, each right child a leaf
        def leaf():
            return Leaf(None, np.zeros(2, dtype=np.int64))

        deepest = Split(SplitRule(0, Threshold(0.0)), leaf(), leaf())
        mid = Split(SplitRule(0, Threshold(1.0)), deepest, leaf())
        root = Split(SplitRule(0, Threshold(2.0)), mid, leaf())
        assert prunable_count(Tree(root=root, class_count=2)) == 1

    def test_complete_tree(self):
        def leaf():
            return Leaf(None, np.zeros(2, dtype=np.int64))

        root = Split(
            SplitRule(0, Threshold(0.0)),
            Split(SplitRule(1, Threshold(0.0)), leaf(), leaf()),
            Split(SplitRule(1, Threshold(0.0)), leaf(), leaf()),
        )
        assert prunable_count(Tree(root=root, class_count=2)) == 2

    def test_structural_invariant(self, xor_oracle_tree):
        assert xor_oracle_tree.split_count() == xor_oracle_tree.leaf_count() - 1
        assert xor_oracle_tree.node_count() == 2 * xor_oracle_tree.leaf_count() - 1


class TestLeafPosterior:
    def test_empty_leaf_prior_mean(self):
        t = two_split_tree()
        lf = Leaf(None, np.zeros(2, dtype=np.int64))
        np.testing.assert_allclose(predict_leaf_posterior(t, lf, np.ones(2)), [0.5, 0.5])

    def test_posterior_mean_formula(self):
        t = two_split_tree()
        lf = Leaf(None, np.array([3, 1]))
        np.testing.assert_allclose(predict_leaf_posterior(t, lf, np.ones(2)), [4 / 6, 2 / 6])

    def test_sums_to_one_and_positive(self):
        t = two_split_tree()
        rng = np.random.default_rng(0)
        for _ in range(50):
            counts = rng.integers(0, 100, size=3)
            p = predict_leaf_posterior(Tree(t.root, 3), Leaf(None, counts), np.ones(3))
            assert abs(p.sum() - 1.0) < 1e-12
            assert (p > 0).all()

    def test_purity_limit_monotone(self):
        t = two_split_tree()
        prev = 0.0
        for k in (1, 10, 100, 10_000):
            p = predict_leaf_posterior(t, Leaf(None, np.array([k, 0])), np.ones(2))[0]
            assert p > prev
            prev = p
        assert prev > 0.999


class TestSerialization:
    def test_record_round_trip(self, xor_oracle_tree):
        rec = to_record(xor_oracle_tree, iteration=42)
        rebuilt, it = from_record(rec)
        assert it == 42
        assert to_record(rebuilt, iteration=42) == rec

    def test_wire_format_is_one_based(self, xor_oracle_tree):
        rec = to_record(xor_oracle_tree, iteration=1)
        assert rec["nodes"][0]["kind"] == "split"
        assert rec["nodes"][0]["feature"] == 1  # feature 0 in the API
        assert rec["nodes"][0]["predicate"] == {"type": "threshold", "value": 0.0}

    def test_json_serializable(self, xor_oracle_tree):
        text = json.dumps(to_record(xor_oracle_tree, iteration=3))
        rebuilt, _ = from_record(json.loads(text))
        assert rebuilt.leaf_count() == xor_oracle_tree.leaf_count()

    def test_snapshot_drops_members_keeps_counts(self, xor_oracle_tree):
        snap = snapshot(xor_oracle_tree)
        for lf, orig in zip(snap.leaves(), xor_oracle_tree.leaves()):
            assert lf.members is None
            np.testing.assert_array_equal(lf.counts, orig.counts)
        assert snap.log_lik == xor_oracle_tree.log_lik

    def test_category_predicate_round_trip(self):
        root = Split(
            rule=SplitRule(feature=2, predicate=Category(4)),
            left=Leaf(None, np.array([1, 0])),
            right=Leaf(None, np.array([0, 1])),
        )
        rec = to_record(Tree(root=root, class_count=2), iteration=0)
        rebuilt, _ = from_record(rec)
        assert rebuilt.root.rule == SplitRule(feature=2, predicate=Category(4))


def test_make_leaf_counts():
    y = np.array([1, 2, 2, 1, 2])
    lf = make_leaf(np.array([0, 1, 2]), y, 2)
    np.testing.assert_array_equal(lf.counts, [1, 2])
