import numpy as np
import pytest

from bdtree.dataset import Continuous, Dataset, gen_xor3
from bdtree.likelihood import PriorConfig, fit_log_likelihood
from bdtree.tree import Leaf, Split, SplitRule, Threshold, Tree, refit_leaves


@pytest.fixture(scope="session")
def xor3_1000():
    return gen_xor3(1000, seed=17)


@pytest.fixture()
def micro_dataset():
    """Six points on one feature, three distinct values, two classes."""
    x = np.array([[1.0], [1.0], [2.0], [2.0], [3.0], [3.0]])
    y = np.array([1, 1, 2, 2, 1, 2])
    return Dataset(x=x, y=y, kinds=(Continuous(),), class_count=2)


def build_xor_oracle_tree(d: Dataset) -> Tree:
    """The minimal sign-product tree: x1 at 0, then x2 at 0 on both sides."""

    def leaf():
        return Leaf(members=None, counts=np.zeros(2, dtype=np.int64))

    def x2_split():
        return Split(rule=SplitRule(feature=1, predicate=Threshold(0.0)), left=leaf(), right=leaf())

    root = Split(rule=SplitRule(feature=0, predicate=Threshold(0.0)), left=x2_split(), right=x2_split())
    tree = Tree(root=root, class_count=2)
    refit_leaves(tree, d)
    fit_log_likelihood(tree, PriorConfig())
    return tree


@pytest.fixture()
def xor_oracle_tree(xor3_1000):
    return build_xor_oracle_tree(xor3_1000)
