import numpy as np
import pytest

from kmanb_toolkit import ModelError, SchemaError, rf_fit, rf_predict
from kmanb_toolkit.models import TreeNode, default_m_try, rf_predict_many


def test_default_m_try():
    assert [default_m_try(d) for d in (1, 2, 3, 4, 7, 8)] == [
        1,
        2,
        2,
        3,
        3,
        4,
    ]


def test_forest_fits_separable_rows(toy):
    model = rf_fit(toy, n_trees=15, seed=3)
    assert model.m_try == 2
    assert len(model.trees) == 15
    assert rf_predict_many(model, toy).tolist() == (
        toy.attack_types.tolist()
    )


def test_unbootstrapped_tree_recalls_training_rows(small_fridge):
    model = rf_fit(small_fridge, n_trees=1, m_try=4, bootstrap=False)
    predicted = rf_predict_many(model, small_fridge)
    assert predicted.tolist() == small_fridge.attack_types.tolist()


def test_forest_is_seeded(small_fridge):
    a = rf_fit(small_fridge, n_trees=5, seed=11)
    b = rf_fit(small_fridge, n_trees=5, seed=11)
    assert a.trees == b.trees


def test_workers_grow_the_same_forest(toy):
    serial = rf_fit(toy, n_trees=4, seed=2)
    pooled = rf_fit(toy, n_trees=4, seed=2, workers=2)
    assert serial.trees == pooled.trees


def test_single_and_many_agree(small_fridge):
    model = rf_fit(small_fridge, n_trees=9)
    many = rf_predict_many(model, small_fridge)
    for idx in range(0, len(small_fridge), 37):
        assert rf_predict(model, small_fridge.instance(idx)) == many[idx]


def test_nominal_split(toy):
    data = toy.without_feature("x")
    model = rf_fit(data, n_trees=1, bootstrap=False)
    (tree,) = model.trees
    assert tree.depth() <= len(data)
    if not tree.is_leaf:
        assert tree.category in ("high", "low")


@pytest.mark.parametrize(
    "kwargs", [{"n_trees": 0}, {"m_try": 0}, {"m_try": 3}]
)
def test_fit_rejects(toy, kwargs):
    with pytest.raises(ModelError):
        rf_fit(toy, **kwargs)


def test_predict_rejects_other_columns(toy, small_fridge):
    model = rf_fit(toy, n_trees=2)
    with pytest.raises(SchemaError):
        rf_predict_many(model, small_fridge)


def leaf_rows(
    tree: TreeNode, columns: list[np.ndarray], n: int
) -> list[tuple[TreeNode, np.ndarray]]:
    leaves, stack = [], [(tree, np.arange(n))]
    while stack:
        node, idx = stack.pop()
        if node.is_leaf:
            leaves.append((node, idx))
            continue
        col = columns[node.feature][idx]
        if node.threshold is not None:
            mask = col <= node.threshold
        else:
            mask = col == node.category
        stack += [(node.left, idx[mask]), (node.right, idx[~mask])]
    return leaves


def test_root_threshold_sits_in_the_gap(toy):
    model = rf_fit(toy, n_trees=1, m_try=2, bootstrap=False)
    root = model.trees[0]
    assert root.feature == 0
    assert 0.2 < root.threshold < 4.9
    assert root.left.label == "normal"
    assert root.right.label == "ddos"


@pytest.mark.parametrize("m_try", [1, 2])
def test_leaves_predict_their_majority(small_fridge, m_try):
    model = rf_fit(small_fridge, n_trees=3, m_try=m_try, bootstrap=False)
    columns = [small_fridge.column(f) for f in model.features]
    index = {c: i for i, c in enumerate(model.classes)}
    codes = np.fromiter(
        (index[t] for t in small_fridge.attack_types), np.int64
    )
    for tree in model.trees:
        for leaf, idx in leaf_rows(tree, columns, len(small_fridge)):
            assert idx.size > 0
            counts = np.bincount(codes[idx], minlength=len(model.classes))
            assert leaf.label == model.classes[int(counts.argmax())]
