import math
from functools import partial

import numpy as np
from loguru import logger
from pebble import ProcessPool
from pydantic import BaseModel, Field, root_validator

from kmanb_toolkit.dataset import Dataset, Instance, Target
from kmanb_toolkit.errors import ModelError, SchemaError

from .encoding import category_codes

MIN_GAIN = 1e-12


class TreeNode(BaseModel):
    """A split routes rows with `value <= threshold` (numeric) or
    `value == category` (nominal) to `left`, all others to `right`; a leaf
    only carries `label`."""

    label: str | None = None
    feature: int | None = None
    threshold: float | None = None
    category: str | None = None
    left: "TreeNode | None" = None
    right: "TreeNode | None" = None

    @property
    def is_leaf(self) -> bool:
        return self.feature is None

    def depth(self) -> int:
        deepest, stack = 0, [(self, 0)]
        while stack:
            node, level = stack.pop()
            deepest = max(deepest, level)
            if not node.is_leaf:
                stack.extend([(node.left, level + 1), (node.right, level + 1)])
        return deepest


TreeNode.update_forward_refs()


class RandomForestModel(BaseModel):
    trees: list[TreeNode]
    n_trees: int = Field(..., ge=1)
    m_try: int = Field(..., ge=1)
    seed: int
    bootstrap: bool = True
    target: Target = Target.attack_type
    classes: list[str]
    features: list[str]

    @root_validator(skip_on_failure=True)
    def forest_shape(cls, values):
        if len(values["trees"]) != values["n_trees"]:
            raise ValueError(f"{len(values['trees'])} trees, not n_trees.")
        if values["m_try"] > len(values["features"]):
            raise ValueError(f"m_try exceeds {len(values['features'])}.")
        return values


def default_m_try(n_features: int) -> int:
    """`floor(log2 D) + 1`.

    Examples:
        >>> default_m_try(4), default_m_try(1), default_m_try(8)
        (3, 1, 4)
    """
    return int(math.floor(math.log2(n_features))) + 1


def _entropy(counts: np.ndarray) -> np.ndarray:
    """Natural-log entropy along the last axis of a count array."""
    totals = counts.sum(axis=-1, keepdims=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        p = np.where(counts > 0, counts / totals, 1.0)
        return -(np.where(counts > 0, p * np.log(p), 0.0)).sum(axis=-1)


def _numeric_split(
    x: np.ndarray, y: np.ndarray, n_classes: int, parent: float
) -> tuple[float, float] | None:
    order = np.argsort(x, kind="stable")
    xs, ys = x[order], y[order]
    cuts = np.flatnonzero(xs[1:] != xs[:-1])
    if not cuts.size:
        return None
    cum = np.cumsum(np.eye(n_classes)[ys], axis=0)
    left = cum[cuts]
    right = cum[-1] - left
    n = ys.size
    n_left = (cuts + 1).astype(float)
    child = (n_left * _entropy(left) + (n - n_left) * _entropy(right)) / n
    best = int(np.argmax(parent - child))
    gain = float(parent - child[best])
    lo, hi = xs[cuts[best]], xs[cuts[best] + 1]
    threshold = (lo + hi) / 2
    if threshold >= hi:
        threshold = lo
    return gain, float(threshold)


def _nominal_split(
    codes: np.ndarray,
    y: np.ndarray,
    n_cats: int,
    n_classes: int,
    parent: float,
) -> tuple[float, int] | None:
    joint = np.zeros((n_cats, n_classes))
    np.add.at(joint, (codes, y), 1.0)
    sizes = joint.sum(axis=1)
    n = y.size
    usable = np.flatnonzero((sizes > 0) & (sizes < n))
    if not usable.size:
        return None
    left = joint[usable]
    right = joint.sum(axis=0) - left
    n_left = sizes[usable]
    child = (n_left * _entropy(left) + (n - n_left) * _entropy(right)) / n
    best = int(np.argmax(parent - child))
    return float(parent - child[best]), int(usable[best])


def _grow_tree(
    seed: np.random.SeedSequence,
    columns: list[np.ndarray],
    categories: list[list[str] | None],
    y: np.ndarray,
    classes: list[str],
    m_try: int,
    bootstrap: bool,
) -> TreeNode:
    """Grow one unpruned tree on a bootstrap sample of the rows.

    Nodes are expanded from an explicit stack; a node becomes a leaf when
    it is pure, holds fewer than 2 rows, or no sampled feature gains.
    """
    rng = np.random.default_rng(seed)
    n, n_classes = y.size, len(classes)
    rows = rng.integers(0, n, n) if bootstrap else np.arange(n)
    root = TreeNode.construct()
    stack = [(root, rows, 0)]
    while stack:
        node, idx, depth = stack.pop()
        counts = np.bincount(y[idx], minlength=n_classes)
        if idx.size < 2 or np.count_nonzero(counts) == 1:
            node.label = classes[int(counts.argmax())]
            continue
        parent = float(_entropy(counts.astype(float)))
        best: tuple[float, int, float | None, int | None] | None = None
        for f in rng.choice(len(columns), size=m_try, replace=False):
            col = columns[f][idx]
            if categories[f] is None:
                found = _numeric_split(col, y[idx], n_classes, parent)
                if found and (best is None or found[0] > best[0]):
                    best = (found[0], int(f), found[1], None)
            else:
                found = _nominal_split(
                    col, y[idx], len(categories[f]), n_classes, parent
                )
                if found and (best is None or found[0] > best[0]):
                    best = (found[0], int(f), None, found[1])
        if best is None or best[0] <= MIN_GAIN:
            node.label = classes[int(counts.argmax())]
            continue
        if depth >= n:
            raise ModelError(f"Tree depth {depth} exceeds {n} rows.")
        _, f, threshold, code = best
        node.feature = f
        if threshold is not None:
            node.threshold = threshold
            mask = columns[f][idx] <= threshold
        else:
            node.category = categories[f][code]
            mask = columns[f][idx] == code
        node.left, node.right = TreeNode.construct(), TreeNode.construct()
        stack.append((node.right, idx[~mask], depth + 1))
        stack.append((node.left, idx[mask], depth + 1))
    return root


def rf_fit(
    data: Dataset,
    n_trees: int = 100,
    m_try: int | None = None,
    seed: int = 42,
    target: Target = Target.attack_type,
    bootstrap: bool = True,
    workers: int = 1,
) -> RandomForestModel:
    """Random forest of information-gain trees.

    Every tree draws a bootstrap sample of size n (unless `bootstrap` is
    off) and samples `m_try` features without replacement at each node.
    Per-tree seeds are spawned from `seed` up front, so `workers > 1`
    grows the same forest in a process pool.
    """
    n, d = len(data), len(data.profile.features)
    if n == 0:
        raise ModelError("Cannot grow a forest on an empty dataset.")
    if n_trees < 1:
        raise ModelError(f"{n_trees=} must be positive.")
    if d == 0:
        raise ModelError("A forest needs at least one feature.")
    m_try = min(default_m_try(d), d) if m_try is None else m_try
    if not 1 <= m_try <= d:
        raise ModelError(f"{m_try=} must lie in [1, {d}].")

    target = Target(target)
    classes = data.target_classes(target)
    index = {c: i for i, c in enumerate(classes)}
    y = np.fromiter((index[t] for t in data.targets(target)), np.int64, n)
    columns: list[np.ndarray] = []
    categories: list[list[str] | None] = []
    for feature in data.profile.features:
        col = data.column(feature.name)
        if feature.is_categorical:
            columns.append(category_codes(col, feature.categories))
            categories.append(feature.categories)
        else:
            columns.append(col)
            categories.append(None)

    grow = partial(
        _grow_tree,
        columns=columns,
        categories=categories,
        y=y,
        classes=classes,
        m_try=m_try,
        bootstrap=bootstrap,
    )
    seeds = np.random.SeedSequence(seed).spawn(n_trees)
    if workers > 1:
        with ProcessPool(max_workers=workers) as pool:
            trees = list(pool.map(grow, seeds).result())
    else:
        trees = [grow(s) for s in seeds]
    logger.info(f"Grew {n_trees} trees, {m_try=}, {bootstrap=}")
    return RandomForestModel(
        trees=trees,
        n_trees=n_trees,
        m_try=m_try,
        seed=seed,
        bootstrap=bootstrap,
        target=target,
        classes=classes,
        features=data.profile.columns,
    )


def tree_predict_many(
    tree: TreeNode, columns: list[np.ndarray], n: int
) -> np.ndarray:
    out = np.empty(n, dtype=object)
    stack = [(tree, np.arange(n))]
    while stack:
        node, idx = stack.pop()
        if node.is_leaf:
            out[idx] = node.label
            continue
        col = columns[node.feature][idx]
        if node.threshold is not None:
            mask = col.astype(np.float64) <= node.threshold
        else:
            mask = col == node.category
        stack.append((node.left, idx[mask]))
        stack.append((node.right, idx[~mask]))
    return out


def _plurality(
    model: RandomForestModel, votes: list[np.ndarray]
) -> np.ndarray:
    index = {c: i for i, c in enumerate(model.classes)}
    n = votes[0].size
    tally = np.zeros((n, len(model.classes)), dtype=np.int64)
    rows = np.arange(n)
    for predicted in votes:
        tally[rows, np.fromiter((index[p] for p in predicted), np.int64)] += 1
    return np.asarray(model.classes, dtype=object)[tally.argmax(axis=1)]


def rf_predict(model: RandomForestModel, instance: Instance) -> str:
    """Plurality vote of the trees; ties go to the earlier class."""
    if len(instance.values) != len(model.features):
        raise SchemaError(
            f"{len(instance.values)} values for {model.features}"
        )
    columns = [np.array([v], dtype=object) for v in instance.values]
    votes = [tree_predict_many(t, columns, 1) for t in model.trees]
    return str(_plurality(model, votes)[0])


def rf_predict_many(model: RandomForestModel, data: Dataset) -> np.ndarray:
    if data.profile.columns != model.features:
        raise SchemaError(
            f"{data.profile.columns} != fitted {model.features}"
        )
    columns = [data.frame[name].to_numpy() for name in model.features]
    votes = [tree_predict_many(t, columns, len(data)) for t in model.trees]
    return _plurality(model, votes)
