import math
from collections.abc import Mapping, Sequence

import numpy as np
from loguru import logger
from pydantic import BaseModel, Field, root_validator, validator

from kmanb_toolkit.dataset import Dataset, Instance, Target
from kmanb_toolkit.errors import ModelError, SchemaError

from .encoding import category_codes

FLOOR_SCALE = 1e-6
MIN_VARIANCE = 1e-12
SUM_TOLERANCE = 1e-9


class GaussianParams(BaseModel):
    mean: float
    variance: float = Field(..., gt=0)


class NominalTable(BaseModel):
    """Smoothed `p(value | class)`, one row per class over `categories`."""

    categories: list[str]
    probs: list[list[float]]

    @validator("probs", each_item=True)
    def rows_sum_to_one(cls, v):
        if v and abs(sum(v) - 1) > SUM_TOLERANCE:
            raise ValueError(f"Table row sums to {sum(v)}")
        return v


class NbModel(BaseModel):
    """Hybrid naive Bayes: Gaussian likelihoods for numeric and timestamp
    columns, add-one smoothed category tables for nominal ones.

    Field | Type | Description
    --:|:--|:--
    classes | list[str] | classes seen in training, global order
    target | Target | `type` or `label`
    features | list[str] | columns in profile order
    priors | list[float] | weighted class frequencies
    class_weights | list[float] | per-class weight, weights rescaled to sum n
    numeric_params | dict | feature -> per-class mean and variance
    nominal_tables | dict | feature -> per-class smoothed table
    variance_floor | dict | feature -> smallest allowed variance
    """

    classes: list[str] = Field(..., min_items=1)
    target: Target = Target.attack_type
    features: list[str]
    priors: list[float]
    class_weights: list[float]
    numeric_params: dict[str, list[GaussianParams]] = Field(
        default_factory=dict
    )
    nominal_tables: dict[str, NominalTable] = Field(default_factory=dict)
    variance_floor: dict[str, float] = Field(default_factory=dict)

    @validator("priors")
    def priors_sum_to_one(cls, v):
        if abs(sum(v) - 1) > SUM_TOLERANCE:
            raise ValueError(f"Priors sum to {sum(v)}")
        return v

    @root_validator(skip_on_failure=True)
    def variances_floored(cls, values):
        for name, params in values["numeric_params"].items():
            floor = values["variance_floor"][name]
            if any(p.variance < floor for p in params):
                raise ValueError(f"{name} variance below {floor=}")
        return values


def _class_indicator(
    targets: np.ndarray, classes: list[str]
) -> tuple[np.ndarray, np.ndarray]:
    index = {c: i for i, c in enumerate(classes)}
    codes = np.fromiter((index[t] for t in targets), np.int64, targets.size)
    onehot = np.zeros((targets.size, len(classes)))
    onehot[np.arange(targets.size), codes] = 1.0
    return codes, onehot


def nb_fit(
    data: Dataset,
    weights: Sequence[float] | np.ndarray | None = None,
    target: Target = Target.attack_type,
) -> NbModel:
    """Weighted estimates of every prior and likelihood.

    Weights are rescaled to sum to the number of rows first, so uniform
    weights reproduce plain counts and any positive rescaling of `weights`
    fits the same model.
    """
    n = len(data)
    if n == 0:
        raise ModelError("Cannot fit naive Bayes on an empty dataset.")
    w = np.ones(n) if weights is None else np.asarray(weights, float)
    if w.shape != (n,):
        raise ModelError(f"{w.size} weights for {n} instances.")
    if (w < 0).any():
        raise ModelError("Instance weights must be non-negative.")
    if not w.sum() > 0:
        raise ModelError("Total instance weight must be positive.")
    w = np.ones(n) if (w == w[0]).all() else w * (n / w.sum())

    target = Target(target)
    y = data.targets(target)
    present = set(y.tolist())
    classes = [c for c in data.target_classes(target) if c in present]
    codes, onehot = _class_indicator(y, classes)
    class_w = w @ onehot
    if (class_w <= 0).any():
        empty = [c for c, cw in zip(classes, class_w) if cw <= 0]
        raise ModelError(f"Classes {empty} carry zero total weight.")
    weighted = onehot * w[:, None]

    numeric: dict[str, list[GaussianParams]] = {}
    nominal: dict[str, NominalTable] = {}
    floors: dict[str, float] = {}
    for feature in data.profile.features:
        col = data.column(feature.name)
        if feature.is_categorical:
            cats = feature.categories
            counts = np.zeros((len(classes), len(cats)))
            idx = category_codes(col, cats)
            np.add.at(counts, (codes, idx), w)
            probs = (counts + 1) / (class_w[:, None] + len(cats))
            nominal[feature.name] = NominalTable(
                categories=cats, probs=probs.tolist()
            )
            continue
        spread = float(col.max() - col.min())
        floor = max(FLOOR_SCALE * spread**2, MIN_VARIANCE)
        means = (weighted.T @ col) / class_w
        variances = (weighted.T @ np.square(col - means[codes])) / class_w
        floors[feature.name] = floor
        numeric[feature.name] = [
            GaussianParams(mean=m, variance=max(v, floor))
            for m, v in zip(means.tolist(), variances.tolist())
        ]
    logger.debug(f"Fitted naive Bayes over {classes=}")
    return NbModel(
        classes=classes,
        target=target,
        features=data.profile.columns,
        priors=(class_w / class_w.sum()).tolist(),
        class_weights=class_w.tolist(),
        numeric_params=numeric,
        nominal_tables=nominal,
        variance_floor=floors,
    )


def joint_log_scores(
    model: NbModel, columns: Mapping[str, np.ndarray], n: int
) -> np.ndarray:
    """`(n, classes)` log prior plus summed log likelihoods. Unseen nominal
    values score `1 / (class_weight + |categories|)`."""
    scores = np.tile(np.log(np.asarray(model.priors)), (n, 1))
    class_w = np.asarray(model.class_weights)
    for name in model.features:
        values = columns[name]
        if (table := model.nominal_tables.get(name)) is not None:
            probs = np.asarray(table.probs).reshape(
                len(model.classes), len(table.categories)
            )
            unseen = -np.log(class_w + len(table.categories))
            idx = category_codes(values, table.categories)
            known = 0.0
            if probs.size:
                known = np.log(probs)[:, np.maximum(idx, 0)].T
            scores += np.where((idx >= 0)[:, None], known, unseen[None, :])
            continue
        params = model.numeric_params[name]
        mean = np.array([p.mean for p in params])
        var = np.array([p.variance for p in params])
        x = np.asarray(values, dtype=np.float64)[:, None]
        log_norm = -0.5 * np.log(2 * math.pi * var)
        scores += log_norm - (x - mean) ** 2 / (2 * var)
    return scores


def _instance_columns(
    model: NbModel, instance: Instance
) -> dict[str, np.ndarray]:
    if len(instance.values) != len(model.features):
        raise SchemaError(
            f"{len(instance.values)} values for features {model.features}"
        )
    return {
        name: np.array([value], dtype=object)
        for name, value in zip(model.features, instance.values)
    }


def _dataset_columns(model: NbModel, data: Dataset) -> dict[str, np.ndarray]:
    if data.profile.columns != model.features:
        raise SchemaError(
            f"Columns {data.profile.columns} != fitted {model.features}"
        )
    return {name: data.frame[name].to_numpy() for name in model.features}


def normalize_scores(scores: np.ndarray) -> np.ndarray:
    shifted = np.exp(scores - scores.max(axis=1, keepdims=True))
    return shifted / shifted.sum(axis=1, keepdims=True)


def instance_scores(model: NbModel, instance: Instance) -> np.ndarray:
    return joint_log_scores(model, _instance_columns(model, instance), 1)[0]


def dataset_scores(model: NbModel, data: Dataset) -> np.ndarray:
    return joint_log_scores(model, _dataset_columns(model, data), len(data))


def nb_posterior(model: NbModel, instance: Instance) -> dict[str, float]:
    """Posterior over `model.classes`, summing to 1.

    Examples:
        >>> m = NbModel(
        ...     classes=["a", "b"],
        ...     features=["c"],
        ...     priors=[0.5, 0.5],
        ...     class_weights=[2.0, 2.0],
        ...     nominal_tables={
        ...         "c": {
        ...             "categories": ["high", "low"],
        ...             "probs": [[0.75, 0.25], [0.25, 0.75]],
        ...         }
        ...     },
        ... )
        >>> post = nb_posterior(m, Instance(("high",), "normal", "normal"))
        >>> round(post["a"], 12), round(post["b"], 12)
        (0.75, 0.25)
    """
    scores = instance_scores(model, instance).reshape(1, -1)
    return dict(zip(model.classes, normalize_scores(scores)[0].tolist()))


def nb_posterior_many(model: NbModel, data: Dataset) -> np.ndarray:
    return normalize_scores(dataset_scores(model, data))


def nb_predict(model: NbModel, instance: Instance) -> str:
    """Class of largest posterior; ties go to the class listed first."""
    return model.classes[int(instance_scores(model, instance).argmax())]


def nb_predict_many(model: NbModel, data: Dataset) -> np.ndarray:
    classes = np.asarray(model.classes, dtype=object)
    return classes[dataset_scores(model, data).argmax(axis=1)]
