import math
from collections.abc import Callable

import numpy as np
from loguru import logger
from pydantic import BaseModel, Field, validator

from kmanb_toolkit.dataset import Dataset, Instance, Target
from kmanb_toolkit.errors import ModelError

from .naive_bayes import NbModel, nb_fit, nb_predict, nb_predict_many

ZERO_ERROR_ALPHA = 10.0
FLOOR_ALPHA = 1e-9

RoundHook = Callable[[int, np.ndarray, float], None]


class BoostConfig(BaseModel):
    rounds: int = Field(10, ge=1)
    target: Target = Target.attack_type


class BoostStage(BaseModel):
    alpha: float = Field(..., ge=0)
    model: NbModel

    @validator("alpha")
    def alpha_finite(cls, v):
        if not math.isfinite(v):
            raise ValueError(f"Stage weight {v} is not finite.")
        return v


class BoostedModel(BaseModel):
    """AdaBoost.M1 ensemble of weighted naive Bayes stages.

    `errors` keeps the weighted training error of every round run,
    including a final round whose stage was discarded.
    """

    classes: list[str]
    stages: list[BoostStage] = Field(..., min_items=1)
    config: BoostConfig
    seed: int
    errors: list[float] = Field(default_factory=list)


def boost_fit(
    data: Dataset,
    config: BoostConfig = BoostConfig(),
    seed: int = 42,
    on_round: RoundHook | None = None,
) -> BoostedModel:
    """Reweighting AdaBoost.M1 over `nb_fit()`.

    Each round fits naive Bayes under the current weights and measures the
    weighted error `e` of its training predictions:

    1. `e == 0`: keep the stage with `alpha = 10` and stop;
    2. `e >= 0.5`: drop the stage and stop, unless it is the first, which
       is kept with `alpha = 1e-9`;
    3. otherwise `alpha = ln((1 - e) / e)`, misclassified weights grow by
       `(1 - e) / e` and all weights are renormalized to sum 1.

    `on_round(round, weights, e)` sees the weights each round fitted with.
    Reweighting draws nothing at random; `seed` is recorded for the result.
    """
    y = data.targets(config.target)
    if len(data) == 0:
        raise ModelError("Cannot boost on an empty dataset.")
    if len(set(y.tolist())) < 2:
        raise ModelError("Boosting needs at least two classes.")

    n = len(data)
    weights = np.full(n, 1 / n)
    stages: list[BoostStage] = []
    errors: list[float] = []
    for m in range(1, config.rounds + 1):
        model = nb_fit(data, weights, config.target)
        missed = nb_predict_many(model, data) != y
        error = float(weights[missed].sum())
        errors.append(error)
        if on_round:
            on_round(m, weights.copy(), error)
        logger.debug(f"Boost round {m}: weighted error {error:.6g}")
        if error == 0:
            stages.append(BoostStage(alpha=ZERO_ERROR_ALPHA, model=model))
            break
        if error >= 0.5:
            logger.warning(f"Boosting stopped at round {m}: {error=:.4f}")
            if not stages:
                stages.append(BoostStage(alpha=FLOOR_ALPHA, model=model))
            break
        beta = (1 - error) / error
        stages.append(BoostStage(alpha=math.log(beta), model=model))
        weights = np.where(missed, weights * beta, weights)
        weights = weights / weights.sum()

    logger.info(f"Boosted {len(stages)} naive Bayes stages.")
    return BoostedModel(
        classes=stages[0].model.classes,
        stages=stages,
        config=config,
        seed=seed,
        errors=errors,
    )


def _vote(model: BoostedModel, predictions: list[np.ndarray]) -> np.ndarray:
    index = {c: i for i, c in enumerate(model.classes)}
    votes = np.zeros((predictions[0].size, len(model.classes)))
    rows = np.arange(predictions[0].size)
    for stage, predicted in zip(model.stages, predictions):
        cols = np.fromiter((index[p] for p in predicted), np.int64)
        votes[rows, cols] += stage.alpha
    return votes.argmax(axis=1)


def boost_predict(model: BoostedModel, instance: Instance) -> str:
    """Weighted vote of the stages; ties go to the class listed first."""
    predictions = [
        np.array([nb_predict(s.model, instance)], dtype=object)
        for s in model.stages
    ]
    return model.classes[int(_vote(model, predictions)[0])]


def boost_predict_many(model: BoostedModel, data: Dataset) -> np.ndarray:
    predictions = [nb_predict_many(s.model, data) for s in model.stages]
    classes = np.asarray(model.classes, dtype=object)
    return classes[_vote(model, predictions)]


def staged_predict_many(
    model: BoostedModel, data: Dataset
) -> list[np.ndarray]:
    """Predictions of the ensemble cut after each stage.

    Entry `m - 1` equals `boost_predict_many()` of a model keeping only its
    first `m` stages, with the same tie rule.
    """
    index = {c: i for i, c in enumerate(model.classes)}
    classes = np.asarray(model.classes, dtype=object)
    votes = np.zeros((len(data), len(model.classes)))
    rows = np.arange(len(data))
    staged: list[np.ndarray] = []
    for stage in model.stages:
        predicted = nb_predict_many(stage.model, data)
        cols = np.fromiter((index[p] for p in predicted), np.int64)
        votes[rows, cols] += stage.alpha
        staged.append(classes[votes.argmax(axis=1)])
    return staged
