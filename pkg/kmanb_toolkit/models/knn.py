import numpy as np
from loguru import logger
from pydantic import BaseModel, Field, root_validator, validator

from kmanb_toolkit.dataset import Dataset, Instance, Target
from kmanb_toolkit.errors import ModelError

from .encoding import FeatureEncoder

CHUNK_CELLS = 1 << 22
"""Upper bound on query x stored distance cells held at once."""

TIE_TOLERANCE = 1e-9


class KnnModel(BaseModel):
    """Every training row, encoded, with its class.

    The stored arrays serialize as nested lists.
    """

    k: int = Field(1, ge=1)
    target: Target = Target.attack_type
    classes: list[str]
    encoder: FeatureEncoder
    points: np.ndarray
    labels: np.ndarray

    class Config:
        arbitrary_types_allowed = True
        json_encoders = {np.ndarray: lambda a: a.tolist()}

    @validator("points", pre=True)
    def points_as_array(cls, v):
        return np.asarray(v, dtype=np.float64)

    @validator("labels", pre=True)
    def labels_as_array(cls, v):
        return np.asarray(v, dtype=object)

    @root_validator(skip_on_failure=True)
    def k_within_store(cls, values):
        n = len(values["labels"])
        if n == 0:
            raise ValueError("A KNN model needs stored instances.")
        if values["k"] > n:
            raise ValueError(f"k={values['k']} exceeds {n} stored rows.")
        return values


def knn_fit(
    data: Dataset, k: int = 1, target: Target = Target.attack_type
) -> KnnModel:
    """Store the encoded training set; nothing else is learned."""
    if not 1 <= k <= len(data):
        raise ModelError(f"{k=} must lie in [1, {len(data)}].")
    encoder = FeatureEncoder.from_profile(data.profile)
    logger.debug(f"Storing {len(data)} rows for {k}-NN.")
    return KnnModel(
        k=k,
        target=target,
        classes=data.target_classes(target),
        encoder=encoder,
        points=encoder.encode_many(data),
        labels=data.targets(target),
    )


def _neighbors(model: KnnModel, queries: np.ndarray) -> list[np.ndarray]:
    """Stored indices of the `k` nearest rows for each query.

    Candidates come from the dot-product form of the distance; the final
    order uses exact distances, ties broken by the lower stored index.
    """
    points, k = model.points, model.k
    sq_points = np.square(points).sum(axis=1)
    largest = float(sq_points.max())
    step = max(1, CHUNK_CELLS // max(1, points.shape[0]))
    found: list[np.ndarray] = []
    for start in range(0, queries.shape[0], step):
        chunk = queries[start : start + step]
        sq_chunk = np.square(chunk).sum(axis=1)
        approx = sq_chunk[:, None] + sq_points[None, :] - 2 * chunk @ points.T
        kth = np.partition(approx, k - 1, axis=1)[:, k - 1]
        slack = TIE_TOLERANCE * (1 + sq_chunk + largest)
        for row, query in enumerate(chunk):
            cands = np.flatnonzero(approx[row] <= kth[row] + slack[row])
            exact = np.square(points[cands] - query).sum(axis=1)
            order = np.lexsort((cands, exact))[:k]
            found.append(cands[order])
    return found


def _mode(model: KnnModel, neighbors: list[np.ndarray]) -> np.ndarray:
    index = {c: i for i, c in enumerate(model.classes)}
    codes = np.fromiter((index[c] for c in model.labels), np.int64)
    classes = np.asarray(model.classes, dtype=object)
    winners = [
        np.bincount(codes[idx], minlength=len(classes)).argmax()
        for idx in neighbors
    ]
    return classes[np.asarray(winners, dtype=np.int64)]


def knn_predict(model: KnnModel, instance: Instance) -> str:
    """Modal class of the `k` nearest stored rows; mode ties go to the class
    earlier in the global order."""
    query = model.encoder.encode(instance).reshape(1, -1)
    return str(_mode(model, _neighbors(model, query))[0])


def knn_predict_many(model: KnnModel, data: Dataset) -> np.ndarray:
    queries = model.encoder.encode_many(data)
    return _mode(model, _neighbors(model, queries))
