from collections import Counter
from collections.abc import Callable
from enum import Enum

import numpy as np
from loguru import logger
from pydantic import BaseModel, Field, root_validator

from kmanb_toolkit.dataset import (
    Dataset,
    DeviceProfile,
    FeatureKind,
    FeatureSchema,
    Instance,
)
from kmanb_toolkit.errors import ModelError

from .encoding import FeatureEncoder

CLUSTER_FEATURE = "cluster"
MAX_ITERATIONS = 500


class KMeansInit(str, Enum):
    """How the first `k` centroids are picked.

    `random` takes `k` distinct training rows uniformly; `kmeans_pp` takes
    the first uniformly and each next one with probability proportional to
    its squared distance from the nearest centroid already chosen.
    """

    random = "random"
    kmeans_pp = "k-means++"


class ClusterModel(BaseModel):
    """Fitted centroids over the encoded feature space; `label` and `type`
    never take part.

    Field | Type | Description
    --:|:--|:--
    k | int | number of centroids
    encoder | FeatureEncoder | columns and one-hot category tables
    centroids | list[list[float]] | one row per cluster, `encoder.width` wide
    seed | int | seed of the initial draw
    init | KMeansInit | initial centroid rule
    iterations_run | int | Lloyd steps (assign + update) performed
    final_sse | float | SSE after the last update
    sse_trace | list[float] | SSE after every update, non-increasing
    """

    k: int = Field(..., ge=1)
    encoder: FeatureEncoder
    centroids: list[list[float]]
    seed: int
    init: KMeansInit = KMeansInit.random
    iterations_run: int = Field(..., ge=0)
    final_sse: float = Field(..., ge=0)
    sse_trace: list[float] = Field(default_factory=list)

    @root_validator(skip_on_failure=True)
    def centroids_fit_space(cls, values):
        centroids, width = values["centroids"], values["encoder"].width
        if len(centroids) != values["k"]:
            raise ValueError(f"{len(centroids)} centroids for k={values['k']}")
        if any(len(c) != width for c in centroids):
            raise ValueError(f"Centroids must be {width} wide.")
        return values

    @property
    def feature_columns(self) -> list[str]:
        return self.encoder.feature_columns

    @property
    def centers(self) -> np.ndarray:
        return np.asarray(self.centroids, dtype=np.float64).reshape(
            self.k, self.encoder.width
        )


class ClusterSummary(BaseModel):
    cluster: int
    size: int
    majority: str | None
    incorrect: int


class ClusterClassMapping(BaseModel):
    """Class-to-cluster evaluation: each cluster is named after the attack
    type most of its members carry; members of any other type count as
    incorrectly clustered."""

    clusters: list[ClusterSummary]
    incorrectly_clustered: int = Field(..., ge=0)
    total: int = Field(..., ge=0)
    purity: float = Field(..., ge=0, le=1)

    @root_validator(skip_on_failure=True)
    def purity_matches_errors(cls, values):
        total = values["total"]
        expected = 1 - values["incorrectly_clustered"] / total if total else 1
        if abs(values["purity"] - expected) > 1e-12:
            raise ValueError(f"purity {values['purity']} != {expected}")
        return values

    @property
    def majorities(self) -> dict[int, str | None]:
        return {c.cluster: c.majority for c in self.clusters}


def cluster_count(profile: DeviceProfile) -> int:
    """One cluster per attack type plus one for normal traffic.

    Examples:
        >>> from kmanb_toolkit.dataset import load_device
        >>> cluster_count(load_device("fridge"))
        7
        >>> cluster_count(load_device("garage_door"))
        8
    """
    return len(profile.attack_types) + 1


def squared_distances(points: np.ndarray, centers: np.ndarray) -> np.ndarray:
    """`(n, k)` squared Euclidean distances, computed per centroid without
    the dot-product expansion so that equal points are exactly 0 apart."""
    out = np.empty((points.shape[0], centers.shape[0]), dtype=np.float64)
    for j, center in enumerate(centers):
        out[:, j] = np.square(points - center).sum(axis=1)
    return out


def _assigned_sse(distances: np.ndarray, labels: np.ndarray) -> float:
    return float(distances[np.arange(labels.size), labels].sum())


def _initial_centers(
    points: np.ndarray, k: int, rng: np.random.Generator, init: KMeansInit
) -> np.ndarray:
    n = points.shape[0]
    if init is KMeansInit.random:
        return points[rng.choice(n, size=k, replace=False)].copy()
    chosen = [int(rng.integers(n))]
    nearest = np.square(points - points[chosen[0]]).sum(axis=1)
    for _ in range(1, k):
        weights = nearest.copy()
        weights[chosen] = 0.0
        if weights.sum() > 0:
            pick = int(rng.choice(n, p=weights / weights.sum()))
        else:
            left = np.setdiff1d(np.arange(n), chosen)
            pick = int(rng.choice(left))
        chosen.append(pick)
        nearest = np.minimum(
            nearest, np.square(points - points[pick]).sum(axis=1)
        )
    return points[chosen].copy()


def _update_centers(
    points: np.ndarray, labels: np.ndarray, centers: np.ndarray
) -> np.ndarray:
    """Mean of each cluster; an emptied cluster is re-seeded with the point
    farthest from its own centroid, which then moves into it."""
    k = centers.shape[0]
    sizes = np.bincount(labels, minlength=k)
    updated = centers.copy()
    for j in np.flatnonzero(sizes):
        updated[j] = points[labels == j].mean(axis=0)
    for j in np.flatnonzero(sizes == 0):
        gaps = np.square(points - updated[labels]).sum(axis=1)
        far = int(np.argmax(gaps))
        donor = labels[far]
        if gaps[far] == 0 or sizes[donor] < 2:
            continue
        logger.warning(f"Cluster {j} emptied; re-seeding at row {far}.")
        labels[far] = j
        sizes[donor] -= 1
        sizes[j] = 1
        updated[j] = points[far]
        updated[donor] = points[labels == donor].mean(axis=0)
    return updated


def fit(
    data: Dataset,
    k: int,
    seed: int = 42,
    max_iterations: int = MAX_ITERATIONS,
    init: KMeansInit = KMeansInit.random,
    on_iteration: Callable[[int, float], None] | None = None,
) -> ClusterModel:
    """Lloyd's algorithm over the encoded features of `data`.

    Alternates nearest-centroid assignment (ties go to the lowest index)
    with the centroid mean update until the assignment stops changing or
    `max_iterations` is reached. `on_iteration(i, sse)` sees every step.

    Examples:
        >>> from kmanb_toolkit.dataset import DeviceProfile
        >>> p = DeviceProfile(
        ...     device="toy", features=[{"name": "x", "kind": "numeric"}]
        ... )
        >>> d = Dataset.from_columns(p, {"x": [0, 1, 10, 11]}, ["normal"] * 4)
        >>> m = fit(d, k=2, seed=3)
        >>> sorted(c[0] for c in m.centroids), m.final_sse
        ([0.5, 10.5], 1.0)
    """
    n = len(data)
    if k <= 0:
        raise ModelError(f"{k=} must be positive.")
    if n == 0:
        raise ModelError("Cannot cluster an empty dataset.")
    if k > n:
        raise ModelError(f"{k=} exceeds the {n} instances.")
    if max_iterations < 1:
        raise ModelError(f"{max_iterations=} must be positive.")

    init = KMeansInit(init)
    encoder = FeatureEncoder.from_profile(data.profile)
    points = encoder.encode_many(data)
    rng = np.random.default_rng(seed)
    centers = _initial_centers(points, k, rng, init)
    distances = squared_distances(points, centers)
    labels: np.ndarray | None = None
    trace: list[float] = []
    for step in range(1, max_iterations + 1):
        assigned = distances.argmin(axis=1)
        if labels is not None and np.array_equal(assigned, labels):
            break
        labels = assigned
        centers = _update_centers(points, labels, centers)
        distances = squared_distances(points, centers)
        trace.append(_assigned_sse(distances, labels))
        logger.debug(f"k-means step {step}: sse={trace[-1]:.6g}")
        if on_iteration:
            on_iteration(step, trace[-1])

    logger.info(f"k-means {k=} ran {len(trace)} steps, sse={trace[-1]:.6g}")
    return ClusterModel(
        k=k,
        encoder=encoder,
        centroids=centers.tolist(),
        seed=seed,
        init=init,
        iterations_run=len(trace),
        final_sse=trace[-1],
        sse_trace=trace,
    )


def assign(model: ClusterModel, instance: Instance) -> int:
    point = model.encoder.encode(instance).reshape(1, -1)
    return int(squared_distances(point, model.centers).argmin(axis=1)[0])


def assign_many(model: ClusterModel, data: Dataset) -> np.ndarray:
    """`assign()` for every row of `data` at once."""
    points = model.encoder.encode_many(data)
    return squared_distances(points, model.centers).argmin(axis=1)


def sse(model: ClusterModel, data: Dataset) -> float:
    """Sum over rows of the squared distance to the nearest centroid."""
    points = model.encoder.encode_many(data)
    return float(squared_distances(points, model.centers).min(axis=1).sum())


def class_to_cluster(
    model: ClusterModel, data: Dataset
) -> ClusterClassMapping:
    """Name each cluster after its majority attack type. Ties go to the type
    more frequent in `data` overall, then to the alphabetically first."""
    labels = assign_many(model, data)
    types = data.attack_types
    overall = Counter(types.tolist())
    summaries = []
    for j in range(model.k):
        members = Counter(types[labels == j].tolist())
        size = sum(members.values())
        majority = None
        if members:
            majority = min(
                members, key=lambda c: (-members[c], -overall[c], c)
            )
        incorrect = size - members[majority] if majority else 0
        summaries.append(
            ClusterSummary(
                cluster=j, size=size, majority=majority, incorrect=incorrect
            )
        )
    wrong = sum(s.incorrect for s in summaries)
    total = len(data)
    return ClusterClassMapping(
        clusters=summaries,
        incorrectly_clustered=wrong,
        total=total,
        purity=1 - wrong / total if total else 1.0,
    )


def cluster_feature(k: int) -> FeatureSchema:
    return FeatureSchema(
        name=CLUSTER_FEATURE,
        kind=FeatureKind.nominal,
        categories=[f"c{j}" for j in range(k)],
    )


def augment(data: Dataset, model: ClusterModel) -> Dataset:
    """Append the nominal `cluster` feature (`c0` .. `c{k-1}`) holding each
    row's nearest centroid; all other columns are left as they are."""
    model.encoder.check(data.profile)
    labels = assign_many(model, data)
    values = [f"c{j}" for j in labels.tolist()]
    return data.with_feature(cluster_feature(model.k), values)
