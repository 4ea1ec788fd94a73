import numpy as np
import pytest

from kmanb_toolkit import (
    Dataset,
    DeviceProfile,
    Instance,
    Label,
    ModelError,
    knn_fit,
    knn_predict,
)
from kmanb_toolkit.models import FeatureEncoder, knn_predict_many


@pytest.fixture
def points_profile() -> DeviceProfile:
    return DeviceProfile(
        device="points",
        features=[
            {"name": "x", "kind": "numeric"},
            {"name": "y", "kind": "numeric"},
        ],
        attack_types=["ddos", "xss"],
    )


def at(x: float, y: float) -> Instance:
    return Instance((x, y), Label.normal, "normal")


def brute_force(train: Dataset, query: np.ndarray, k: int) -> str:
    enc = FeatureEncoder.from_profile(train.profile)
    dists = np.square(enc.encode_many(train) - query).sum(axis=1)
    nearest = np.argsort(dists, kind="stable")[:k]
    classes = train.profile.classes
    votes = [list(train.attack_types[nearest]).count(c) for c in classes]
    return classes[int(np.argmax(votes))]


def test_one_neighbor_recalls_training_rows(small_fridge):
    model = knn_fit(small_fridge, k=1)
    predicted = knn_predict_many(model, small_fridge)
    assert predicted.tolist() == small_fridge.attack_types.tolist()


def test_equidistant_rows_go_to_lower_index(points_profile):
    train = Dataset.from_columns(
        points_profile,
        {"x": [-1.0, 1.0], "y": [0.0, 0.0]},
        ["xss", "ddos"],
    )
    assert knn_predict(knn_fit(train, k=1), at(0.0, 0.0)) == "xss"


def test_mode_ties_go_to_earlier_class(points_profile):
    train = Dataset.from_columns(
        points_profile,
        {"x": [1.0, 2.0, 9.0], "y": [0.0, 0.0, 0.0]},
        ["xss", "ddos", "normal"],
    )
    assert knn_predict(knn_fit(train, k=2), at(1.4, 0.0)) == "ddos"
    assert knn_predict(knn_fit(train, k=3), at(1.4, 0.0)) == "normal"


@pytest.mark.parametrize("seed", range(10))
def test_matches_brute_force(seed, points_profile):
    rng = np.random.default_rng(seed)
    n = 60
    train = Dataset.from_columns(
        points_profile,
        {"x": rng.integers(0, 6, n), "y": rng.integers(0, 6, n)},
        rng.choice(points_profile.classes, n).tolist(),
    )
    queries = Dataset.from_columns(
        points_profile,
        {"x": rng.uniform(-1, 7, 25), "y": rng.integers(0, 6, 25)},
        ["normal"] * 25,
    )
    k = int(rng.integers(1, 8))
    model = knn_fit(train, k=k)
    predicted = knn_predict_many(model, queries)
    enc = FeatureEncoder.from_profile(points_profile)
    for idx, query in enumerate(enc.encode_many(queries)):
        assert predicted[idx] == brute_force(train, query, k)


def test_single_and_many_agree(small_fridge):
    model = knn_fit(small_fridge, k=3)
    many = knn_predict_many(model, small_fridge)
    for idx in range(0, len(small_fridge), 31):
        assert knn_predict(model, small_fridge.instance(idx)) == many[idx]


@pytest.mark.parametrize("k", [0, 7])
def test_fit_rejects_k(toy, k):
    with pytest.raises(ModelError):
        knn_fit(toy, k=k)


def test_model_serializes(toy):
    model = knn_fit(toy, k=2)
    assert '"points": [[0.0, 0.0, 1.0]' in model.json()


def test_all_neighbours_vote_the_global_mode(small_fridge):
    model = knn_fit(small_fridge, k=len(small_fridge))
    predicted = knn_predict_many(model, small_fridge.take(range(0, 280, 7)))
    assert set(predicted.tolist()) == {"normal"}
