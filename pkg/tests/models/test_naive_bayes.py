from fractions import Fraction

import numpy as np
import pytest

from kmanb_toolkit import (
    Dataset,
    DeviceProfile,
    Instance,
    Label,
    ModelError,
    SchemaError,
    Target,
    nb_fit,
    nb_posterior,
    nb_predict,
)
from kmanb_toolkit.models import nb_posterior_many, nb_predict_many


@pytest.fixture
def nominal() -> Dataset:
    profile = DeviceProfile(
        device="hand",
        features=[
            {"name": "c", "kind": "nominal", "categories": ["h", "l", "m"]}
        ],
        attack_types=["ddos"],
    )
    return Dataset.from_columns(
        profile,
        {"c": ["h", "h", "h", "l"]},
        ["normal", "normal", "ddos", "ddos"],
    )


def row(*values, attack="normal") -> Instance:
    return Instance(tuple(values), Label.of(attack), attack)


@pytest.mark.parametrize(
    "value, expected",
    [
        # smoothed p(c | class) over 3 categories: normal (3/5, 1/5, 1/5)
        # and ddos (2/5, 2/5, 1/5), equal priors
        ("h", {"normal": Fraction(3, 5), "ddos": Fraction(2, 5)}),
        ("l", {"normal": Fraction(1, 3), "ddos": Fraction(2, 3)}),
        ("m", {"normal": Fraction(1, 2), "ddos": Fraction(1, 2)}),
    ],
)
def test_posterior_matches_exact_oracle(nominal, value, expected):
    model = nb_fit(nominal)
    post = nb_posterior(model, row(value))
    assert list(post) == ["normal", "ddos"]
    for cls, exact in expected.items():
        assert abs(post[cls] - float(exact)) < 1e-12


def test_unseen_category_gets_smoothed_mass(nominal):
    model = nb_fit(nominal)
    post = nb_posterior(model, row("never"))
    assert post["normal"] == pytest.approx(0.5, abs=1e-12)


def test_gaussian_estimates(toy):
    model = nb_fit(toy)
    normal, ddos = model.numeric_params["x"]
    assert normal.mean == pytest.approx(0.1)
    assert ddos.mean == pytest.approx(5.066666666666666)
    assert normal.variance == pytest.approx(np.var([0.0, 0.2, 0.1]))
    assert ddos.variance == pytest.approx(np.var([5.0, 5.3, 4.9]))
    assert model.priors == [0.5, 0.5]
    assert model.class_weights == [3.0, 3.0]


def test_variance_floor(toy_profile):
    data = Dataset.from_columns(
        toy_profile,
        {"x": [1.0, 1.0, 3.0, 3.0], "c": ["low"] * 4},
        ["normal", "normal", "ddos", "ddos"],
    )
    model = nb_fit(data)
    floor = model.variance_floor["x"]
    assert floor == pytest.approx(1e-6 * 4)
    assert [p.variance for p in model.numeric_params["x"]] == [floor, floor]
    assert nb_predict(model, row(1.1, "low")) == "normal"
    assert nb_predict(model, row(2.9, "low")) == "ddos"


@pytest.mark.parametrize("seed", range(50))
def test_posteriors_sum_to_one(seed, toy_profile):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(4, 40))
    types = ["normal", "ddos"] + rng.choice(["normal", "ddos"], n - 2).tolist()
    data = Dataset.from_columns(
        toy_profile,
        {
            "x": rng.normal(size=n) * 10,
            "c": rng.choice(["high", "low"], n).tolist(),
        },
        types,
    )
    model = nb_fit(data, weights=rng.uniform(0.1, 2.0, n))
    queries = Dataset.from_columns(
        toy_profile,
        {
            "x": rng.normal(size=20) * 30,
            "c": rng.choice(["high", "low", "mild"], 20).tolist(),
        },
        ["normal"] * 20,
    )
    posts = nb_posterior_many(model, queries)
    assert posts.shape == (20, 2)
    assert (posts >= 0).all()
    np.testing.assert_allclose(posts.sum(axis=1), 1.0, atol=1e-9)


def test_weights_rescale_to_the_same_model(toy):
    w = np.array([1.0, 2.0, 1.0, 3.0, 1.0, 2.0])
    a, b = nb_fit(toy, w), nb_fit(toy, w * 7.5)
    assert a.priors == pytest.approx(b.priors)
    assert a.class_weights == pytest.approx(b.class_weights)
    assert sum(a.class_weights) == pytest.approx(len(toy))


def test_uniform_weights_are_plain_counts(toy):
    assert nb_fit(toy, np.full(6, 0.25)) == nb_fit(toy)


def test_weights_shift_the_prior(toy):
    model = nb_fit(toy, [3, 3, 3, 1, 1, 1])
    assert model.priors == pytest.approx([0.75, 0.25])


@pytest.mark.parametrize(
    "weights",
    [[1, 1, 1], [1, 1, 1, 1, 1, -1], [0] * 6, [1, 1, 1, 0, 0, 0]],
)
def test_fit_rejects_weights(toy, weights):
    with pytest.raises(ModelError):
        nb_fit(toy, weights)


def test_fit_rejects_empty(toy):
    with pytest.raises(ModelError):
        nb_fit(toy.take([]))


def test_absent_classes_are_skipped(small_fridge):
    subset = small_fridge.take(
        np.flatnonzero(np.isin(small_fridge.attack_types, ["normal", "xss"]))
    )
    assert nb_fit(subset).classes == ["normal", "xss"]


def test_binary_target(toy):
    model = nb_fit(toy, target=Target.label)
    assert model.classes == ["normal", "anomaly"]
    assert nb_predict(model, row(5.1, "high")) == "anomaly"


def test_single_and_many_agree(small_fridge):
    model = nb_fit(small_fridge)
    many = nb_predict_many(model, small_fridge)
    for idx in range(0, len(small_fridge), 23):
        assert nb_predict(model, small_fridge.instance(idx)) == many[idx]


def test_predict_many_rejects_other_columns(toy, small_fridge):
    with pytest.raises(SchemaError):
        nb_predict_many(nb_fit(toy), small_fridge)
