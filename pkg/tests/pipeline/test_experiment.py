import numpy as np
import pandas as pd
import pytest

from kmanb_toolkit import (
    Algorithm,
    Dataset,
    DeviceProfile,
    ExperimentConfig,
    ExperimentResult,
    SchemaError,
    load_device,
    normalize_fit,
    run_baseline,
    run_experiment,
    run_kmanb,
    stratified_split,
)
from kmanb_toolkit.models import FeatureEncoder
from kmanb_toolkit.pipeline import (
    EnsembleChoice,
    experiment,
    load_splits,
    prepare,
)

QUICK = {"fraction": 0.02}
XOR_BLOBS = {
    (0.0, 0.0): "normal",
    (1.0, 1.0): "normal",
    (0.0, 1.0): "ddos",
    (1.0, 0.0): "ddos",
}


def quick(**fields) -> ExperimentConfig:
    return ExperimentConfig(**({"device": "fridge", "train": QUICK} | fields))


def xor_blobs(per_blob: int, seed: int) -> Dataset:
    """Four tight blobs where each class owns two opposite corners, so no
    single Gaussian per class can tell them apart."""
    profile = DeviceProfile(
        device="xor",
        features=[
            {"name": "x", "kind": "numeric"},
            {"name": "y", "kind": "numeric"},
        ],
        attack_types=["ddos"],
    )
    rng = np.random.default_rng(seed)
    xs, ys, types = [], [], []
    for (cx, cy), cls in XOR_BLOBS.items():
        xs += (cx + rng.normal(0, 0.03, per_blob)).tolist()
        ys += (cy + rng.normal(0, 0.03, per_blob)).tolist()
        types += [cls] * per_blob
    return Dataset.from_columns(profile, {"x": xs, "y": ys}, types)


def test_kmanb_separates_synthetic_fridge(small_fridge):
    train, test = stratified_split(small_fridge, 0.7, seed=3)
    config = ExperimentConfig(device="fridge", seed=3)
    result = run_kmanb(train, test, config)
    assert result.scores.accuracy >= 0.9
    assert result.n_train == len(train)
    assert result.n_test == len(test) == result.confusion.total
    assert result.classes == load_device("fridge").classes
    diagnostics = result.clusters
    assert diagnostics.k == 7
    assert len(diagnostics.clusters) == 7
    assert sum(c.size for c in diagnostics.clusters) == len(train)
    assert 0 <= diagnostics.purity <= 1
    assert diagnostics.iterations >= 1


def test_single_cluster_single_round_is_naive_bayes(small_fridge):
    train, test = stratified_split(small_fridge, 0.7, seed=5)
    config = ExperimentConfig(device="fridge", k_override=1, boost_rounds=1)
    kmanb = run_kmanb(train, test, config)
    nb = run_baseline(Algorithm.nb, train, test, config)
    assert kmanb.confusion == nb.confusion
    assert kmanb.clusters.k == 1
    assert nb.clusters is None
    assert not kmanb.ensemble.cluster_feature
    assert (kmanb.ensemble.rounds, kmanb.ensemble.gain) == (1, 0)
    assert kmanb.ensemble.held_out > 0


def test_cluster_feature_rescues_xor_classes():
    train, test = xor_blobs(100, seed=1), xor_blobs(50, seed=2)
    config = ExperimentConfig(
        device="fridge", k_override=4, kmeans_init="k-means++", seed=1
    )
    kmanb = run_kmanb(train, test, config)
    nb = run_baseline(Algorithm.nb, train, test, config)
    assert kmanb.ensemble.cluster_feature
    assert kmanb.ensemble.gain > 0
    assert kmanb.scores.accuracy >= 0.95
    assert kmanb.scores.accuracy - nb.scores.accuracy >= 0.15


def test_without_holdout_the_full_ensemble_runs(small_fridge):
    train, test = stratified_split(small_fridge, 0.7, seed=5)
    config = ExperimentConfig(device="fridge", boost_rounds=4, holdout=None)
    result = run_kmanb(train, test, config)
    assert result.ensemble == EnsembleChoice(
        cluster_feature=True, rounds=4, held_out=0
    )


def test_kmanb_fits_on_train_rows_only(small_fridge, monkeypatch):
    fitted: list[list] = []

    def recording(fit):
        def wrapper(*args, **kwargs):
            out = fit(*args, **kwargs)
            fitted[-1].append(out)
            return out

        return wrapper

    for name in ("normalize_fit", "kmeans_fit", "boost_fit"):
        original = getattr(experiment, name)
        monkeypatch.setattr(experiment, name, recording(original))

    train, test = stratified_split(small_fridge, 0.7, seed=6)
    temperature = test.frame["fridge_temperature"] * 50 + 1000
    shifted = test.with_frame(
        test.frame.assign(fridge_temperature=temperature)
    ).take(np.arange(len(test))[::-1])
    config = ExperimentConfig(device="fridge", seed=6, boost_rounds=3)
    for split in (test, shifted):
        fitted.append([])
        run_kmanb(train, split, config)

    plain, moved = fitted
    assert len(plain) == len(moved) >= 3
    assert plain == moved
    params, clusters = plain[0], plain[1]
    assert params == normalize_fit(train.compact())
    assert clusters.encoder == FeatureEncoder.from_profile(
        train.compact().profile
    )


@pytest.mark.parametrize("algorithm", ["nb", "knn", "rf"])
def test_baselines(algorithm, small_fridge):
    train, test = stratified_split(small_fridge, 0.7, seed=1)
    config = ExperimentConfig(
        device="fridge", algorithm=algorithm, rf_trees=10
    )
    result = run_baseline(algorithm, train, test, config)
    assert result.algorithm == Algorithm(algorithm)
    assert result.confusion.total == len(test)
    assert result.scores.accuracy >= 0.8
    assert result.timing.train_seconds >= 0


def test_baseline_rejects_kmanb(small_fridge):
    train, test = stratified_split(small_fridge, 0.7)
    with pytest.raises(ValueError):
        run_baseline("kmanb", train, test, ExperimentConfig(device="fridge"))


def test_run_experiment_is_deterministic():
    a = run_experiment(quick(algorithm="kmanb", boost_rounds=3, seed=9))
    b = run_experiment(quick(algorithm="kmanb", boost_rounds=3, seed=9))
    assert a.confusion == b.confusion
    assert a.clusters.sse == b.clusters.sse


def test_drop_top_feature(small_fridge):
    train, test = stratified_split(small_fridge, 0.7, seed=2)
    config = ExperimentConfig(device="fridge", drop_top_feature=True)
    result = run_kmanb(train, test, config)
    assert result.ranking is not None
    assert result.dropped_feature == result.ranking.top
    prepared = prepare(train, test, drop_top_feature=True)
    assert result.dropped_feature not in prepared.train.profile.columns
    assert result.dropped_feature not in prepared.test.profile.columns


def test_prepare_fits_on_train_only(toy):
    train = toy.take([0, 1, 3, 4])
    extreme = toy.with_frame(toy.frame.assign(x=100.0, c="mild"))
    plain = prepare(train, toy.take([2, 5]))
    leaked = prepare(train, extreme)
    pd.testing.assert_frame_equal(plain.train.frame, leaked.train.frame)
    assert leaked.test.column("x").tolist() == [1.0] * 6
    assert leaked.test.profile == plain.train.profile


def test_prepare_compacts_categories(toy):
    train = toy.take([0, 1, 3, 4]).with_frame(
        toy.take([0, 1, 3, 4]).frame.assign(c="low")
    )
    prepared = prepare(train, toy.take([2, 5]))
    assert prepared.train.profile.feature("c").categories == ["low"]
    assert prepared.test.profile.feature("c").categories == ["low"]


def test_prepare_rejects_other_schema(toy, small_fridge):
    with pytest.raises(SchemaError):
        prepare(toy, small_fridge)


def test_load_splits_from_generated_test():
    config = quick(test=QUICK, seed=4)
    train, test = load_splits(config)
    assert train.class_counts() == test.class_counts()
    assert not train.frame.equals(test.frame)


def test_run_from_csv(fridge_csv):
    config = ExperimentConfig(
        device="fridge", train=fridge_csv, algorithm="knn", seed=1
    )
    result = run_experiment(config)
    assert result.n_train + result.n_test == 16
    assert result.n_test == 7


def test_binary_target():
    result = run_experiment(quick(algorithm="nb", target="label"))
    assert result.classes == ["normal", "anomaly"]
    assert len(result.confusion.counts) == 2


def test_result_json_round_trip():
    result = run_experiment(quick(algorithm="nb"))
    again = ExperimentResult.parse_raw(result.json())
    assert again == result
    assert again.version == result.version
