import math
from collections.abc import Callable
from typing import Any, NamedTuple

import numpy as np
from loguru import logger
from pydantic import BaseModel, Field

from kmanb_toolkit import __version__
from kmanb_toolkit.dataset import (
    Dataset,
    DeviceProfile,
    Target,
    device_counts,
    load_csv,
    load_device,
    normalize_apply,
    normalize_fit,
    stratified_holdout,
    stratified_split,
    synthesize,
)
from kmanb_toolkit.errors import SchemaError
from kmanb_toolkit.evaluation import (
    AprReport,
    ConfusionMatrix,
    TimingReport,
    apr,
    confusion,
    timed,
)
from kmanb_toolkit.feature_rank import (
    FeatureRanking,
    drop_feature,
    rank_features,
)
from kmanb_toolkit.models import (
    BoostConfig,
    ClusterModel,
    ClusterSummary,
    augment,
    boost_fit,
    boost_predict_many,
    class_to_cluster,
    cluster_count,
    kmeans_fit,
    knn_fit,
    knn_predict_many,
    nb_fit,
    nb_predict_many,
    rf_fit,
    rf_predict_many,
    staged_predict_many,
)

from .config import Algorithm, ExperimentConfig, Source, SynthSource

SELECTION_Z = 3.0


class ClusterDiagnostics(BaseModel):
    """Class-to-cluster evaluation of the fitted k-means step."""

    k: int
    sse: float
    purity: float = Field(..., ge=0, le=1)
    iterations: int
    incorrectly_clustered: int
    clusters: list[ClusterSummary]


class EnsembleChoice(BaseModel):
    """Boosted variant kept after scoring on rows held out of training.

    `gain` is the number of held-out rows the variant classifies correctly
    and one-round naive Bayes without the cluster feature misses, less the
    rows where it is the other way round.
    """

    cluster_feature: bool
    rounds: int = Field(..., ge=1)
    held_out: int = Field(..., ge=0)
    gain: int = 0


class ExperimentResult(BaseModel):
    """Self-describing outcome of one experiment.

    Field | Type | Description
    --:|:--|:--
    version | str | toolkit version that produced the result
    config | ExperimentConfig | the config as run
    seed | int | seed used for the split and every learner
    classes | list[str] | ordered classes of the confusion matrix
    n_train | int | rows used for fitting
    n_test | int | rows scored
    confusion | ConfusionMatrix | true against predicted counts
    scores | AprReport | accuracy, precision, recall
    timing | TimingReport | train and test seconds
    clusters | ClusterDiagnostics | only for `kmanb`
    ensemble | EnsembleChoice | only for `kmanb`
    ranking | FeatureRanking | only with `drop_top_feature`
    dropped_feature | str | feature removed before training
    """

    version: str = __version__
    config: ExperimentConfig
    seed: int
    classes: list[str]
    n_train: int
    n_test: int
    confusion: ConfusionMatrix
    scores: AprReport
    timing: TimingReport
    clusters: ClusterDiagnostics | None = None
    ensemble: EnsembleChoice | None = None
    ranking: FeatureRanking | None = None
    dropped_feature: str | None = None

    @property
    def device(self) -> str:
        return self.config.device

    @property
    def algorithm(self) -> Algorithm:
        return self.config.algorithm


def load_source(
    source: Source, profile: DeviceProfile, seed: int
) -> Dataset:
    if isinstance(source, SynthSource):
        counts = device_counts(profile.device, source.scale)
        return synthesize(
            profile,
            {c: max(2, round(n * source.fraction)) for c, n in counts.items()},
            seed=seed if source.seed is None else source.seed,
            separation=source.separation,
            date_mode=source.date_mode,
        )
    return load_csv(source, profile)


def load_splits(config: ExperimentConfig) -> tuple[Dataset, Dataset]:
    """Read or generate the train and test splits named by `config`.
    A generated test split draws from the seed after the training one."""
    profile = load_device(config.device)
    train = load_source(config.train, profile, config.seed)
    if config.test is not None:
        test = load_source(config.test, profile, config.seed + 1)
        return train, test
    return stratified_split(train, config.split_fraction, config.seed)


class Prepared(NamedTuple):
    train: Dataset
    test: Dataset
    ranking: FeatureRanking | None = None
    dropped: str | None = None


def prepare(
    train: Dataset, test: Dataset, drop_top_feature: bool = False
) -> Prepared:
    """Shared preprocessing: optional removal of the best-ranked feature,
    category sets and normalization bounds fitted on `train` only and
    applied to both splits."""
    if not train.profile.same_schema(test.profile):
        raise SchemaError(
            f"Train columns {train.profile.columns} differ from test"
            f" columns {test.profile.columns}"
        )
    ranking = dropped = None
    if drop_top_feature:
        ranking = rank_features(train)
        dropped = ranking.top
        logger.info(f"Dropping top-ranked feature {dropped!r}")
        train, test = drop_feature(train, dropped), drop_feature(test, dropped)
    train = train.compact()
    test = test.with_frame(test.frame, train.profile)
    params = normalize_fit(train)
    return Prepared(
        train=normalize_apply(params, train),
        test=normalize_apply(params, test),
        ranking=ranking,
        dropped=dropped,
    )


def _result(
    config: ExperimentConfig,
    data: Prepared,
    predictions: np.ndarray,
    timing: TimingReport,
    clusters: ClusterDiagnostics | None = None,
    ensemble: EnsembleChoice | None = None,
) -> ExperimentResult:
    train, test = data.train, data.test
    classes = train.target_classes(config.target)
    matrix = confusion(test.targets(config.target), predictions, classes)
    scores = apr(matrix)
    logger.info(
        f"{config.device}/{config.algorithm.value}:"
        f" accuracy={scores.accuracy:.4f} train={timing.train_seconds:.3f}s"
        f" test={timing.test_seconds:.3f}s"
    )
    return ExperimentResult(
        config=config,
        seed=config.seed,
        classes=classes,
        n_train=len(train),
        n_test=len(test),
        confusion=matrix,
        scores=scores,
        timing=timing,
        clusters=clusters,
        ensemble=ensemble,
        ranking=data.ranking,
        dropped_feature=data.dropped,
    )


def choose_ensemble(
    train: Dataset, clusters: ClusterModel, config: ExperimentConfig
) -> EnsembleChoice:
    """Pick the cluster feature and round count on a stratified holdout.

    Both the augmented and the plain rows are boosted on the kept part of
    `train` and every prefix of each ensemble is scored on the held part.
    A variant replaces one-round plain naive Bayes only when its net gain
    is positive and at least `SELECTION_Z` standard errors of the rows on
    which the two disagree. Of variants with equal gain the one with fewer
    rounds wins, then the one with the cluster feature. Without a holdout
    the full configured ensemble is used.
    """
    full = EnsembleChoice(
        cluster_feature=True, rounds=config.boost_rounds, held_out=0
    )
    if config.holdout is None:
        return full
    kept, held = stratified_holdout(train, config.holdout, config.seed)
    if held.size == 0:
        logger.warning("Training split too small to hold rows out.")
        return full

    boosting = BoostConfig(rounds=config.boost_rounds, target=config.target)
    truth = train.targets(config.target)[held]
    hits: dict[bool, list[np.ndarray]] = {}
    for cluster_feature in (True, False):
        rows = augment(train, clusters) if cluster_feature else train
        model = boost_fit(rows.take(kept), boosting, config.seed)
        staged = staged_predict_many(model, rows.take(held))
        hits[cluster_feature] = [p == truth for p in staged]

    baseline = hits[False][0]
    best = EnsembleChoice(cluster_feature=False, rounds=1, held_out=held.size)
    for rounds in range(1, config.boost_rounds + 1):
        for cluster_feature in (True, False):
            if rounds > len(hits[cluster_feature]):
                continue
            right = hits[cluster_feature][rounds - 1]
            won = int((right & ~baseline).sum())
            lost = int((baseline & ~right).sum())
            gain = won - lost
            if gain > best.gain and gain >= SELECTION_Z * math.sqrt(
                won + lost
            ):
                best = EnsembleChoice(
                    cluster_feature=cluster_feature,
                    rounds=rounds,
                    held_out=held.size,
                    gain=gain,
                )
    logger.info(
        f"Ensemble: cluster_feature={best.cluster_feature}"
        f" rounds={best.rounds} gain={best.gain} of {held.size} held out"
    )
    return best


def run_kmanb(
    train: Dataset, test: Dataset, config: ExperimentConfig
) -> ExperimentResult:
    """Cluster, augment, then boost naive Bayes over the augmented rows.

    The variant actually refitted on the whole of `train` is chosen by
    `choose_ensemble()`, so the cluster feature and extra rounds are kept
    only when they beat plain naive Bayes on held-out training rows.

    Train time covers the k-means fit, the selection and the final
    boosting; test time covers cluster assignment of `test` and the
    ensemble vote.
    """
    data = prepare(train, test, config.drop_top_feature)
    train, test = data.train, data.test
    k = config.k_override or cluster_count(train.profile)

    def fit_phase():
        clusters = kmeans_fit(
            train,
            k,
            seed=config.seed,
            max_iterations=config.max_iterations,
            init=config.kmeans_init,
        )
        choice = choose_ensemble(train, clusters, config)
        rows = augment(train, clusters) if choice.cluster_feature else train
        boosting = BoostConfig(rounds=choice.rounds, target=config.target)
        return clusters, choice, boost_fit(rows, boosting, config.seed)

    def test_phase():
        rows = augment(test, clusters) if choice.cluster_feature else test
        return boost_predict_many(model, rows)

    (clusters, choice, model), train_seconds = timed(fit_phase)
    predictions, test_seconds = timed(test_phase)
    mapping = class_to_cluster(clusters, train)
    diagnostics = ClusterDiagnostics(
        k=k,
        sse=clusters.final_sse,
        purity=mapping.purity,
        iterations=clusters.iterations_run,
        incorrectly_clustered=mapping.incorrectly_clustered,
        clusters=mapping.clusters,
    )
    timing = TimingReport(
        train_seconds=train_seconds, test_seconds=test_seconds
    )
    return _result(config, data, predictions, timing, diagnostics, choice)


Learner = tuple[Callable[[Dataset], Any], Callable[[Any, Dataset], Any]]


def _learner(algorithm: Algorithm, config: ExperimentConfig) -> Learner:
    target: Target = config.target
    match algorithm:
        case Algorithm.nb:
            return (lambda d: nb_fit(d, target=target)), nb_predict_many
        case Algorithm.knn:
            return (
                lambda d: knn_fit(d, config.knn_k, target=target)
            ), knn_predict_many
        case Algorithm.rf:
            return (
                lambda d: rf_fit(
                    d,
                    n_trees=config.rf_trees,
                    m_try=config.rf_mtry,
                    seed=config.seed,
                    target=target,
                )
            ), rf_predict_many
    raise ValueError(f"{algorithm} is not a baseline learner.")


def run_baseline(
    algorithm: Algorithm,
    train: Dataset,
    test: Dataset,
    config: ExperimentConfig,
) -> ExperimentResult:
    """Same preprocessing as `run_kmanb()`, then a plain learner."""
    algorithm = Algorithm(algorithm)
    fit, predict = _learner(algorithm, config)
    data = prepare(train, test, config.drop_top_feature)
    model, train_seconds = timed(fit, data.train)
    predictions, test_seconds = timed(predict, model, data.test)
    timing = TimingReport(
        train_seconds=train_seconds, test_seconds=test_seconds
    )
    return _result(config, data, predictions, timing)


def run_experiment(config: ExperimentConfig) -> ExperimentResult:
    """Load the splits of `config`, then dispatch on its algorithm."""
    train, test = load_splits(config)
    logger.info(
        f"Running {config.algorithm.value} on {config.device}:"
        f" {len(train)} train, {len(test)} test rows"
    )
    if config.algorithm == Algorithm.kmanb:
        return run_kmanb(train, test, config)
    return run_baseline(config.algorithm, train, test, config)
