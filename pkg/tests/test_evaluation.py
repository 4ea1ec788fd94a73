import math

import numpy as np
import pytest

from kmanb_toolkit import (
    ConfusionMatrix,
    DataError,
    TimingReport,
    apr,
    collapse_binary,
    confusion,
    timed,
)


def test_binary_example():
    m = ConfusionMatrix(
        classes=["normal", "anomaly"], counts=[[50, 5], [5, 40]]
    )
    report = apr(m)
    assert report.accuracy == 0.9
    normal, anomaly = report.per_class
    assert (normal.tp, normal.fp, normal.fn, normal.tn) == (50, 5, 5, 40)
    assert normal.precision == pytest.approx(50 / 55)
    assert anomaly.recall == pytest.approx(40 / 45)
    assert report.precision == pytest.approx(0.9)
    assert report.averaging == "support-weighted"


@pytest.mark.parametrize("seed", range(1000))
def test_weighted_recall_is_accuracy(seed):
    rng = np.random.default_rng(seed)
    size = int(rng.integers(1, 8))
    counts = rng.integers(0, 30, (size, size))
    counts[0, 0] += 1
    m = ConfusionMatrix(
        classes=[f"c{i}" for i in range(size)], counts=counts.tolist()
    )
    report = apr(m)
    assert report.accuracy == pytest.approx(np.trace(counts) / counts.sum())
    assert report.recall == pytest.approx(report.accuracy, abs=1e-12)
    assert 0 <= report.precision <= 1
    assert sum(c.support for c in report.per_class) == m.total


def test_absent_class_scores_zero_without_warning():
    m = ConfusionMatrix(
        classes=["normal", "ddos", "xss"],
        counts=[[3, 1, 0], [0, 2, 0], [0, 0, 0]],
    )
    report = apr(m)
    assert report.per_class[2].precision == report.per_class[2].recall == 0
    assert report.warnings == []


def test_never_predicted_class_warns():
    m = ConfusionMatrix(classes=["normal", "ddos"], counts=[[3, 0], [2, 0]])
    report = apr(m)
    assert report.per_class[1].precision == 0
    assert report.warnings == ["precision of ddos"]


def test_empty_matrix_is_rejected():
    with pytest.raises(DataError):
        apr(ConfusionMatrix(classes=["a"], counts=[[0]]))


@pytest.mark.parametrize(
    "counts", [[[1, 2]], [[1, -1], [0, 1]], [[1, 0], [0, 1], [0, 0]]]
)
def test_matrix_shape_is_validated(counts):
    with pytest.raises(ValueError):
        ConfusionMatrix(classes=["a", "b"], counts=counts)


def test_confusion_tallies():
    m = confusion(
        ["normal", "ddos", "ddos", "xss"],
        ["normal", "xss", "ddos", "xss"],
        ["normal", "ddos", "xss"],
    )
    assert m.counts == [[1, 0, 0], [0, 1, 1], [0, 0, 1]]
    assert m.trace == 3
    assert m.total == 4


def test_confusion_rejects_unknown_class():
    with pytest.raises(DataError, match="spam"):
        confusion(["normal"], ["spam"], ["normal"])
    with pytest.raises(DataError):
        confusion(["normal"], [], ["normal"])


def test_collapse_binary():
    m = ConfusionMatrix(
        classes=["normal", "ddos", "xss"],
        counts=[[5, 1, 0], [0, 4, 1], [2, 0, 8]],
    )
    binary = collapse_binary(m)
    assert binary.classes == ["normal", "anomaly"]
    assert binary.counts == [[5, 1], [2, 13]]
    with pytest.raises(DataError):
        collapse_binary(ConfusionMatrix(classes=["ddos"], counts=[[1]]))


def test_timed_returns_result_and_seconds():
    result, seconds = timed(sum, [1, 2, 3])
    assert result == 6
    assert seconds >= 0


def test_timing_report_is_finite():
    report = TimingReport(train_seconds=1.5, test_seconds=0.25)
    assert report.total_seconds == 1.75
    with pytest.raises(ValueError):
        TimingReport(train_seconds=math.inf, test_seconds=0)
    with pytest.raises(ValueError):
        TimingReport(train_seconds=-1, test_seconds=0)
