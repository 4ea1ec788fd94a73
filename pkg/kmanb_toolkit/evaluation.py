import math
import threading
import time
from collections.abc import Callable, Sequence
from fractions import Fraction
from typing import Any, Literal, TypeVar

import numpy as np
from loguru import logger
from pydantic import BaseModel, Field, root_validator, validator

from kmanb_toolkit.dataset import NORMAL
from kmanb_toolkit.errors import DataError

T = TypeVar("T")
ANOMALY = "anomaly"

_gate: Any = threading.RLock()


class ConfusionMatrix(BaseModel):
    """`counts[i][j]`: rows of true class `classes[i]` predicted as
    `classes[j]`."""

    classes: list[str]
    counts: list[list[int]]

    @validator("classes")
    def classes_unique(cls, v):
        if len(set(v)) != len(v):
            raise ValueError(f"Duplicate classes in {v=}")
        return v

    @root_validator(skip_on_failure=True)
    def square_and_nonnegative(cls, values):
        size, counts = len(values["classes"]), values["counts"]
        if len(counts) != size or any(len(r) != size for r in counts):
            raise ValueError(f"Counts must be {size} x {size}.")
        if any(c < 0 for row in counts for c in row):
            raise ValueError("Counts must be non-negative.")
        return values

    @property
    def array(self) -> np.ndarray:
        size = len(self.classes)
        return np.asarray(self.counts, dtype=np.int64).reshape(size, size)

    @property
    def total(self) -> int:
        return int(self.array.sum())

    @property
    def trace(self) -> int:
        return int(np.trace(self.array))

    def one_vs_rest(self, idx: int) -> tuple[int, int, int, int]:
        """`(tp, fp, fn, tn)` of `classes[idx]` against all the others."""
        m = self.array
        tp = int(m[idx, idx])
        fp = int(m[:, idx].sum()) - tp
        fn = int(m[idx, :].sum()) - tp
        return tp, fp, fn, self.total - tp - fp - fn


class ClassScores(BaseModel):
    name: str
    precision: float = Field(..., ge=0, le=1)
    recall: float = Field(..., ge=0, le=1)
    support: int = Field(..., ge=0)
    tp: int
    fp: int
    fn: int
    tn: int


class AprReport(BaseModel):
    """Accuracy with support-weighted precision and recall.

    Field | Type | Description
    --:|:--|:--
    accuracy | float | `trace / total`
    precision | float | per-class precision weighted by support
    recall | float | per-class recall weighted by support
    per_class | list[ClassScores] | one-vs-rest breakdown
    averaging | str | always `support-weighted`
    warnings | list[str] | ratios whose denominator was 0 and were set to 0
    """

    accuracy: float = Field(..., ge=0, le=1)
    precision: float = Field(..., ge=0, le=1)
    recall: float = Field(..., ge=0, le=1)
    per_class: list[ClassScores]
    averaging: Literal["support-weighted"] = "support-weighted"
    warnings: list[str] = Field(default_factory=list)


class TimingReport(BaseModel):
    train_seconds: float = Field(..., ge=0)
    test_seconds: float = Field(..., ge=0)

    @validator("train_seconds", "test_seconds")
    def finite(cls, v):
        if not math.isfinite(v):
            raise ValueError(f"Time {v} is not finite.")
        return v

    @property
    def total_seconds(self) -> float:
        return self.train_seconds + self.test_seconds


def confusion(
    truths: Sequence[str] | np.ndarray,
    predictions: Sequence[str] | np.ndarray,
    classes: Sequence[str],
) -> ConfusionMatrix:
    """Tally true against predicted classes.

    Examples:
        >>> m = confusion(["a", "b", "a"], ["a", "b", "a"], ["a", "b"])
        >>> m.counts
        [[2, 0], [0, 1]]
    """
    truths, predictions = list(truths), list(predictions)
    if len(truths) != len(predictions):
        raise DataError(f"{len(truths)} truths vs {len(predictions)} preds.")
    index = {c: i for i, c in enumerate(classes)}
    if unknown := sorted(set(truths + predictions) - set(index)):
        raise DataError(f"Classes {unknown} not in {list(classes)}")
    counts = np.zeros((len(index), len(index)), dtype=np.int64)
    np.add.at(
        counts,
        (
            np.fromiter((index[t] for t in truths), np.int64, len(truths)),
            np.fromiter((index[p] for p in predictions), np.int64),
        ),
        1,
    )
    return ConfusionMatrix(classes=list(classes), counts=counts.tolist())


def _ratio(num: int, den: int, what: str, warnings: list[str]) -> Fraction:
    if den == 0:
        warnings.append(what)
        return Fraction(0)
    return Fraction(num, den)


def apr(matrix: ConfusionMatrix) -> AprReport:
    """Accuracy, precision and recall from one-vs-rest counts, computed
    with exact fractions and rounded once.

    Examples:
        >>> m = ConfusionMatrix(
        ...     classes=["normal", "anomaly"], counts=[[40, 5], [5, 50]]
        ... )
        >>> r = apr(m)
        >>> r.accuracy, round(r.per_class[1].precision, 3)
        (0.9, 0.909)
    """
    total = matrix.total
    if total == 0:
        raise DataError("Cannot score an empty confusion matrix.")
    warnings: list[str] = []
    scores: list[ClassScores] = []
    precision = recall = Fraction(0)
    for idx, name in enumerate(matrix.classes):
        tp, fp, fn, tn = matrix.one_vs_rest(idx)
        support = tp + fn
        if support == 0 and tp + fp == 0:
            p = r = Fraction(0)
        else:
            p = _ratio(tp, tp + fp, f"precision of {name}", warnings)
            r = _ratio(tp, support, f"recall of {name}", warnings)
        precision += support * p
        recall += support * r
        scores.append(
            ClassScores(
                name=name,
                precision=float(p),
                recall=float(r),
                support=support,
                tp=tp,
                fp=fp,
                fn=fn,
                tn=tn,
            )
        )
    if warnings:
        logger.warning(f"Zero denominators set to 0: {warnings}")
    return AprReport(
        accuracy=float(Fraction(matrix.trace, total)),
        precision=float(precision / total),
        recall=float(recall / total),
        per_class=scores,
        warnings=warnings,
    )


def collapse_binary(
    matrix: ConfusionMatrix, normal: str = NORMAL
) -> ConfusionMatrix:
    """Fold every attack class into one `anomaly` class.

    Examples:
        >>> m = ConfusionMatrix(
        ...     classes=["normal", "ddos", "xss"],
        ...     counts=[[5, 1, 0], [0, 4, 0], [2, 0, 8]],
        ... )
        >>> collapse_binary(m).counts
        [[5, 1], [2, 12]]
    """
    if normal not in matrix.classes:
        raise DataError(f"No {normal!r} class in {matrix.classes}")
    tp, fp, fn, tn = matrix.one_vs_rest(matrix.classes.index(normal))
    return ConfusionMatrix(
        classes=[normal, ANOMALY], counts=[[tp, fn], [fp, tn]]
    )


def install_gate(lock: Any):
    """Replace the measurement gate, e.g. with a lock shared by the workers
    of a process pool."""
    global _gate
    _gate = lock


def timed(fn: Callable[..., T], *args, **kwargs) -> tuple[T, float]:
    """Run `fn` alone behind the measurement gate; return its result and
    the wall-clock seconds it took."""
    with _gate:
        start = time.perf_counter()
        result = fn(*args, **kwargs)
        elapsed = time.perf_counter() - start
    return result, elapsed
