from collections.abc import Sequence
from pathlib import Path

import numpy as np
import pandas as pd
from loguru import logger
from pydantic import BaseModel, Field, validator

from kmanb_toolkit.dataset import Dataset
from kmanb_toolkit.dataset.profile import RESERVED_COLUMNS
from kmanb_toolkit.errors import DataError, SchemaError

DEFAULT_BINS = 10


def equal_frequency_codes(values: np.ndarray, bins: int) -> np.ndarray:
    """Bin index of each value using quantile edges; repeated edges merge.

    Examples:
        >>> equal_frequency_codes(np.arange(10.0), 2).tolist()
        [0, 0, 0, 0, 0, 1, 1, 1, 1, 1]
        >>> equal_frequency_codes(np.ones(4), 10).tolist()
        [0, 0, 0, 0]
    """
    edges = np.quantile(values, np.linspace(0, 1, bins + 1))
    inner = np.unique(edges[1:-1])
    return np.searchsorted(inner, values, side="right")


def _entropy(counts: np.ndarray) -> float:
    p = counts[counts > 0] / counts.sum()
    return float(-(p * np.log(p)).sum())


def symmetric_uncertainty(
    values: Sequence | np.ndarray,
    labels: Sequence | np.ndarray,
    bins: int = DEFAULT_BINS,
    categorical: bool | None = None,
) -> float:
    """`2 * I(X; Y) / (H(X) + H(Y))` with natural-log entropies; numeric
    values are first cut into `bins` equal-frequency bins. Returns 0 when
    both entropies vanish.

    Examples:
        >>> symmetric_uncertainty(["a", "b", "a"], ["x", "y", "x"])
        1.0
        >>> su = symmetric_uncertainty(["a", "a", "b", "b"], list("xyxy"))
        >>> round(su, 12)
        0.0
        >>> symmetric_uncertainty([5.0, 5.0, 5.0], ["x", "y", "x"])
        0.0
    """
    x, y = np.asarray(values), np.asarray(labels, dtype=object)
    if x.shape != y.shape:
        raise DataError(f"{x.size} values against {y.size} labels.")
    if not x.size:
        raise DataError("Symmetric uncertainty needs at least one value.")
    if bins < 1:
        raise DataError(f"{bins=} must be positive.")
    if categorical is None:
        categorical = not np.issubdtype(x.dtype, np.number)
    if categorical:
        _, x_codes = np.unique(x.astype(str), return_inverse=True)
    else:
        x_codes = equal_frequency_codes(x.astype(np.float64), bins)
    _, y_codes = np.unique(y.astype(str), return_inverse=True)
    joint = np.zeros((x_codes.max() + 1, y_codes.max() + 1))
    np.add.at(joint, (x_codes, y_codes), 1.0)
    h_x = _entropy(joint.sum(axis=1))
    h_y = _entropy(joint.sum(axis=0))
    if h_x + h_y == 0:
        return 0.0
    su = 2 * (1 - _entropy(joint.ravel()) / (h_x + h_y))
    return float(np.clip(su, 0.0, 1.0))


class FeatureScore(BaseModel):
    feature: str
    score: float = Field(..., ge=0, le=1)


class FeatureRanking(BaseModel):
    """Features by descending symmetric uncertainty against the attack type;
    equal scores keep the profile's column order."""

    scores: list[FeatureScore]
    bins: int = DEFAULT_BINS

    @validator("scores")
    def descending(cls, v: list[FeatureScore]):
        if any(a.score < b.score for a, b in zip(v, v[1:])):
            raise ValueError("Scores must be sorted in descending order.")
        return v

    @property
    def top(self) -> str:
        if not self.scores:
            raise SchemaError("An empty ranking has no top feature.")
        return self.scores[0].feature

    @property
    def names(self) -> list[str]:
        return [s.feature for s in self.scores]

    def as_csv(self) -> str:
        frame = pd.DataFrame(
            [(s.feature, repr(s.score)) for s in self.scores],
            columns=["feature", "score"],
        )
        return frame.to_csv(index=False, lineterminator="\n")

    def write(self, path: Path | str) -> Path:
        """`.json` paths get the JSON form, everything else the csv."""
        path = Path(path)
        as_json = path.suffix == ".json"
        text = self.json(indent=2) if as_json else self.as_csv()
        path.write_text(text)
        return path


def rank_features(
    data: Dataset, bins: int = DEFAULT_BINS
) -> FeatureRanking:
    if not len(data):
        raise DataError("Cannot rank features of an empty dataset.")
    labels = data.attack_types
    scored = [
        FeatureScore(
            feature=f.name,
            score=symmetric_uncertainty(
                data.column(f.name), labels, bins, f.is_categorical
            ),
        )
        for f in data.profile.features
    ]
    ranked = sorted(scored, key=lambda s: -s.score)
    logger.debug(f"Ranked {data.profile.device}: {ranked[:1]}")
    return FeatureRanking(scores=ranked, bins=bins)


def drop_feature(data: Dataset, name: str) -> Dataset:
    """Remove one feature column from the schema and every row.

    Examples:
        >>> from kmanb_toolkit.dataset import synthesize, load_device
        >>> d = synthesize(load_device("fridge"), {"normal": 3})
        >>> drop_feature(d, "date").profile.columns
        ['time', 'fridge_temperature', 'temp_condition']
    """
    if name in RESERVED_COLUMNS:
        raise SchemaError(f"Cannot drop label column {name!r}.")
    return data.without_feature(name)
