from collections.abc import Sequence
from typing import Self

import numpy as np
import pandas as pd
from pydantic import BaseModel

from kmanb_toolkit.dataset import Dataset, DeviceProfile, Instance
from kmanb_toolkit.errors import SchemaError


class EncodedFeature(BaseModel):
    name: str
    categorical: bool
    categories: list[str] = []

    @property
    def width(self) -> int:
        return len(self.categories) if self.categorical else 1

    def block(self, values: Sequence | np.ndarray) -> np.ndarray:
        """Numeric values pass through as one column; a categorical value
        becomes a one-hot row over the fitted categories, all zeros when the
        value was never seen at fit time.

        Examples:
            >>> f = EncodedFeature(
            ...     name="c", categorical=True, categories=["high", "low"]
            ... )
            >>> f.block(["high", "mild"]).tolist()
            [[1.0, 0.0], [0.0, 0.0]]
        """
        if not self.categorical:
            return np.asarray(values, dtype=np.float64).reshape(-1, 1)
        codes = category_codes(values, self.categories)
        out = np.zeros((codes.size, len(self.categories)), dtype=np.float64)
        hit = np.flatnonzero(codes >= 0)
        out[hit, codes[hit]] = 1.0
        return out


def category_codes(
    values: Sequence | np.ndarray, categories: list[str]
) -> np.ndarray:
    """Position of each value within `categories`; `-1` when absent."""
    cat = pd.Categorical(np.asarray(values, dtype=object), categories)
    return np.asarray(cat.codes, dtype=np.int64)


class FeatureEncoder(BaseModel):
    """The numeric space shared by k-means and KNN: the profile's columns in
    order, categorical ones expanded to one-hot blocks over the category
    sets known when the encoder was built."""

    features: list[EncodedFeature]

    @classmethod
    def from_profile(cls, profile: DeviceProfile) -> Self:
        return cls(
            features=[
                EncodedFeature(
                    name=f.name,
                    categorical=f.is_categorical,
                    categories=f.categories if f.is_categorical else [],
                )
                for f in profile.features
            ]
        )

    @property
    def feature_columns(self) -> list[str]:
        return [f.name for f in self.features]

    @property
    def width(self) -> int:
        return sum(f.width for f in self.features)

    def check(self, profile: DeviceProfile):
        theirs = [(f.name, f.is_categorical) for f in profile.features]
        ours = [(f.name, f.categorical) for f in self.features]
        if theirs != ours:
            raise SchemaError(f"Encoded columns {ours} do not fit {theirs}")

    def encode(self, instance: Instance) -> np.ndarray:
        """One instance as a vector of length `width`.

        Examples:
            >>> enc = FeatureEncoder(
            ...     features=[
            ...         {"name": "x", "categorical": False},
            ...         {"name": "c", "categorical": True,
            ...          "categories": ["high", "low"]},
            ...     ]
            ... )
            >>> enc.encode(Instance((0.5, "high"), "normal", "normal"))
            array([0.5, 1. , 0. ])
        """
        if len(instance.values) != len(self.features):
            raise SchemaError(
                f"{len(instance.values)} values for {self.feature_columns}"
            )
        pairs = zip(self.features, instance.values)
        blocks = [f.block([value]) for f, value in pairs]
        return np.hstack(blocks).ravel() if blocks else np.zeros(0)

    def encode_many(self, data: Dataset) -> np.ndarray:
        """Every row of `data` as an `(n, width)` matrix."""
        self.check(data.profile)
        frame = data.frame
        blocks = [f.block(frame[f.name].to_numpy()) for f in self.features]
        if not blocks:
            return np.zeros((len(data), 0))
        return np.hstack(blocks)
