from collections.abc import Iterable, Iterator, Sequence
from dataclasses import dataclass
from enum import Enum
from typing import Any, NamedTuple, Self

import numpy as np
import pandas as pd

from kmanb_toolkit.errors import DataError, SchemaError

from .profile import (
    LABEL_COLUMN,
    NORMAL,
    TYPE_COLUMN,
    DeviceProfile,
    FeatureSchema,
)


class Label(str, Enum):
    """The binary tag of a row; files carry it as `0` / `1`.

    Examples:
        >>> Label.from_cell(" 1 ")
        <Label.anomaly: 'anomaly'>
        >>> Label.from_cell("normal")
        <Label.normal: 'normal'>
        >>> Label.normal.code
        0
    """

    normal = "normal"
    anomaly = "anomaly"

    @classmethod
    def from_cell(cls, text: str) -> Self:
        match text.strip().casefold():
            case "0" | "normal":
                return cls.normal
            case "1" | "anomaly":
                return cls.anomaly
        raise ValueError(f"Not a 0/1 label: {text!r}")

    @classmethod
    def of(cls, attack_type: str) -> Self:
        return cls.normal if attack_type == NORMAL else cls.anomaly

    @property
    def code(self) -> int:
        return 0 if self is Label.normal else 1


class Target(str, Enum):
    """Which column a classifier learns: the attack type or the 0/1 label."""

    attack_type = "type"
    label = "label"


class Instance(NamedTuple):
    values: tuple[Any, ...]
    label: Label
    attack_type: str


@dataclass(frozen=True, eq=False)
class Dataset:
    """Rows of device telemetry held in a `pandas.DataFrame` whose columns are
    the profile's features followed by `label` and `type`.

    A Dataset is never mutated in place: every transformation returns a new
    instance over a new frame.
    """

    profile: DeviceProfile
    frame: pd.DataFrame

    def __post_init__(self):
        expected = [*self.profile.columns, LABEL_COLUMN, TYPE_COLUMN]
        if list(self.frame.columns) != expected:
            raise SchemaError(
                f"Frame columns {list(self.frame.columns)} != {expected}"
            )

    @classmethod
    def from_columns(
        cls,
        profile: DeviceProfile,
        columns: dict[str, Sequence],
        attack_types: Sequence[str],
    ) -> Self:
        """Build from per-feature value sequences; labels follow the attack
        types."""
        data: dict[str, Any] = {}
        for feature in profile.features:
            values = columns[feature.name]
            if feature.is_categorical:
                data[feature.name] = pd.Series(values, dtype=object)
            else:
                data[feature.name] = pd.Series(values, dtype=np.float64)
        types = pd.Series(attack_types, dtype=object)
        data[LABEL_COLUMN] = types.map(lambda t: Label.of(t).value)
        data[TYPE_COLUMN] = types
        return cls(profile=profile, frame=pd.DataFrame(data))

    @classmethod
    def from_instances(
        cls, profile: DeviceProfile, instances: Iterable[Instance]
    ) -> Self:
        rows = list(instances)
        columns = {
            f.name: [row.values[idx] for row in rows]
            for idx, f in enumerate(profile.features)
        }
        for row in rows:
            if row.label != Label.of(row.attack_type):
                raise DataError(f"Label/type disagree in {row=}")
        return cls.from_columns(
            profile, columns, [row.attack_type for row in rows]
        ).validate()

    def __len__(self) -> int:
        return len(self.frame)

    def __iter__(self) -> Iterator[Instance]:
        features = self.frame[self.profile.columns].itertuples(
            index=False, name=None
        )
        labels = self.frame[LABEL_COLUMN]
        types = self.frame[TYPE_COLUMN]
        for values, label, attack in zip(features, labels, types):
            yield Instance(tuple(values), Label(label), attack)

    def instance(self, idx: int) -> Instance:
        row = self.frame.iloc[idx]
        return Instance(
            values=tuple(row[c] for c in self.profile.columns),
            label=Label(row[LABEL_COLUMN]),
            attack_type=row[TYPE_COLUMN],
        )

    @property
    def attack_types(self) -> np.ndarray:
        return self.frame[TYPE_COLUMN].to_numpy(dtype=object)

    @property
    def labels(self) -> np.ndarray:
        return self.frame[LABEL_COLUMN].to_numpy(dtype=object)

    def targets(self, target: Target) -> np.ndarray:
        if Target(target) is Target.label:
            return self.labels
        return self.attack_types

    def target_classes(self, target: Target) -> list[str]:
        """Global class order for `target`, whether or not each is present."""
        if Target(target) is Target.label:
            return [Label.normal.value, Label.anomaly.value]
        return self.profile.classes

    def column(self, name: str) -> np.ndarray:
        feature = self.profile.feature(name)
        series = self.frame[name]
        if feature.is_categorical:
            return series.to_numpy(dtype=object)
        return series.to_numpy(dtype=np.float64)

    def class_counts(self) -> dict[str, int]:
        counts = self.frame[TYPE_COLUMN].value_counts()
        return {c: int(counts[c]) for c in self.profile.classes if c in counts}

    def take(self, indices: Sequence[int] | np.ndarray) -> Self:
        frame = self.frame.iloc[np.asarray(indices, dtype=np.int64)]
        return Dataset(self.profile, frame.reset_index(drop=True))

    def with_frame(
        self, frame: pd.DataFrame, profile: DeviceProfile | None = None
    ) -> Self:
        return Dataset(profile or self.profile, frame)

    def with_feature(self, feature: FeatureSchema, values: Sequence) -> Self:
        """Append a feature column just before the label columns."""
        profile = self.profile.with_feature(feature)
        frame = self.frame[self.profile.columns].copy()
        frame[feature.name] = pd.Series(
            values, dtype=object if feature.is_categorical else np.float64
        ).to_numpy()
        frame[LABEL_COLUMN] = self.frame[LABEL_COLUMN].to_numpy()
        frame[TYPE_COLUMN] = self.frame[TYPE_COLUMN].to_numpy()
        return Dataset(profile, frame)

    def without_feature(self, name: str) -> Self:
        profile = self.profile.without_feature(name)
        return Dataset(profile, self.frame.drop(columns=[name]))

    def compact(self) -> Self:
        """Restrict every category set to the values observed here, keeping
        the profile's order. Models fitted on the result carry no category
        knowledge from any other split."""
        profile = self.profile
        for feature in self.profile.features:
            if not feature.is_categorical:
                continue
            seen = set(self.frame[feature.name].unique())
            kept = [c for c in feature.categories if c in seen]
            profile = profile.replace_feature(
                feature.copy(update={"categories": kept})
            )
        return Dataset(profile, self.frame)

    def validate(self) -> Self:
        """Check the dataset-level invariants; returns self for chaining."""
        for feature in self.profile.features:
            if not feature.is_categorical:
                continue
            col = self.frame[feature.name]
            if bad := sorted(set(col[~col.isin(feature.categories)])):
                raise DataError(
                    f"{feature.name}: values {bad} outside categories"
                    f" {feature.categories}"
                )
        types = self.frame[TYPE_COLUMN]
        if unknown := sorted(set(types[~types.isin(self.profile.classes)])):
            raise DataError(
                f"Unknown attack types {unknown}; allowed:"
                f" {self.profile.classes}"
            )
        expected = np.where(
            types.to_numpy() == NORMAL, Label.normal.value, Label.anomaly.value
        )
        mismatch = np.flatnonzero(
            self.frame[LABEL_COLUMN].to_numpy() != expected
        )
        if mismatch.size:
            raise DataError(
                f"label/type disagree on rows {mismatch[:5].tolist()}"
            )
        return self
