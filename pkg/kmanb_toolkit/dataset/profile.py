import re
from enum import Enum
from typing import Self

from pydantic import BaseModel, Field, root_validator, validator
from unidecode import unidecode

from kmanb_toolkit.errors import SchemaError

LABEL_COLUMN = "label"
TYPE_COLUMN = "type"
NORMAL = "normal"
RESERVED_COLUMNS = (LABEL_COLUMN, TYPE_COLUMN)


def fold_name(text: str) -> str:
    """Header names are matched case-insensitively, ignoring separators.

    Examples:
        >>> fold_name("Fridge_Temperature")
        'fridgetemperature'
        >>> fold_name("tempera- ture")
        'temperature'
    """
    return re.sub(r"[\W_]+", "", unidecode(text).casefold())


class FeatureKind(str, Enum):
    """How a column of device telemetry is read and modelled.

    kind | read as | modelled as
    --:|:--|:--
    numeric | float | Gaussian / distance coordinate
    nominal | string category | categorical / one-hot block
    datestamp | string category | categorical / one-hot block
    timestamp | seconds since midnight | Gaussian / distance coordinate
    """

    numeric = "numeric"
    nominal = "nominal"
    datestamp = "datestamp"
    timestamp = "timestamp"

    @property
    def is_categorical(self) -> bool:
        return self in (FeatureKind.nominal, FeatureKind.datestamp)


class FeatureSchema(BaseModel):
    name: str = Field(..., min_length=1)
    kind: FeatureKind
    categories: list[str] = Field(
        default_factory=list,
        description="Ordered category set; only nominal-like features.",
    )
    aliases: list[str] = Field(
        default_factory=list,
        description="Alternative header spellings seen in the wild.",
    )

    @validator("categories")
    def categories_unique(cls, v):
        if len(set(v)) != len(v):
            raise ValueError(f"Duplicate categories in {v=}")
        return v

    @root_validator(skip_on_failure=True)
    def categories_only_when_categorical(cls, values):
        if values["categories"] and not values["kind"].is_categorical:
            raise ValueError(f"{values['name']} is not categorical.")
        return values

    @property
    def is_categorical(self) -> bool:
        return self.kind.is_categorical

    def matches(self, header: str) -> bool:
        return fold_name(header) in {
            fold_name(n) for n in (self.name, *self.aliases)
        }

    def with_categories(self, values: list[str]) -> Self:
        """Grow the category set with unseen `values`, first appearance
        order, keeping the existing order intact."""
        extra = [v for v in dict.fromkeys(values) if v not in self.categories]
        if not extra:
            return self
        return self.copy(update={"categories": self.categories + extra})


class DeviceProfile(BaseModel):
    """A device's telemetry schema, excluding the two label columns.

    Field | Type | Description
    --:|:--|:--
    device | str | e.g. `fridge`, `garage_door`
    features | list[FeatureSchema] | column order of the telemetry
    attack_types | list[str] | anomaly classes, never `normal`

    Examples:
        >>> p = DeviceProfile(
        ...     device="toy",
        ...     features=[FeatureSchema(name="x", kind="numeric")],
        ...     attack_types=["ddos"],
        ... )
        >>> p.classes
        ['normal', 'ddos']
        >>> p.columns
        ['x']
    """

    device: str
    features: list[FeatureSchema]
    attack_types: list[str] = Field(default_factory=list)

    @validator("attack_types", each_item=True)
    def attack_type_is_not_normal(cls, v: str):
        if v == NORMAL:
            raise ValueError("`normal` is not an attack type.")
        return v

    @validator("attack_types")
    def attack_types_unique(cls, v):
        if len(set(v)) != len(v):
            raise ValueError(f"Duplicate attack types in {v=}")
        return v

    @validator("features")
    def feature_names_unique(cls, v: list[FeatureSchema]):
        names = [f.name for f in v]
        if len(set(names)) != len(names):
            raise ValueError(f"Duplicate feature names in {names=}")
        if clash := set(names) & set(RESERVED_COLUMNS):
            raise ValueError(f"Reserved label column used as feature: {clash}")
        return v

    @property
    def columns(self) -> list[str]:
        return [f.name for f in self.features]

    @property
    def classes(self) -> list[str]:
        """Global class order: `normal` first, then the attack types."""
        return [NORMAL, *self.attack_types]

    def index(self, name: str) -> int:
        for idx, feature in enumerate(self.features):
            if feature.name == name:
                return idx
        raise SchemaError(f"No feature {name=} in {self.device} profile.")

    def feature(self, name: str) -> FeatureSchema:
        return self.features[self.index(name)]

    def with_feature(self, feature: FeatureSchema) -> Self:
        if feature.name in self.columns:
            raise SchemaError(f"Feature {feature.name!r} already present.")
        return self.copy(update={"features": [*self.features, feature]})

    def without_feature(self, name: str) -> Self:
        if name in RESERVED_COLUMNS:
            raise SchemaError(f"Cannot drop label column {name!r}.")
        idx = self.index(name)
        kept = self.features[:idx] + self.features[idx + 1 :]
        return self.copy(update={"features": kept})

    def replace_feature(self, feature: FeatureSchema) -> Self:
        idx = self.index(feature.name)
        swapped = [*self.features]
        swapped[idx] = feature
        return self.copy(update={"features": swapped})

    def same_schema(self, other: "DeviceProfile") -> bool:
        return self.device == other.device and [
            (f.name, f.kind) for f in self.features
        ] == [(f.name, f.kind) for f in other.features]
