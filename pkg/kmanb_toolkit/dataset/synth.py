import datetime
from collections.abc import Mapping
from enum import Enum

import numpy as np
from loguru import logger

from kmanb_toolkit.errors import DataError, SchemaError

from .devices import (
    Scale,
    SynthHint,
    device_counts,
    device_spec,
    list_devices,
)
from .profile import DeviceProfile, FeatureKind, FeatureSchema
from .records import Dataset

DAY_SECONDS = 86_400
BASE_DATE = datetime.date(2019, 4, 1)
DOMINANT_SHARE = (0.95, 0.98)


class DateMode(str, Enum):
    """How synthetic `date` cells relate to the class.

    `per_class` logs every class on its own calendar day so that the date
    alone identifies the class; `shared` draws dates independently of it.
    """

    per_class = "per_class"
    shared = "shared"


def date_label(offset: int) -> str:
    """Dates are written the way the telemetry files write them.

    Examples:
        >>> date_label(0)
        '1-Apr-19'
        >>> date_label(30)
        '1-May-19'
    """
    d = BASE_DATE + datetime.timedelta(days=offset)
    return f"{d.day}-{d:%b-%y}"


def default_hints(device: str) -> dict[str, SynthHint]:
    if device in list_devices():
        return device_spec(device).hints
    return {}


def _draw(
    rng: np.random.Generator,
    feature: FeatureSchema,
    hint: SynthHint,
    position: int,
    n_classes: int,
    size: int,
    separation: float,
    date: str,
    dates: np.ndarray,
    date_mode: DateMode,
) -> np.ndarray:
    match feature.kind:
        case FeatureKind.numeric:
            offset = separation * (position - (n_classes - 1) / 2)
            mean = hint.center + hint.spread * offset
            return np.round(rng.normal(mean, hint.spread, size), 4)
        case FeatureKind.timestamp:
            sigma = DAY_SECONDS / ((n_classes - 1) * separation + 8)
            mean = 4 * sigma + position * separation * sigma
            drawn = np.rint(rng.normal(mean, sigma, size))
            return np.clip(drawn, 0, DAY_SECONDS - 1)
        case FeatureKind.datestamp:
            if date_mode is DateMode.per_class:
                return np.full(size, date, dtype=object)
            return dates[rng.integers(0, dates.size, size)]
    cats = np.array(feature.categories, dtype=object)
    dominant = position % cats.size
    if cats.size == 1:
        return np.full(size, cats[0], dtype=object)
    keep = rng.random(size) < rng.uniform(*DOMINANT_SHARE)
    other = rng.integers(0, cats.size - 1, size)
    other = other + (other >= dominant)
    return cats[np.where(keep, dominant, other)]


def synthesize(
    profile: DeviceProfile,
    counts: Mapping[str, int],
    seed: int = 42,
    separation: float = 6.0,
    date_mode: DateMode = DateMode.per_class,
    hints: Mapping[str, SynthHint] | None = None,
) -> Dataset:
    """Generate a dataset shaped like `profile` with exactly `counts` rows
    per class.

    Every class owns a lattice position per feature (a seeded permutation,
    drawn independently for each feature):

    kind | per-class signature
    --:|:--
    numeric | Gaussian, means `separation` spreads apart around `center`
    timestamp | Gaussian seconds-since-midnight packed inside one day
    datestamp | see `DateMode`
    nominal | one dominant category holding 95-98% of the class's rows

    Rows are shuffled with the same seeded generator.

    Examples:
        >>> from kmanb_toolkit.dataset.devices import load_device
        >>> d = synthesize(load_device("fridge"), {"normal": 10}, seed=1)
        >>> len(d), d.class_counts()
        (10, {'normal': 10})
    """
    if separation < 0:
        raise DataError(f"{separation=} must be >= 0")
    if unknown := sorted(set(counts) - set(profile.classes)):
        raise DataError(
            f"Unknown classes {unknown}; allowed: {profile.classes}"
        )
    if negative := {k: v for k, v in counts.items() if v < 0}:
        raise DataError(f"Negative counts {negative}")
    for feature in profile.features:
        if feature.kind is FeatureKind.nominal and not feature.categories:
            raise SchemaError(f"Nominal {feature.name} lists no categories.")

    date_mode = DateMode(date_mode)
    hints = default_hints(profile.device) if hints is None else hints
    rng = np.random.default_rng(seed)
    classes = profile.classes
    n = len(classes)
    sizes = [int(counts.get(c, 0)) for c in classes]
    dates = np.array([date_label(i) for i in range(n)], dtype=object)

    columns: dict[str, np.ndarray] = {}
    features: list[FeatureSchema] = []
    for feature in profile.features:
        positions = rng.permutation(n)
        hint = hints.get(feature.name, SynthHint())
        parts = [
            _draw(
                rng,
                feature,
                hint,
                int(positions[i]),
                n,
                sizes[i],
                separation,
                dates[i],
                dates,
                date_mode,
            )
            for i in range(n)
        ]
        columns[feature.name] = np.concatenate(parts)
        if feature.kind is FeatureKind.datestamp:
            feature = feature.with_categories(dates.tolist())
        features.append(feature)

    types = np.repeat(np.array(classes, dtype=object), sizes)
    order = rng.permutation(types.size)
    logger.debug(f"Synthesized {types.size} {profile.device} rows, {seed=}")
    return Dataset.from_columns(
        profile.copy(update={"features": features}),
        {name: col[order] for name, col in columns.items()},
        types[order],
    ).validate()


def synthesize_device(
    name: str,
    scale: Scale = Scale.train_test,
    seed: int = 42,
    separation: float = 6.0,
    date_mode: DateMode = DateMode.per_class,
) -> Dataset:
    """Synthesize a registered device at the class counts of `scale`."""
    spec = device_spec(name)
    return synthesize(
        spec.profile,
        device_counts(name, scale),
        seed=seed,
        separation=separation,
        date_mode=date_mode,
        hints=spec.hints,
    )
