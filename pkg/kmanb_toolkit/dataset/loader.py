import math
import re
from pathlib import Path

import pandas as pd
from dateutil.parser import ParserError, parse
from loguru import logger

from kmanb_toolkit.errors import DataError, RowError, SchemaError

from .profile import (
    LABEL_COLUMN,
    TYPE_COLUMN,
    DeviceProfile,
    FeatureKind,
    FeatureSchema,
)
from .records import Dataset, Label

TIME_PATTERN = re.compile(
    r"""
    ^\s*
    (?P<hour>\d{1,2})
    :
    (?P<minute>\d{2})
    (:(?P<second>\d{2}(\.\d+)?))?
    \s*$
    """,
    re.X,
)
BOOLEAN_PARTNER = {
    "true": "false",
    "false": "true",
    "on": "off",
    "off": "on",
    "0": "1",
    "1": "0",
}


def parse_seconds(text: str) -> float:
    """Seconds since midnight of a time-of-day cell.

    Examples:
        >>> parse_seconds("10:00:00")
        36000.0
        >>> parse_seconds(" 0:01:05")
        65.0
        >>> parse_seconds("1:30 PM")
        48600.0
    """
    if m := TIME_PATTERN.match(text):
        hour, minute = int(m["hour"]), int(m["minute"])
        if hour < 24 and minute < 60:
            return hour * 3600 + minute * 60 + float(m["second"] or 0)
    t = parse(text)
    return t.hour * 3600 + t.minute * 60 + t.second + t.microsecond / 1e6


def format_seconds(seconds: float) -> str:
    """Inverse of `parse_seconds()` for values written back to csv.

    Examples:
        >>> format_seconds(36000.0)
        '10:00:00'
        >>> format_seconds(65.5)
        '00:01:05.5'
    """
    whole = int(seconds)
    hour, rest = divmod(whole, 3600)
    minute, second = divmod(rest, 60)
    text = f"{hour:02d}:{minute:02d}:{second:02d}"
    if fraction := seconds - whole:
        text += repr(fraction).removeprefix("0")
    return text


def match_headers(
    headers: list[str], profile: DeviceProfile
) -> dict[str, str]:
    """Map each profile column (plus `label`, `type`) to its csv header."""
    wanted: list[FeatureSchema] = [
        *profile.features,
        FeatureSchema(name=LABEL_COLUMN, kind=FeatureKind.numeric),
        FeatureSchema(name=TYPE_COLUMN, kind=FeatureKind.nominal),
    ]
    mapping: dict[str, str] = {}
    for feature in wanted:
        found = [h for h in headers if feature.matches(h)]
        if not found:
            raise SchemaError(
                f"Missing column {feature.name!r} in header {headers}"
            )
        if len(found) > 1:
            raise SchemaError(f"Ambiguous headers {found} for {feature.name}")
        mapping[feature.name] = found[0]
    if extra := [h for h in headers if h not in mapping.values()]:
        logger.warning(f"Ignoring columns {extra} for {profile.device}")
    return mapping


def _read_numeric(cells: list[str], column: str) -> list[float]:
    values = []
    for row, cell in enumerate(cells):
        try:
            value = float(cell)
        except ValueError:
            raise RowError(row, column, f"not a number: {cell!r}")
        if not math.isfinite(value):
            raise RowError(row, column, f"not a finite number: {cell!r}")
        values.append(value)
    return values


def _read_seconds(cells: list[str], column: str) -> list[float]:
    values = []
    for row, cell in enumerate(cells):
        if not cell.strip():
            raise RowError(row, column, "blank time")
        try:
            values.append(parse_seconds(cell))
        except (ValueError, OverflowError, ParserError):
            raise RowError(row, column, f"not a time of day: {cell!r}")
    return values


def _read_categories(
    cells: list[str], feature: FeatureSchema
) -> tuple[list[str], FeatureSchema]:
    values = [cell.strip() for cell in cells]
    for row, value in enumerate(values):
        if not value:
            raise RowError(row, feature.name, "blank category")
    if feature.kind is FeatureKind.nominal and values:
        folded = [v.casefold() for v in values]
        if set(folded) <= set(BOOLEAN_PARTNER):
            values = folded
            seen = list(dict.fromkeys(folded))
            if len(seen) == 1 and len(feature.categories) < 2:
                seen.append(BOOLEAN_PARTNER[seen[0]])
            return values, feature.with_categories(seen)
    return values, feature.with_categories(values)


def load_csv(path: Path | str, profile: DeviceProfile) -> Dataset:
    """Read a device csv: one header row with the profile's columns plus
    `label` (0/1) and `type`.

    Coercions applied on load:

    1. `label` becomes `normal` / `anomaly`;
    2. `type` is lowercased;
    3. time cells become seconds since midnight;
    4. boolean-looking nominal cells (`true/false`, `on/off`, `0/1`) are
       lowercased into a two-category feature;
    5. unseen nominal values are appended to the feature's categories.
    """
    path = Path(path)
    if not path.is_file():
        raise DataError(f"No csv file at {path=}")
    try:
        raw = pd.read_csv(
            path,
            dtype=str,
            keep_default_na=False,
            na_filter=False,
            encoding="utf-8",
        )
    except pd.errors.EmptyDataError as e:
        raise SchemaError(f"No header row in {path=}") from e
    mapping = match_headers(list(raw.columns), profile)
    logger.info(f"Loading {len(raw)} rows of {profile.device} from {path}")

    columns: dict[str, list] = {}
    features: list[FeatureSchema] = []
    for feature in profile.features:
        cells = raw[mapping[feature.name]].tolist()
        match feature.kind:
            case FeatureKind.numeric:
                columns[feature.name] = _read_numeric(cells, feature.name)
            case FeatureKind.timestamp:
                columns[feature.name] = _read_seconds(cells, feature.name)
            case _:
                columns[feature.name], feature = _read_categories(
                    cells, feature
                )
        features.append(feature)

    labels = []
    for row, cell in enumerate(raw[mapping[LABEL_COLUMN]].tolist()):
        try:
            labels.append(Label.from_cell(cell))
        except ValueError as e:
            raise RowError(row, LABEL_COLUMN, str(e))

    allowed = profile.classes
    types = [cell.strip().casefold() for cell in raw[mapping[TYPE_COLUMN]]]
    for row, (label, attack) in enumerate(zip(labels, types)):
        if attack not in allowed:
            raise DataError(
                f"Row {row}: unknown attack type {attack!r}; allowed:"
                f" {allowed}"
            )
        if label != Label.of(attack):
            raise RowError(row, LABEL_COLUMN, f"{label.value} vs {attack=}")

    grown = profile.copy(update={"features": features})
    return Dataset.from_columns(grown, columns, types).validate()


def write_csv(data: Dataset, path: Path | str) -> Path:
    """Write `data` in the dialect `load_csv()` reads; loading the result
    reproduces every value."""
    path = Path(path)
    out: dict[str, pd.Series] = {}
    for feature in data.profile.features:
        col = data.frame[feature.name]
        match feature.kind:
            case FeatureKind.numeric:
                out[feature.name] = col.map(lambda v: repr(float(v)))
            case FeatureKind.timestamp:
                out[feature.name] = col.map(format_seconds)
            case _:
                out[feature.name] = col.astype(str)
    out[LABEL_COLUMN] = data.frame[LABEL_COLUMN].map(
        lambda v: str(Label(v).code)
    )
    out[TYPE_COLUMN] = data.frame[TYPE_COLUMN]
    frame = pd.DataFrame(out)
    frame.to_csv(path, index=False, lineterminator="\n")
    logger.info(f"Wrote {len(frame)} rows to {path}")
    return path
