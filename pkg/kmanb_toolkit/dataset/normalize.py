import numpy as np
from pydantic import BaseModel, root_validator

from kmanb_toolkit.errors import DataError, SchemaError

from .records import Dataset


class FeatureBounds(BaseModel):
    min: float
    max: float

    @root_validator(skip_on_failure=True)
    def min_not_above_max(cls, values):
        if values["min"] > values["max"]:
            raise ValueError(f"min > max in {values=}")
        return values

    def scale(self, x: np.ndarray) -> np.ndarray:
        """Map onto [0, 1]; values outside the fitted range are clamped and a
        constant feature maps to 0.

        Examples:
            >>> b = FeatureBounds(min=2, max=10)
            >>> b.scale(np.array([2.0, 6.0, 10.0, 12.0])).tolist()
            [0.0, 0.5, 1.0, 1.0]
            >>> flat = FeatureBounds(min=5, max=5)
            >>> flat.scale(np.array([5.0, 9.0])).tolist()
            [0.0, 0.0]
        """
        width = self.max - self.min
        if width == 0:
            return np.zeros_like(x, dtype=np.float64)
        return np.clip((x - self.min) / width, 0.0, 1.0)


class NormalizationParams(BaseModel):
    """Observed range of every numeric (and timestamp) feature of the
    training split, keyed by feature name in profile order."""

    device: str
    bounds: dict[str, FeatureBounds]


def normalize_fit(data: Dataset) -> NormalizationParams:
    if not len(data):
        raise DataError("Cannot fit normalization on an empty dataset.")
    bounds = {}
    for feature in data.profile.features:
        if feature.is_categorical:
            continue
        col = data.column(feature.name)
        bounds[feature.name] = FeatureBounds(
            min=float(col.min()), max=float(col.max())
        )
    return NormalizationParams(device=data.profile.device, bounds=bounds)


def normalize_apply(params: NormalizationParams, data: Dataset) -> Dataset:
    """Min-max scale the numeric columns of `data` with the fitted `params`;
    categorical columns pass through untouched."""
    numeric = [f.name for f in data.profile.features if not f.is_categorical]
    if params.device != data.profile.device or set(numeric) != set(
        params.bounds
    ):
        raise SchemaError(
            f"Params for {params.device} {list(params.bounds)} do not fit"
            f" {data.profile.device} {numeric}"
        )
    frame = data.frame.copy()
    for name in numeric:
        frame[name] = params.bounds[name].scale(data.column(name))
    return data.with_frame(frame)
