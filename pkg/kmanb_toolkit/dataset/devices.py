from enum import Enum
from functools import cache
from pathlib import Path

import yaml
from loguru import logger
from pydantic import BaseModel, Field

from kmanb_toolkit.errors import SchemaError

from .profile import DeviceProfile, FeatureSchema


class Scale(str, Enum):
    """The two file families of the telemetry release: the smaller
    `train_test` proof-of-concept files and the larger `processed` ones."""

    train_test = "train_test"
    processed = "processed"


class SynthHint(BaseModel):
    center: float = 0.0
    spread: float = Field(1.0, gt=0)


class FeatureSpec(FeatureSchema):
    center: float | None = None
    spread: float | None = Field(None, gt=0)

    @property
    def schema_only(self) -> FeatureSchema:
        keys = {"name", "kind", "categories", "aliases"}
        return FeatureSchema(**self.dict(include=keys))

    @property
    def hint(self) -> SynthHint:
        return SynthHint(
            center=self.center or 0.0,
            spread=self.spread or 1.0,
        )


class DeviceSpec(BaseModel):
    """One entry of the packaged `devices.yaml`."""

    device: str
    features: list[FeatureSpec]
    attack_types: list[str]
    counts: dict[Scale, dict[str, int]]

    @property
    def profile(self) -> DeviceProfile:
        return DeviceProfile(
            device=self.device,
            features=[f.schema_only for f in self.features],
            attack_types=self.attack_types,
        )

    @property
    def hints(self) -> dict[str, SynthHint]:
        return {f.name: f.hint for f in self.features}


def get_devices_file(
    local_file: Path = Path(__file__).parent / "devices.yaml",
) -> Path:
    """Return the path to the `local_file` (*.yaml) listing every device
    profile with its class counts.

    Examples:
        >>> get_devices_file().name
        'devices.yaml'
    """
    if not local_file.exists():
        raise SchemaError(f"Missing device list {local_file=}")
    return local_file


@cache
def _device_specs() -> dict[str, DeviceSpec]:
    logger.debug("Reading packaged device list.")
    raw = yaml.safe_load(get_devices_file().read_bytes())
    return {item["device"]: DeviceSpec(**item) for item in raw}


def list_devices() -> list[str]:
    """Names of the seven profiled devices, in file order.

    Examples:
        >>> list_devices()[:3]
        ['fridge', 'garage_door', 'gps_tracker']
        >>> len(list_devices())
        7
    """
    return list(_device_specs())


def device_spec(name: str) -> DeviceSpec:
    specs = _device_specs()
    key = name.strip().casefold().replace("-", "_").replace(" ", "_")
    if key not in specs:
        raise SchemaError(f"Unknown device {name!r}; known: {list(specs)}")
    return specs[key]


def load_device(name: str) -> DeviceProfile:
    """Profile of a named device.

    Examples:
        >>> load_device("fridge").columns
        ['date', 'time', 'fridge_temperature', 'temp_condition']
        >>> len(load_device("garage door").attack_types)
        7
    """
    return device_spec(name).profile


def device_counts(
    name: str, scale: Scale = Scale.train_test
) -> dict[str, int]:
    """Per-class row counts of the named device's file family.

    Examples:
        >>> sum(device_counts("fridge").values())
        59944
        >>> device_counts("thermostat")["scanning"]
        61
    """
    return dict(device_spec(name).counts[Scale(scale)])
