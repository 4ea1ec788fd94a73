from pathlib import Path

import pytest

from kmanb_toolkit import Dataset, DeviceProfile, load_device, synthesize

SMALL_FRIDGE = {
    "normal": 120,
    "password": 30,
    "xss": 20,
    "ddos": 30,
    "ransomware": 20,
    "injection": 30,
    "backdoor": 30,
}


@pytest.fixture
def fridge() -> DeviceProfile:
    return load_device("fridge")


@pytest.fixture
def small_fridge(fridge) -> Dataset:
    return synthesize(fridge, SMALL_FRIDGE, seed=7)


@pytest.fixture
def toy_profile() -> DeviceProfile:
    return DeviceProfile(
        device="toy",
        features=[
            {"name": "x", "kind": "numeric"},
            {"name": "c", "kind": "nominal", "categories": ["high", "low"]},
        ],
        attack_types=["ddos"],
    )


@pytest.fixture
def toy(toy_profile) -> Dataset:
    return Dataset.from_columns(
        toy_profile,
        {
            "x": [0.0, 0.2, 0.1, 5.0, 5.3, 4.9],
            "c": ["low", "low", "high", "high", "high", "low"],
        },
        ["normal", "normal", "normal", "ddos", "ddos", "ddos"],
    )


@pytest.fixture
def fridge_csv(shared_datadir) -> Path:
    return shared_datadir / "fridge_sample.csv"


@pytest.fixture(autouse=True)
def log_dir(tmp_path, monkeypatch):
    """Keep log files written by the cli inside the test's own folder."""
    monkeypatch.setenv("KMANB_LOG_DIR", str(tmp_path / "logs"))
    monkeypatch.setenv("KMANB_LOG_SERIALIZE", "false")
    return tmp_path / "logs"
