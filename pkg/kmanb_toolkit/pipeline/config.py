import zlib
from enum import Enum
from pathlib import Path
from typing import Any

import numpy as np
import yaml
from pydantic import BaseModel, Field, root_validator, validator

from kmanb_toolkit.dataset import DateMode, Scale, Target, device_spec
from kmanb_toolkit.errors import SchemaError
from kmanb_toolkit.models import KMeansInit

DEFAULT_SPLIT = 0.7


class Algorithm(str, Enum):
    """Learners an experiment can run; `rank` orders report columns the
    way the published comparison tables do."""

    kmanb = "kmanb"
    nb = "nb"
    knn = "knn"
    rf = "rf"

    @property
    def title(self) -> str:
        return {
            "kmanb": "KMANB",
            "nb": "Naive Bayes",
            "knn": "KNN",
            "rf": "Random Forest",
        }[self.value]

    @property
    def rank(self) -> int:
        return ["rf", "nb", "knn", "kmanb"].index(self.value)


class ReportFormat(str, Enum):
    json = "json"
    csv = "csv"
    md = "md"

    @classmethod
    def from_text(cls, text: str) -> "ReportFormat":
        """Accepts `markdown` as another name for `md`.

        Examples:
            >>> ReportFormat.from_text("Markdown")
            <ReportFormat.md: 'md'>
        """
        key = text.strip().lower()
        return cls.md if key == "markdown" else cls(key)

    @classmethod
    def from_path(cls, path: Path) -> "ReportFormat":
        """Format named by the suffix of `path`, json when unrecognized.

        Examples:
            >>> ReportFormat.from_path(Path("out/fridge.md"))
            <ReportFormat.md: 'md'>
            >>> ReportFormat.from_path(Path("out/fridge.txt"))
            <ReportFormat.json: 'json'>
        """
        try:
            return cls.from_text(path.suffix.lstrip("."))
        except ValueError:
            return cls.json


class SynthSource(BaseModel):
    """Generate a split instead of reading one; `seed` falls back to the
    experiment seed. `fraction` shrinks every class count (never below 2)
    for quick runs."""

    scale: Scale = Scale.train_test
    fraction: float = Field(1.0, gt=0, le=1)
    separation: float = Field(6.0, ge=0)
    seed: int | None = None
    date_mode: DateMode = DateMode.per_class


Source = SynthSource | Path


class ExperimentConfig(BaseModel):
    """One cell of a comparison: a device, a learner and its data.

    Field | Type | Description
    --:|:--|:--
    device | str | registered device name
    algorithm | Algorithm | `kmanb`, `nb`, `knn` or `rf`
    train | Path or SynthSource | csv path or generator settings
    test | Path or SynthSource | explicit test split; excludes `split_fraction`
    split_fraction | float | stratified share of `train` kept for training
    seed | int | drives the split, the generator and every learner
    drop_top_feature | bool | remove the best-ranked feature first
    boost_rounds | int | AdaBoost rounds for `kmanb`
    holdout | float | share of train held out to pick the `kmanb` variant
    k_override | int | cluster count instead of attack types + 1
    kmeans_init | KMeansInit | `random` or `k-means++`
    max_iterations | int | Lloyd iteration cap
    knn_k | int | neighbours for `knn`
    rf_trees | int | trees for `rf`
    rf_mtry | int | features tried per split, default `log2(d) + 1`
    target | Target | `type` (multi-class) or `label` (binary)
    out | Path | where `run` writes its report
    format | ReportFormat | `json`, `csv` or `md`
    """

    device: str
    algorithm: Algorithm = Algorithm.kmanb
    train: Source = Field(default_factory=SynthSource)
    test: Source | None = None
    split_fraction: float | None = Field(None, gt=0, lt=1)
    seed: int = 42
    drop_top_feature: bool = False
    boost_rounds: int = Field(10, ge=1)
    holdout: float | None = Field(0.2, gt=0, lt=1)
    k_override: int | None = Field(None, ge=1)
    kmeans_init: KMeansInit = KMeansInit.random
    max_iterations: int = Field(500, ge=1)
    knn_k: int = Field(1, ge=1)
    rf_trees: int = Field(100, ge=1)
    rf_mtry: int | None = Field(None, ge=1)
    target: Target = Target.attack_type
    out: Path | None = None
    format: ReportFormat = ReportFormat.json

    @validator("device")
    def device_registered(cls, v: str) -> str:
        try:
            return device_spec(v).device
        except SchemaError as e:
            raise ValueError(str(e)) from e

    @validator("format", pre=True)
    def format_alias(cls, v):
        return ReportFormat.from_text(v) if isinstance(v, str) else v

    @root_validator(skip_on_failure=True)
    def one_test_source(cls, values):
        if values["test"] is not None:
            if values["split_fraction"] is not None:
                raise ValueError("Give either a test source or a split.")
        elif values["split_fraction"] is None:
            values["split_fraction"] = DEFAULT_SPLIT
        return values

    @property
    def data_key(self) -> str:
        """Identity of the data a cell sees; cells sharing it share seeds.

        Examples:
            >>> ExperimentConfig(device="fridge").data_key
            'fridge|train_test|keep'
        """
        name = self.train
        if isinstance(name, SynthSource):
            name = name.scale.value
        drop = "drop" if self.drop_top_feature else "keep"
        return f"{self.device}|{name}|{drop}"

    @property
    def is_processed(self) -> bool:
        return (
            isinstance(self.train, SynthSource)
            and self.train.scale == Scale.processed
        )


class TableFamily(str, Enum):
    """The three groups of published comparison tables."""

    train_test = "Train and Test"
    no_top = "with No Highest Ranked Feature"
    processed = "Processed Dataset"

    @classmethod
    def of(cls, config: ExperimentConfig) -> "TableFamily":
        if config.drop_top_feature:
            return cls.no_top
        if config.is_processed:
            return cls.processed
        return cls.train_test

    @property
    def slug(self) -> str:
        """
        Examples:
            >>> TableFamily.no_top.slug
            'no_top'
        """
        return self.name

    def title(self, subject: str) -> str:
        """
        Examples:
            >>> TableFamily.train_test.title("Fridge")
            'IoT Train and Test Fridge Experiment Results'
            >>> TableFamily.no_top.title("Fridge")
            'IoT Fridge with No Highest Ranked Feature Experiment Results'
        """
        if self == TableFamily.no_top:
            return f"IoT {subject} {self.value} Experiment Results"
        return f"IoT {self.value} {subject} Experiment Results"


def derive_seed(suite_seed: int, key: str) -> int:
    """Stable seed for a data key; independent of cell order and of the
    algorithm, so every learner in a table sees the same split.

    Examples:
        >>> derive_seed(42, "fridge|train_test|keep") == derive_seed(
        ...     42, "fridge|train_test|keep"
        ... )
        True
        >>> derive_seed(42, "a") != derive_seed(43, "a")
        True
    """
    entropy = [suite_seed, zlib.crc32(key.encode("utf-8"))]
    state = np.random.SeedSequence(entropy).generate_state(1)
    return int(state[0])


class SuiteConfig(BaseModel):
    seed: int = 42
    workers: int = Field(1, ge=1)
    timeout: float | None = Field(None, gt=0)
    experiments: list[ExperimentConfig] = Field(default_factory=list)

    @validator("experiments")
    def one_cell_per_column(cls, v: list[ExperimentConfig]):
        """A report table has one column per device and algorithm of a
        family, so two experiments may not share all three."""
        seen: dict[tuple, int] = {}
        for index, config in enumerate(v):
            key = (TableFamily.of(config), config.device, config.algorithm)
            if key in seen:
                raise ValueError(
                    f"Experiments {seen[key]} and {index} both run"
                    f" {config.algorithm.value} on {config.device} in the"
                    f" {key[0].slug} family."
                )
            seen[key] = index
        return v

    @classmethod
    def from_data(cls, data: Any) -> "SuiteConfig":
        """A bare list of experiments or a full suite object."""
        if data is None:
            return cls()
        if isinstance(data, list):
            return cls(experiments=data)
        return cls(**data)

    @classmethod
    def load(cls, path: Path | str) -> "SuiteConfig":
        """Read a json or yaml suite file.

        Examples:
            >>> import tempfile
            >>> text = '[{"device": "fridge", "algorithm": "nb"}]'
            >>> with tempfile.TemporaryDirectory() as d:
            ...     p = Path(d) / "suite.json"
            ...     _ = p.write_text(text)
            ...     first = SuiteConfig.load(p).experiments[0]
            >>> first.algorithm, first.split_fraction
            (<Algorithm.nb: 'nb'>, 0.7)
        """
        return cls.from_data(yaml.safe_load(Path(path).read_text()))

    def seeded(self) -> list[ExperimentConfig]:
        """Experiments with their seeds derived from the suite seed."""
        return [
            c.copy(update={"seed": derive_seed(self.seed, c.data_key)})
            for c in self.experiments
        ]
