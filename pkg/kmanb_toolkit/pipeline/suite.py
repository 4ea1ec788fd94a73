import json
import multiprocessing
from concurrent.futures import TimeoutError
from pathlib import Path

from loguru import logger
from pebble import ProcessPool
from pydantic import BaseModel, Field, root_validator

from kmanb_toolkit.dataset import list_devices
from kmanb_toolkit.errors import ReportError
from kmanb_toolkit.evaluation import install_gate

from .config import Algorithm, ExperimentConfig, SuiteConfig, TableFamily
from .experiment import ExperimentResult, run_experiment
from .report import (
    ReportTable,
    build_table,
    device_title,
    render_csv,
    render_markdown,
    write_text,
)


class SuiteCell(BaseModel):
    """Outcome of one configured experiment: a result or the error that
    stopped it."""

    index: int
    family: TableFamily
    config: ExperimentConfig
    result: ExperimentResult | None = None
    error: str | None = None

    @root_validator(skip_on_failure=True)
    def result_or_error(cls, values):
        if (values["result"] is None) == (values["error"] is None):
            raise ValueError("A cell holds either a result or an error.")
        return values

    @property
    def ok(self) -> bool:
        return self.error is None


class SuiteReport(BaseModel):
    seed: int
    cells: list[SuiteCell] = Field(default_factory=list)

    @property
    def failures(self) -> list[SuiteCell]:
        return [c for c in self.cells if not c.ok]

    def family(self, family: TableFamily) -> list[SuiteCell]:
        return [c for c in self.cells if c.family == family]

    def tables(self) -> dict[TableFamily, list[ReportTable]]:
        """Report tables of every family that holds at least one cell."""
        return {
            family: family_tables(family, cells)
            for family in TableFamily
            if (cells := self.family(family))
        }


def _device_rank(device: str) -> int:
    names = list_devices()
    return names.index(device) if device in names else len(names)


def _algo_rank(algorithm: Algorithm) -> int:
    return Algorithm(algorithm).rank


def family_tables(
    family: TableFamily, cells: list[SuiteCell]
) -> list[ReportTable]:
    """One table per device with algorithm columns; a family running a
    single algorithm over several devices gets one table with a column
    per device instead."""
    algorithms = sorted({c.config.algorithm for c in cells}, key=_algo_rank)
    devices = sorted({c.config.device for c in cells}, key=_device_rank)
    found = {(c.config.device, c.config.algorithm): c.result for c in cells}
    if len(found) < len(cells):
        raise ReportError(
            f"Family {family.slug} holds several cells for one device and"
            " algorithm."
        )
    if len(algorithms) == 1 and len(devices) > 1:
        algorithm = algorithms[0]
        return [
            build_table(
                family.title(algorithm.title),
                [device_title(d) for d in devices],
                [found[(d, algorithm)] for d in devices],
            )
        ]
    return [
        build_table(
            family.title(device_title(device)),
            [a.title for a in algorithms],
            [found.get((device, a)) for a in algorithms],
        )
        for device in devices
    ]


def _cell(
    index: int,
    config: ExperimentConfig,
    result: ExperimentResult | None = None,
    error: Exception | str | None = None,
) -> SuiteCell:
    if isinstance(error, Exception):
        error = f"{type(error).__name__}: {error}"
    if error:
        logger.error(f"Cell {index} ({config.data_key}) failed: {error}")
    return SuiteCell(
        index=index,
        family=TableFamily.of(config),
        config=config,
        result=result,
        error=error,
    )


def _run_in_process(configs: list[ExperimentConfig]) -> list[SuiteCell]:
    cells = []
    for index, config in enumerate(configs):
        try:
            cells.append(_cell(index, config, run_experiment(config)))
        except Exception as e:
            cells.append(_cell(index, config, error=e))
    return cells


def _run_in_pool(
    configs: list[ExperimentConfig], workers: int, timeout: float | None
) -> list[SuiteCell]:
    gate = multiprocessing.get_context().RLock()
    cells = []
    with ProcessPool(
        max_workers=workers, initializer=install_gate, initargs=(gate,)
    ) as pool:
        futures = [
            pool.schedule(run_experiment, args=(config,), timeout=timeout)
            for config in configs
        ]
        for index, (config, future) in enumerate(zip(configs, futures)):
            try:
                cells.append(_cell(index, config, future.result()))
            except TimeoutError:
                error = f"TimeoutError: exceeded {timeout} seconds"
                cells.append(_cell(index, config, error=error))
            except Exception as e:
                cells.append(_cell(index, config, error=e))
    return cells


def run_suite(
    suite: SuiteConfig, timeout: float | None = None
) -> SuiteReport:
    """Run every experiment of `suite`, each under a seed derived from the
    suite seed and its data, and collect per-cell results. A failing cell
    is recorded and the suite moves on.

    `timeout` (seconds per cell) only applies when `suite.workers > 1`;
    the suite's own timeout takes precedence.
    """
    configs = suite.seeded()
    timeout = suite.timeout or timeout
    logger.info(
        f"Suite of {len(configs)} experiment(s), seed={suite.seed},"
        f" workers={suite.workers}"
    )
    if suite.workers == 1 or len(configs) <= 1:
        cells = _run_in_process(configs)
    else:
        cells = _run_in_pool(configs, suite.workers, timeout)
    report = SuiteReport(seed=suite.seed, cells=cells)
    if failed := report.failures:
        logger.warning(f"{len(failed)} of {len(cells)} cell(s) failed.")
    return report


def emit_suite(report: SuiteReport, out_dir: Path | str) -> list[Path]:
    """Write `results.json` plus a markdown and a csv file per table
    family into `out_dir`."""
    out_dir = Path(out_dir)
    payload = json.dumps(json.loads(report.json()), indent=2) + "\n"
    paths = [write_text(out_dir / "results.json", payload)]
    for family, tables in report.tables().items():
        paths.append(
            write_text(out_dir / f"{family.slug}.md", render_markdown(tables))
        )
        paths.append(
            write_text(out_dir / f"{family.slug}.csv", render_csv(tables))
        )
    logger.info(f"Suite report written to {out_dir}")
    return paths
