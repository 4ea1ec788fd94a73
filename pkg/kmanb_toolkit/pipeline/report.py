import json
from collections.abc import Sequence
from pathlib import Path

import pandas as pd
from loguru import logger
from pydantic import BaseModel

from kmanb_toolkit.errors import ReportError
from kmanb_toolkit.utils import fmt, reportenv

from .config import ReportFormat
from .experiment import ExperimentResult

METRIC_ROWS = ("Accuracy", "Precision", "Recall", "Train Time", "Test Time")
FAILED = "failed"
SCHEMA_FILE = Path(__file__).parent / "result.schema.json"


class ReportRow(BaseModel):
    label: str
    values: list[float | None]

    @property
    def cells(self) -> list[str]:
        digits = 3 if self.label.endswith("Time") else 2
        return [FAILED if v is None else fmt(v, digits) for v in self.values]


class ReportTable(BaseModel):
    """Metric rows against one column per result, the layout of the
    published comparison tables."""

    title: str
    columns: list[str]
    rows: list[ReportRow]

    def as_csv(self) -> str:
        frame = pd.DataFrame(
            [
                [row.label]
                + ["" if v is None else f"{v:.6g}" for v in row.values]
                for row in self.rows
            ],
            columns=["metric", *self.columns],
        )
        return frame.to_csv(index=False, lineterminator="\n")


def metric_values(result: ExperimentResult | None) -> list[float | None]:
    if result is None:
        return [None] * len(METRIC_ROWS)
    scores, timing = result.scores, result.timing
    return [
        scores.accuracy,
        scores.precision,
        scores.recall,
        timing.train_seconds,
        timing.test_seconds,
    ]


def device_title(name: str) -> str:
    """
    Examples:
        >>> device_title("gps_tracker")
        'GPS Tracker'
    """
    return " ".join(
        w.upper() if w == "gps" else w.capitalize() for w in name.split("_")
    )


def build_table(
    title: str,
    columns: Sequence[str],
    results: Sequence[ExperimentResult | None],
) -> ReportTable:
    """One row per metric; a `None` result marks a failed column."""
    per_column = [metric_values(r) for r in results]
    return ReportTable(
        title=title,
        columns=list(columns),
        rows=[
            ReportRow(label=label, values=[v[i] for v in per_column])
            for i, label in enumerate(METRIC_ROWS)
        ],
    )


def column_labels(results: Sequence[ExperimentResult]) -> list[str]:
    """Algorithm names when they tell the results apart, else device names,
    else both."""
    algorithms = [r.algorithm.title for r in results]
    devices = [device_title(r.device) for r in results]
    if len(set(algorithms)) == len(results):
        return algorithms
    if len(set(devices)) == len(results):
        return devices
    return [f"{a} ({d})" for a, d in zip(algorithms, devices)]


def results_table(
    results: Sequence[ExperimentResult], title: str | None = None
) -> ReportTable:
    devices = {device_title(r.device) for r in results}
    if title is None:
        subject = devices.pop() if len(devices) == 1 else "Devices"
        title = f"IoT {subject} Experiment Results"
    return build_table(title, column_labels(results), results)


def render_markdown(tables: Sequence[ReportTable]) -> str:
    return reportenv.get_template("report.md.j2").render(tables=tables)


def render_csv(tables: Sequence[ReportTable]) -> str:
    """Tables one after another, separated by a blank line."""
    return "\n".join(t.as_csv() for t in tables)


def read_report_csv(path: Path | str) -> dict[str, dict[str, float]]:
    """Inverse of a single-table csv report: column -> metric -> value."""
    frame = pd.read_csv(
        path, dtype=str, keep_default_na=False, na_filter=False
    )
    metrics = frame[frame.columns[0]].tolist()
    return {
        column: {m: float(v) for m, v in zip(metrics, frame[column]) if v}
        for column in frame.columns[1:]
    }


def result_schema() -> dict:
    """The packaged draft-07 JSON schema every emitted json result
    validates against."""
    return json.loads(SCHEMA_FILE.read_text(encoding="utf-8"))


def write_text(path: Path | str, text: str) -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)
    except OSError as e:
        raise ReportError(f"Cannot write report to {path}: {e}") from e
    return path


def emit_report(
    results: Sequence[ExperimentResult],
    path: Path | str,
    format: ReportFormat | str | None = None,
    title: str | None = None,
) -> Path:
    """Write `results` as json, csv or markdown; the format defaults to the
    path's suffix. A single json result is written as one object, several
    as an array."""
    path = Path(path)
    if format is None:
        format = ReportFormat.from_path(path)
    format = ReportFormat.from_text(format)
    results = list(results)
    if format == ReportFormat.json:
        items = [json.loads(r.json()) for r in results]
        payload = items[0] if len(items) == 1 else items
        text = json.dumps(payload, indent=2) + "\n"
    else:
        tables = [results_table(results, title)] if results else []
        render = render_csv if format == ReportFormat.csv else render_markdown
        text = render(tables)
    logger.info(f"Writing {len(results)} result(s) as {format.value}: {path}")
    return write_text(path, text)

