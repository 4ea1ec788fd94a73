class KmanbError(Exception):
    """Root of every error raised on purpose by the toolkit."""


class DataError(KmanbError, ValueError):
    """The input data cannot be used as given."""


class SchemaError(DataError):
    """Columns or features do not line up with the expected profile."""


class RowError(DataError):
    """A single cell could not be read; `row` is the 0-based data row."""

    def __init__(self, row: int, column: str, detail: str):
        self.row = row
        self.column = column
        super().__init__(f"Row {row} (line {row + 2}), {column=}: {detail}")


class ModelError(KmanbError, ValueError):
    """Hyperparameters or training data make a model undefined."""


class ReportError(KmanbError, OSError):
    """A report could not be written to its destination."""
