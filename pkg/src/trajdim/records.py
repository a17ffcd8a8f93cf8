"""Run records: one trained model's hyperparameters plus its measures.

The on-disk form is a CSV table with this exact header:

    run_id, learning_rate, batch_size, width, seed, dataset, init,
    dim_euclidean, dim_loss, norm, step_size, lb_ratio, gap_loss,
    gap_accuracy, test_accuracy

Hyperparameter fields are mandatory; measure fields may be empty (a cell
that failed or a measure that does not apply).
"""
from __future__ import annotations

import csv
import io
import os
import tempfile
from dataclasses import dataclass, field

HYPERPARAM_FIELDS = (
    "learning_rate",
    "batch_size",
    "width",
    "seed",
    "dataset",
    "init",
)
MEASURE_FIELDS = (
    "dim_euclidean",
    "dim_loss",
    "norm",
    "step_size",
    "lb_ratio",
    "gap_loss",
    "gap_accuracy",
    "test_accuracy",
)
RECORD_COLUMNS = ("run_id",) + HYPERPARAM_FIELDS + MEASURE_FIELDS

INIT_MODES = ("standard", "adversarial")


class SchemaError(Exception):
    """Raised when a record table violates the CSV schema."""


@dataclass
class RunRecord:
    run_id: str
    learning_rate: float
    batch_size: int
    width: int
    seed: int
    dataset: str
    init: str
    measures: dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if not self.run_id:
            raise ValueError("run_id must be non-empty")
        if self.init not in INIT_MODES:
            raise ValueError(f"init must be one of {INIT_MODES}, got {self.init!r}")
        for key, value in self.measures.items():
            if key not in MEASURE_FIELDS:
                raise ValueError(f"unknown measure {key!r}")
            value = float(value)
            if value != value or value in (float("inf"), float("-inf")):
                raise ValueError(f"measure {key!r} must be finite, got {value}")
            self.measures[key] = value

    def get(self, key: str):
        """Value of a hyperparameter or measure column, None if absent."""
        if key in HYPERPARAM_FIELDS:
            return getattr(self, key)
        if key in MEASURE_FIELDS:
            return self.measures.get(key)
        raise KeyError(key)


def _check_unique(records) -> None:
    seen = set()
    for rec in records:
        if rec.run_id in seen:
            raise SchemaError(f"duplicate run_id {rec.run_id!r}")
        seen.add(rec.run_id)


def _record_row(rec: RunRecord) -> list[str]:
    row = [rec.run_id]
    row.extend(repr(v) if isinstance(v, float) else str(v)
               for v in (rec.learning_rate, rec.batch_size, rec.width, rec.seed))
    row.extend([rec.dataset, rec.init])
    for key in MEASURE_FIELDS:
        value = rec.measures.get(key)
        row.append("" if value is None else repr(value))
    return row


def records_to_csv(records) -> str:
    records = list(records)
    _check_unique(records)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(RECORD_COLUMNS)
    for rec in records:
        writer.writerow(_record_row(rec))
    return buf.getvalue()


def write_records(path, records) -> None:
    """Write a record table atomically (temp file + rename)."""
    text = records_to_csv(records)
    path = os.fspath(path)
    fd, tmp = tempfile.mkstemp(dir=os.path.dirname(path) or ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def records_from_csv(text: str) -> list[RunRecord]:
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise SchemaError("empty record table") from None
    if tuple(header) != RECORD_COLUMNS:
        missing = [c for c in RECORD_COLUMNS if c not in header]
        raise SchemaError(
            f"bad record header; missing or misplaced columns: {missing or header}"
        )
    records = []
    for lineno, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != len(RECORD_COLUMNS):
            raise SchemaError(f"line {lineno}: expected {len(RECORD_COLUMNS)} fields")
        named = dict(zip(RECORD_COLUMNS, row))
        for col in ("run_id",) + HYPERPARAM_FIELDS:
            if named[col] == "":
                raise SchemaError(f"line {lineno}: empty required field {col!r}")
        try:
            measures = {
                key: float(named[key]) for key in MEASURE_FIELDS if named[key] != ""
            }
            records.append(
                RunRecord(
                    run_id=named["run_id"],
                    learning_rate=float(named["learning_rate"]),
                    batch_size=int(named["batch_size"]),
                    width=int(named["width"]),
                    seed=int(named["seed"]),
                    dataset=named["dataset"],
                    init=named["init"],
                    measures=measures,
                )
            )
        except ValueError as exc:
            raise SchemaError(f"line {lineno}: {exc}") from exc
    _check_unique(records)
    return records


def read_records(path) -> list[RunRecord]:
    with open(path, "r", newline="") as fh:
        return records_from_csv(fh.read())
