"""Machine-readable report serialization (CSV and JSON).

Every emitter has a matching parser and ``parse(emit(x)) == x`` holds
exactly: floats are written with ``repr`` so they round-trip bit-for-bit,
absent values are empty fields.
"""
from __future__ import annotations

import csv
import io
import json
import os
import tempfile

from .dimension import DimEstimate
from .stats import CorrelationReport

ESTIMATE_COLUMNS = (
    "metric",
    "alpha",
    "restarts_per_size",
    "seed",
    "sample_size",
    "mean_total_persistence",
    "slope",
    "intercept",
    "r_squared",
    "dimension",
    "degenerate",
    "reason",
)

CORRELATION_COLUMNS = (
    "method",
    "measure",
    "measure_b",
    "target",
    "group",
    "conditioning",
    "value",
    "p_value",
    "sample_count",
    "sample_count_b",
    "permutations",
    "bins",
    "seed",
    "note",
)


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _opt_float(text: str):
    return None if text == "" else float(text)


def write_text_atomic(path, text: str) -> None:
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


def estimate_to_csv(est: DimEstimate) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(ESTIMATE_COLUMNS)
    for size, value in zip(est.sample_sizes, est.mean_total_persistence):
        writer.writerow(
            [
                est.metric,
                _fmt(est.alpha),
                est.restarts_per_size,
                est.seed,
                size,
                _fmt(value),
                _fmt(est.slope),
                _fmt(est.intercept),
                _fmt(est.r_squared),
                _fmt(est.dimension),
                _fmt(est.degenerate),
                est.reason or "",
            ]
        )
    return buf.getvalue()


def estimate_from_csv(text: str) -> DimEstimate:
    reader = csv.reader(io.StringIO(text))
    header = next(reader)
    if tuple(header) != ESTIMATE_COLUMNS:
        raise ValueError("not a dimension-estimate report")
    rows = [row for row in reader if row]
    if not rows:
        raise ValueError("empty dimension-estimate report")
    head = rows[0]
    for row in rows[1:]:
        if row[:4] != head[:4] or row[6:] != head[6:]:
            raise ValueError("inconsistent summary fields in estimate report")
    return DimEstimate(
        metric=head[0],
        alpha=float(head[1]),
        sample_sizes=tuple(int(r[4]) for r in rows),
        mean_total_persistence=tuple(float(r[5]) for r in rows),
        restarts_per_size=int(head[2]),
        seed=int(head[3]),
        slope=_opt_float(head[6]),
        intercept=_opt_float(head[7]),
        r_squared=_opt_float(head[8]),
        dimension=_opt_float(head[9]),
        degenerate=head[10] == "true",
        reason=head[11] or None,
    )


def estimate_to_json(est: DimEstimate) -> str:
    payload = {
        "metric": est.metric,
        "alpha": est.alpha,
        "restarts_per_size": est.restarts_per_size,
        "seed": est.seed,
        "sample_sizes": list(est.sample_sizes),
        "mean_total_persistence": list(est.mean_total_persistence),
        "slope": est.slope,
        "intercept": est.intercept,
        "r_squared": est.r_squared,
        "dimension": est.dimension,
        "degenerate": est.degenerate,
        "reason": est.reason,
    }
    return json.dumps(payload, indent=2) + "\n"


def estimate_from_json(text: str) -> DimEstimate:
    payload = json.loads(text)
    return DimEstimate(
        metric=payload["metric"],
        alpha=payload["alpha"],
        sample_sizes=tuple(payload["sample_sizes"]),
        mean_total_persistence=tuple(payload["mean_total_persistence"]),
        restarts_per_size=payload["restarts_per_size"],
        seed=payload["seed"],
        slope=payload["slope"],
        intercept=payload["intercept"],
        r_squared=payload["r_squared"],
        dimension=payload["dimension"],
        degenerate=payload["degenerate"],
        reason=payload["reason"],
    )


def correlations_to_csv(reports) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CORRELATION_COLUMNS)
    for rep in reports:
        writer.writerow(
            [
                rep.method,
                rep.measure,
                rep.measure_b,
                rep.target,
                rep.group,
                rep.conditioning,
                _fmt(rep.value),
                _fmt(rep.p_value),
                rep.sample_count,
                rep.sample_count_b,
                rep.permutations,
                rep.bins,
                rep.seed,
                rep.note,
            ]
        )
    return buf.getvalue()


def correlations_from_csv(text: str) -> list[CorrelationReport]:
    reader = csv.reader(io.StringIO(text))
    header = next(reader)
    if tuple(header) != CORRELATION_COLUMNS:
        raise ValueError("not a correlation report")
    reports = []
    for row in reader:
        if not row:
            continue
        reports.append(
            CorrelationReport(
                method=row[0],
                measure=row[1],
                measure_b=row[2],
                target=row[3],
                group=row[4],
                conditioning=row[5],
                value=_opt_float(row[6]),
                p_value=_opt_float(row[7]),
                sample_count=int(row[8]),
                sample_count_b=int(row[9]),
                permutations=int(row[10]),
                bins=int(row[11]),
                seed=int(row[12]),
                note=row[13],
            )
        )
    return reports


def correlations_to_json(reports) -> str:
    payload = [
        {col: getattr(rep, attr) for col, attr in zip(CORRELATION_COLUMNS, CORRELATION_COLUMNS)}
        for rep in reports
    ]
    return json.dumps(payload, indent=2) + "\n"


def correlations_from_json(text: str) -> list[CorrelationReport]:
    return [CorrelationReport(**item) for item in json.loads(text)]
