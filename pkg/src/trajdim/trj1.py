"""Reader/writer for the TRJ1 binary interchange format.

Layout (little-endian throughout):

    bytes 0-3    magic ``54 52 4A 31`` (b"TRJ1")
    byte  4      format version, currently 1
    byte  5      payload kind: 1 = trajectory, 2 = loss matrix
    bytes 6-7    reserved, must be zero
    bytes 8-15   row count, unsigned 64-bit
    bytes 16-23  column count, unsigned 64-bit
    then         rows x cols IEEE-754 float64 values, row-major

Readers reject wrong magic, wrong version, nonzero reserved bytes, and
payloads whose byte length does not match the declared shape exactly.
"""
from __future__ import annotations

import os
import struct
import tempfile

import numpy as np

from .metricspace import LossMatrix, WeightTrajectory

MAGIC = b"TRJ1"
VERSION = 1
KIND_TRAJECTORY = 1
KIND_LOSS_MATRIX = 2

_HEADER = struct.Struct("<4sBBHQQ")
HEADER_SIZE = _HEADER.size  # 24


class TrjFormatError(Exception):
    """Raised when a file does not conform to the TRJ1 contract."""


def write_matrix(path, values, kind: int) -> None:
    """Write a 2-D float64 matrix as a TRJ1 file (atomic temp + rename)."""
    if kind not in (KIND_TRAJECTORY, KIND_LOSS_MATRIX):
        raise ValueError(f"unknown payload kind {kind}")
    arr = np.ascontiguousarray(values, dtype="<f8")
    if arr.ndim != 2:
        raise ValueError(f"payload must be 2-D, got shape {arr.shape}")
    header = _HEADER.pack(MAGIC, VERSION, kind, 0, arr.shape[0], arr.shape[1])
    path = os.fspath(path)
    fd, tmp = tempfile.mkstemp(dir=os.path.dirname(path) or ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(header)
            fh.write(arr.tobytes(order="C"))
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def read_matrix(path, expect_kind: int | None = None) -> tuple[np.ndarray, int]:
    """Read a TRJ1 file, returning (matrix, payload kind)."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < HEADER_SIZE:
        raise TrjFormatError(f"{path}: truncated header ({len(raw)} bytes)")
    magic, version, kind, reserved, rows, cols = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise TrjFormatError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise TrjFormatError(f"{path}: unsupported version {version}")
    if kind not in (KIND_TRAJECTORY, KIND_LOSS_MATRIX):
        raise TrjFormatError(f"{path}: unknown payload kind {kind}")
    if reserved != 0:
        raise TrjFormatError(f"{path}: reserved header bytes are nonzero")
    expected = HEADER_SIZE + rows * cols * 8
    if len(raw) != expected:
        raise TrjFormatError(
            f"{path}: payload size mismatch (expected {expected} bytes for "
            f"{rows}x{cols}, found {len(raw)})"
        )
    if expect_kind is not None and kind != expect_kind:
        raise TrjFormatError(
            f"{path}: expected payload kind {expect_kind}, found {kind}"
        )
    data = np.frombuffer(raw, dtype="<f8", offset=HEADER_SIZE)
    return data.reshape(rows, cols).copy(), kind


def write_trajectory(path, traj: WeightTrajectory) -> None:
    write_matrix(path, traj.values, KIND_TRAJECTORY)


def write_loss_matrix(path, lm: LossMatrix) -> None:
    write_matrix(path, lm.values, KIND_LOSS_MATRIX)


def read_trajectory(path) -> WeightTrajectory:
    values, _ = read_matrix(path, expect_kind=KIND_TRAJECTORY)
    return WeightTrajectory(values)


def read_loss_matrix(path) -> LossMatrix:
    values, _ = read_matrix(path, expect_kind=KIND_LOSS_MATRIX)
    return LossMatrix(values)
