"""Finite (pseudo)metric spaces over captured optimization trajectories.

A trajectory is a matrix of flattened weight iterates (one row per SGD
step); a loss matrix holds the per-iterate, per-training-sample losses.
Either backs a :class:`DistanceOracle` answering pairwise distances under
one of two metrics:

* plain Euclidean distance between weight iterates, or
* the loss pseudometric: the mean absolute difference of per-sample
  losses between two iterates. Distinct iterates can sit at distance
  zero, so this is only a pseudometric, and zero-length spanning-tree
  edges downstream are legitimate.

Oracles are immutable after construction and safe for concurrent reads;
every operation here is a pure function of its inputs plus an explicit
seed.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.spatial.distance import cdist

# Full k x k matrices above this size are not worth the memory (a 4096^2
# float64 matrix is already 128 MB); larger spaces stay on-the-fly.
PRECOMPUTE_LIMIT = 4096


class MetricKind(Enum):
    EUCLIDEAN = "euclidean"
    LOSS_BASED = "loss"


def _as_matrix(values, name: str) -> np.ndarray:
    arr = np.ascontiguousarray(values, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be a 2-D matrix, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class WeightTrajectory:
    """Captured weight iterates, one flattened parameter vector per row."""

    values: np.ndarray

    def __post_init__(self):
        arr = _as_matrix(self.values, "trajectory")
        if arr.shape[0] < 2:
            raise ValueError("trajectory needs at least 2 iterates")
        if arr.shape[1] < 1:
            raise ValueError("trajectory needs at least 1 parameter column")
        object.__setattr__(self, "values", arr)

    @property
    def iterates(self) -> int:
        return self.values.shape[0]

    @property
    def param_dim(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True, eq=False)
class LossMatrix:
    """Per-iterate, per-sample training losses; entry (t, j) is the loss of
    iterate t on training sample j. All entries must be finite and >= 0."""

    values: np.ndarray

    def __post_init__(self):
        arr = _as_matrix(self.values, "loss matrix")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError("loss matrix must be non-empty")
        if np.any(arr < 0):
            raise ValueError("loss matrix contains negative entries")
        object.__setattr__(self, "values", arr)

    @property
    def iterates(self) -> int:
        return self.values.shape[0]

    @property
    def samples(self) -> int:
        return self.values.shape[1]


def _check_index(i: int, k: int) -> int:
    i = int(i)
    if not 0 <= i < k:
        raise IndexError(f"iterate index {i} out of range [0, {k})")
    return i


def euclidean_distance(traj: WeightTrajectory, i: int, j: int) -> float:
    """l2 distance between weight iterates i and j."""
    i = _check_index(i, traj.iterates)
    j = _check_index(j, traj.iterates)
    diff = traj.values[i] - traj.values[j]
    return float(np.sqrt(diff @ diff))


def loss_pseudo_distance(lm: LossMatrix, i: int, j: int) -> float:
    """Mean absolute difference of per-sample losses between iterates i, j."""
    i = _check_index(i, lm.iterates)
    j = _check_index(j, lm.iterates)
    return float(np.mean(np.abs(lm.values[i] - lm.values[j])))


def subsample_indices(k: int, n: int, seed) -> np.ndarray:
    """Draw n distinct iterate indices from range(k), uniformly without
    replacement, sorted ascending. Deterministic for a fixed seed."""
    k = int(k)
    n = int(n)
    if not 1 <= n <= k:
        raise ValueError(f"subsample size {n} must lie in [1, {k}]")
    rng = np.random.default_rng(seed)
    return np.sort(rng.choice(k, size=n, replace=False))


class DistanceOracle:
    """Unified distance lookup over a trajectory and/or a loss matrix.

    The oracle default is on-the-fly computation; pass ``precompute=True``
    to materialize the full pairwise matrix (allowed up to
    ``PRECOMPUTE_LIMIT`` points), which pays off when many spanning trees
    are built over subsets of the same space.

    Guarantees for all index pairs: dist(i, i) == 0, dist(i, j) ==
    dist(j, i) bit-for-bit, dist(i, j) >= 0, and bit-identical outputs for
    identical inputs.
    """

    def __init__(
        self,
        kind: MetricKind,
        trajectory: WeightTrajectory | None = None,
        losses: LossMatrix | None = None,
        precompute: bool = False,
    ):
        if not isinstance(kind, MetricKind):
            raise TypeError("kind must be a MetricKind")
        if kind is MetricKind.EUCLIDEAN and trajectory is None:
            raise ValueError("Euclidean oracle requires a trajectory")
        if kind is MetricKind.LOSS_BASED and losses is None:
            raise ValueError("loss-based oracle requires a loss matrix")
        if trajectory is not None and losses is not None:
            if trajectory.iterates != losses.iterates:
                raise ValueError(
                    f"trajectory has {trajectory.iterates} iterates but loss "
                    f"matrix has {losses.iterates}"
                )
        self.kind = kind
        self.trajectory = trajectory
        self.losses = losses
        self._points = (
            trajectory.values if kind is MetricKind.EUCLIDEAN else losses.values
        )
        self._matrix: np.ndarray | None = None
        if precompute:
            k = self.point_count
            if k > PRECOMPUTE_LIMIT:
                raise ValueError(
                    f"precomputed mode supports at most {PRECOMPUTE_LIMIT} "
                    f"points, got {k}"
                )
            self._matrix = self.pairwise_matrix()

    @classmethod
    def euclidean(cls, trajectory: WeightTrajectory, precompute: bool = False):
        return cls(MetricKind.EUCLIDEAN, trajectory=trajectory, precompute=precompute)

    @classmethod
    def loss_based(
        cls,
        losses: LossMatrix,
        trajectory: WeightTrajectory | None = None,
        precompute: bool = False,
    ):
        return cls(
            MetricKind.LOSS_BASED,
            trajectory=trajectory,
            losses=losses,
            precompute=precompute,
        )

    @property
    def point_count(self) -> int:
        return self._points.shape[0]

    @property
    def points(self) -> np.ndarray:
        """The backing rows distances are computed from (read-only)."""
        return self._points

    @property
    def matrix(self) -> np.ndarray | None:
        """The precomputed pairwise matrix, or None in on-the-fly mode."""
        return self._matrix

    @property
    def precomputed(self) -> bool:
        return self._matrix is not None

    def distance(self, i: int, j: int) -> float:
        i = _check_index(i, self.point_count)
        j = _check_index(j, self.point_count)
        if self._matrix is not None:
            return float(self._matrix[i, j])
        if self.kind is MetricKind.EUCLIDEAN:
            return euclidean_distance(self.trajectory, i, j)
        return loss_pseudo_distance(self.losses, i, j)

    def distances_from(self, i: int, indices=None) -> np.ndarray:
        """Vector of distances from iterate i to `indices` (default: all)."""
        i = _check_index(i, self.point_count)
        if indices is None:
            indices = np.arange(self.point_count)
        idx = np.asarray(indices, dtype=np.intp)
        if self._matrix is not None:
            return self._matrix[i].take(idx)
        rows = self._points.take(idx, axis=0)
        return self._rows_to_point(rows, self._points[i])

    def _rows_to_point(self, rows: np.ndarray, point: np.ndarray) -> np.ndarray:
        diff = rows - point
        if self.kind is MetricKind.EUCLIDEAN:
            return np.sqrt(np.einsum("ij,ij->i", diff, diff))
        return np.mean(np.abs(diff), axis=1)

    def pairwise_matrix(self, indices=None) -> np.ndarray:
        """Full pairwise distance matrix over `indices` (default: all)."""
        if indices is None:
            pts = self._points
        else:
            idx = np.asarray(indices, dtype=np.intp)
            pts = self._points.take(idx, axis=0)
        if self.kind is MetricKind.EUCLIDEAN:
            m = cdist(pts, pts, metric="euclidean")
        else:
            m = cdist(pts, pts, metric="cityblock") / pts.shape[1]
        np.fill_diagonal(m, 0.0)
        return m
