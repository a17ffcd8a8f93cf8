"""Zero-dimensional persistence of finite (pseudo)metric spaces.

The finite bars of the degree-0 persistence barcode of a Vietoris-Rips
filtration are, as a multiset, exactly the edge lengths of a minimum
spanning tree of the point cloud. This module exploits that equivalence:
:func:`minimum_spanning_tree` (dense Prim, O(n^2) oracle calls, O(n)
memory) is the production path, and :func:`vietoris_rips_barcode0` is an
independent union-find computation over the full distance matrix kept
for verification at small scales.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._kernels import _prim_euclidean, _prim_loss, _prim_matrix
from .metricspace import DistanceOracle, MetricKind

BRUTEFORCE_LIMIT = 512


@dataclass(frozen=True, eq=False)
class Barcode0:
    """Finite bar lengths of a degree-0 barcode, sorted ascending.

    The single infinite bar (the component that never dies) is excluded
    by construction, so a cloud of n points carries n - 1 bars.
    """

    lengths: np.ndarray
    point_count: int

    def __post_init__(self):
        arr = np.asarray(self.lengths, dtype=np.float64)
        if arr.ndim != 1:
            raise ValueError("bar lengths must be a 1-D array")
        if arr.size != self.point_count - 1:
            raise ValueError(
                f"{self.point_count} points require {self.point_count - 1} "
                f"finite bars, got {arr.size}"
            )
        if arr.size and (not np.all(np.isfinite(arr)) or arr.min() < 0):
            raise ValueError("bar lengths must be finite and nonnegative")
        arr = np.sort(arr)
        arr.flags.writeable = False
        object.__setattr__(self, "lengths", arr)


@dataclass(frozen=True, eq=False)
class MstResult:
    """A minimum spanning tree: edge lengths in insertion order, their sum,
    and the (from, to) iterate pairs for diagnostics."""

    edge_lengths: np.ndarray
    total_weight: float
    edges: list[tuple[int, int]] = field(repr=False)

    def barcode(self) -> Barcode0:
        return Barcode0(self.edge_lengths, point_count=self.edge_lengths.size + 1)


def minimum_spanning_tree(oracle: DistanceOracle, indices) -> MstResult:
    """Dense Prim over the complete graph on `indices` with oracle weights.

    Ties between equal-weight candidate edges resolve to the lowest
    position in `indices`; this can change which tree is returned but
    never the total weight, and the sorted edge-length multiset is the
    quantity downstream code relies on.
    """
    idx = np.asarray(indices, dtype=np.int64)
    if idx.ndim != 1 or idx.size < 2:
        raise ValueError("need at least 2 indices to span a tree")
    if np.unique(idx).size != idx.size:
        raise ValueError("indices must be distinct")
    if idx.min() < 0 or idx.max() >= oracle.point_count:
        raise IndexError("spanning-tree indices out of range")

    if oracle.precomputed:
        out = _prim_matrix(oracle.matrix, np.ascontiguousarray(idx))
    else:
        sub = np.ascontiguousarray(oracle.points.take(idx, axis=0))
        if oracle.kind is MetricKind.EUCLIDEAN:
            out = _prim_euclidean(sub)
        else:
            out = _prim_loss(sub)
    edge_lengths, parents, bad_i, bad_j = out
    if bad_i >= 0:
        raise ValueError(
            f"non-finite distance between iterates {int(idx[bad_i])} "
            f"and {int(idx[bad_j])}"
        )

    edges = [(int(idx[a]), int(idx[b])) for a, b in parents]
    edge_lengths.flags.writeable = False
    return MstResult(
        edge_lengths=edge_lengths,
        total_weight=float(edge_lengths.sum()),
        edges=edges,
    )


def total_persistence(bars: Barcode0, alpha: float) -> float:
    """Sum of bar lengths raised to the power alpha (zero bars contribute 0)."""
    alpha = float(alpha)
    if alpha <= 0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    return float(np.sum(bars.lengths**alpha))


class _UnionFind:
    __slots__ = ("parent",)

    def __init__(self, n: int):
        self.parent = list(range(n))

    def find(self, a: int) -> int:
        parent = self.parent
        while parent[a] != a:
            parent[a] = parent[parent[a]]  # path halving
            a = parent[a]
        return a

    def union(self, a: int, b: int) -> bool:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        self.parent[rb] = ra
        return True


def vietoris_rips_barcode0(dist_matrix) -> Barcode0:
    """Degree-0 barcode straight from the filtration on a distance matrix.

    Scans all pairwise distances in ascending order and records one finite
    bar per union-find merge; the surviving component's infinite bar is
    dropped. Intended as a verification oracle, hence the size cap.
    """
    d = np.asarray(dist_matrix, dtype=np.float64)
    if d.ndim != 2 or d.shape[0] != d.shape[1]:
        raise ValueError(f"distance matrix must be square, got {d.shape}")
    n = d.shape[0]
    if n < 2:
        raise ValueError("need at least 2 points")
    if n > BRUTEFORCE_LIMIT:
        raise ValueError(f"brute-force path is capped at {BRUTEFORCE_LIMIT} points")
    if not np.all(np.isfinite(d)):
        raise ValueError("distance matrix contains non-finite entries")
    if np.any(np.diag(d) != 0):
        raise ValueError("distance matrix diagonal must be zero")
    if not np.array_equal(d, d.T):
        raise ValueError("distance matrix must be symmetric")

    iu, ju = np.triu_indices(n, k=1)
    weights = d[iu, ju]
    order = np.argsort(weights, kind="stable")

    uf = _UnionFind(n)
    bars = np.empty(n - 1)
    found = 0
    for e in order:
        if uf.union(int(iu[e]), int(ju[e])):
            bars[found] = weights[e]
            found += 1
            if found == n - 1:
                break
    return Barcode0(bars, point_count=n)
