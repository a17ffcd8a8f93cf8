"""Numba inner loops for dense Prim over the three oracle backings.

Each kernel runs the same algorithm: grow the tree from position 0,
updating candidate distances from the freshly added vertex only, with
ties resolved to the lowest position. Distances are accumulated
per-coordinate in index order, matching the naive definitions exactly
(identical points give exactly 0.0).

Kernels return (edge_lengths, parents, bad_i, bad_j); bad_* >= 0 flags
the first non-finite distance encountered.
"""
from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True)
def _prim_euclidean(points):
    s, d = points.shape
    in_tree = np.zeros(s, np.bool_)
    best = np.full(s, np.inf)
    best_from = np.zeros(s, np.int64)
    edge_lengths = np.empty(s - 1)
    parents = np.empty((s - 1, 2), np.int64)

    current = 0
    in_tree[0] = True
    for step in range(s - 1):
        base = points[current]
        for j in range(s):
            if in_tree[j]:
                continue
            acc = 0.0
            for c in range(d):
                t = points[j, c] - base[c]
                acc += t * t
            dist = np.sqrt(acc)
            if not np.isfinite(dist):
                return edge_lengths, parents, current, j
            if dist < best[j]:
                best[j] = dist
                best_from[j] = current
        nxt = -1
        weight = np.inf
        for j in range(s):
            if not in_tree[j] and best[j] < weight:
                weight = best[j]
                nxt = j
        edge_lengths[step] = weight
        parents[step, 0] = best_from[nxt]
        parents[step, 1] = nxt
        in_tree[nxt] = True
        current = nxt
    return edge_lengths, parents, -1, -1


@njit(cache=True)
def _prim_loss(rows):
    s, n = rows.shape
    in_tree = np.zeros(s, np.bool_)
    best = np.full(s, np.inf)
    best_from = np.zeros(s, np.int64)
    edge_lengths = np.empty(s - 1)
    parents = np.empty((s - 1, 2), np.int64)

    current = 0
    in_tree[0] = True
    for step in range(s - 1):
        base = rows[current]
        for j in range(s):
            if in_tree[j]:
                continue
            acc = 0.0
            for c in range(n):
                acc += abs(rows[j, c] - base[c])
            dist = acc / n
            if not np.isfinite(dist):
                return edge_lengths, parents, current, j
            if dist < best[j]:
                best[j] = dist
                best_from[j] = current
        nxt = -1
        weight = np.inf
        for j in range(s):
            if not in_tree[j] and best[j] < weight:
                weight = best[j]
                nxt = j
        edge_lengths[step] = weight
        parents[step, 0] = best_from[nxt]
        parents[step, 1] = nxt
        in_tree[nxt] = True
        current = nxt
    return edge_lengths, parents, -1, -1


@njit(cache=True)
def _prim_matrix(matrix, idx):
    s = idx.size
    in_tree = np.zeros(s, np.bool_)
    best = np.full(s, np.inf)
    best_from = np.zeros(s, np.int64)
    edge_lengths = np.empty(s - 1)
    parents = np.empty((s - 1, 2), np.int64)

    current = 0
    in_tree[0] = True
    for step in range(s - 1):
        row = matrix[idx[current]]
        for j in range(s):
            if in_tree[j]:
                continue
            dist = row[idx[j]]
            if not np.isfinite(dist):
                return edge_lengths, parents, current, j
            if dist < best[j]:
                best[j] = dist
                best_from[j] = current
        nxt = -1
        weight = np.inf
        for j in range(s):
            if not in_tree[j] and best[j] < weight:
                weight = best[j]
                nxt = j
        edge_lengths[step] = weight
        parents[step, 0] = best_from[nxt]
        parents[step, 1] = nxt
        in_tree[nxt] = True
        current = nxt
    return edge_lengths, parents, -1, -1
