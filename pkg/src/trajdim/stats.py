"""Correlation and conditional-independence battery for run records.

Covers everything needed to relate candidate generalization measures to
the observed gap: Spearman and Kendall tau-b rank correlations, the
granulated Kendall coefficient (per-hyperparameter-axis averaging),
Fisher z comparison of two Spearman coefficients, partial correlation
with a residual-permutation p-value, and a plug-in conditional mutual
information estimator with a local-permutation conditional-independence
test.

Every randomized routine takes an explicit nonnegative seed and derives
one substream per permutation round, so p-values are reproducible and
independent of evaluation order.
"""
from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass

import numpy as np
from scipy.stats import rankdata

from .records import HYPERPARAM_FIELDS


class DegenerateStatisticError(ValueError):
    """A correlation is undefined (constant margin, all ties, ...)."""


def _pair(x, y, min_len: int):
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.ndim != 1 or y.ndim != 1 or x.size != y.size:
        raise ValueError("inputs must be 1-D vectors of equal length")
    if x.size < min_len:
        raise ValueError(f"need at least {min_len} observations, got {x.size}")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise ValueError("inputs contain non-finite values")
    return x, y


def _pearson(a: np.ndarray, b: np.ndarray) -> float:
    da = a - a.mean()
    db = b - b.mean()
    denom = math.sqrt(float(da @ da) * float(db @ db))
    if denom == 0.0:
        raise DegenerateStatisticError("constant input to correlation")
    return float(da @ db) / denom


def spearman(x, y) -> float:
    """Spearman rank correlation: Pearson correlation of average ranks."""
    x, y = _pair(x, y, min_len=3)
    return _pearson(rankdata(x), rankdata(y))


def _tie_term(v: np.ndarray) -> float:
    _, counts = np.unique(v, return_counts=True)
    return float(np.sum(counts * (counts - 1)) / 2)


def kendall_tau_b(x, y) -> float:
    """Kendall rank correlation with tie corrections in both margins.

    Pairwise O(n^2) sign counting; meant for the modest vector lengths
    that arise from record tables.
    """
    x, y = _pair(x, y, min_len=2)
    n = x.size
    sx = np.sign(x[:, None] - x[None, :])
    sy = np.sign(y[:, None] - y[None, :])
    concordance = float(np.sum(sx * sy)) / 2.0  # each unordered pair twice
    n0 = n * (n - 1) / 2.0
    nx = n0 - _tie_term(x)
    ny = n0 - _tie_term(y)
    if nx == 0.0 or ny == 0.0:
        raise DegenerateStatisticError("a margin is entirely tied")
    return concordance / math.sqrt(nx * ny)


@dataclass(frozen=True)
class GranulatedKendall:
    psi: float
    axis_scores: dict[str, float]
    cells_used: dict[str, int]
    cells_skipped: dict[str, int]
    dropped_records: int


def _mean(values) -> float:
    values = list(values)
    return math.fsum(values) / len(values)


def granulated_kendall_detail(records, measure: str, target: str, axes) -> GranulatedKendall:
    """Granulated Kendall coefficient with per-axis diagnostics.

    For each axis, records are partitioned into cells by every other
    hyperparameter (seed excluded); within a cell, seeds are averaged out
    per axis value before the tau-b between measure and target is taken.
    Cells with fewer than two axis values or a fully tied margin are
    skipped and counted, never imputed.
    """
    axes = list(axes)
    if not axes:
        raise ValueError("need at least one hyperparameter axis")
    for axis in axes:
        if axis not in HYPERPARAM_FIELDS or axis == "seed":
            raise ValueError(f"invalid axis {axis!r}")
    records = list(records)
    usable = [
        r for r in records if r.get(measure) is not None and r.get(target) is not None
    ]
    dropped = len(records) - len(usable)
    for axis in axes:
        if len({r.get(axis) for r in usable}) < 2:
            raise ValueError(f"axis {axis!r} has fewer than 2 distinct values")

    axis_scores: dict[str, float] = {}
    cells_used: dict[str, int] = {}
    cells_skipped: dict[str, int] = {}
    for axis in axes:
        other = [h for h in HYPERPARAM_FIELDS if h not in (axis, "seed")]
        cells = defaultdict(list)
        for r in usable:
            cells[tuple(r.get(h) for h in other)].append(r)
        taus = []
        skipped = 0
        for key in sorted(cells):
            by_value = defaultdict(list)
            for r in cells[key]:
                by_value[r.get(axis)].append(r)
            if len(by_value) < 2:
                skipped += 1
                continue
            ms, ts = [], []
            for _, group in sorted(by_value.items()):
                ms.append(_mean(r.get(measure) for r in group))
                ts.append(_mean(r.get(target) for r in group))
            try:
                taus.append(kendall_tau_b(ms, ts))
            except DegenerateStatisticError:
                skipped += 1
        if not taus:
            raise ValueError(f"no usable cells on axis {axis!r}")
        axis_scores[axis] = _mean(taus)
        cells_used[axis] = len(taus)
        cells_skipped[axis] = skipped
    return GranulatedKendall(
        psi=_mean(axis_scores.values()),
        axis_scores=axis_scores,
        cells_used=cells_used,
        cells_skipped=cells_skipped,
        dropped_records=dropped,
    )


def granulated_kendall(records, measure: str, target: str, axes) -> float:
    return granulated_kendall_detail(records, measure, target, axes).psi


# Variance inflation for Fisher-z comparison of Spearman coefficients
# (Fieller-Hartley-Pearson): var(atanh r) ~ 1.06 / (n - 3).
_SPEARMAN_VARIANCE_INFLATION = 1.06


def fisher_z_compare(r1: float, n1: int, r2: float, n2: int) -> tuple[float, float]:
    """Compare two Spearman coefficients; returns (z statistic, two-sided p)."""
    for r in (r1, r2):
        if not abs(r) < 1.0:
            raise ValueError(f"coefficients must satisfy |r| < 1, got {r}")
    for n in (n1, n2):
        if n <= 3:
            raise ValueError(f"sample counts must exceed 3, got {n}")
    se = math.sqrt(
        _SPEARMAN_VARIANCE_INFLATION / (n1 - 3)
        + _SPEARMAN_VARIANCE_INFLATION / (n2 - 3)
    )
    z = (math.atanh(r1) - math.atanh(r2)) / se
    p = math.erfc(abs(z) / math.sqrt(2.0))
    return z, p


@dataclass(frozen=True)
class PartialCorrResult:
    value: float
    p_value: float
    kind: str
    permutations: int
    seed: int
    degenerate: bool = False


def _residuals(values: np.ndarray, design: np.ndarray) -> np.ndarray:
    beta, *_ = np.linalg.lstsq(design, values, rcond=None)
    return values - design @ beta


def partial_corr(
    x,
    y,
    conditioning=None,
    kind: str = "spearman",
    permutations: int = 999,
    seed: int = 0,
) -> PartialCorrResult:
    """Partial rank correlation of x and y given conditioning columns.

    x and y are rank-transformed, each is OLS-regressed on the
    conditioning columns plus an intercept, and the chosen rank
    correlation of the two residual vectors is returned. The p-value
    permutes the x-residuals: p = (1 + #{|coef_perm| >= |coef|}) /
    (1 + permutations). With no conditioning columns this reproduces the
    plain coefficient exactly.
    """
    if kind not in ("spearman", "kendall"):
        raise ValueError(f"kind must be 'spearman' or 'kendall', got {kind!r}")
    if permutations < 99:
        raise ValueError("need at least 99 permutations")
    if seed < 0:
        raise ValueError("seed must be a nonnegative int")
    x, y = _pair(x, y, min_len=3)
    n = x.size
    if conditioning is None:
        z = np.empty((n, 0))
    else:
        z = np.asarray(conditioning, dtype=np.float64)
        if z.ndim == 1:
            z = z[:, None]
        if z.shape[0] != n:
            raise ValueError("conditioning rows must match x and y")
        if not np.all(np.isfinite(z)):
            raise ValueError("conditioning contains non-finite values")
    design = np.hstack([np.ones((n, 1)), z])
    if np.linalg.matrix_rank(design) < design.shape[1]:
        raise ValueError("conditioning columns are rank-deficient")

    rx = _residuals(rankdata(x), design)
    ry = _residuals(rankdata(y), design)
    # residuals within least-squares noise of zero mean the variable is an
    # exact function of the conditioning set: no partial signal remains
    atol = 1e-8 * n
    if np.max(np.abs(rx)) <= atol or np.max(np.abs(ry)) <= atol:
        return PartialCorrResult(0.0, 1.0, kind, permutations, seed, degenerate=True)

    if kind == "spearman":
        rrx, rry = rankdata(rx), rankdata(ry)
        observed = _pearson(rrx, rry)

        def coef(perm):
            return _pearson(rrx[perm], rry)

    else:
        observed = kendall_tau_b(rx, ry)

        def coef(perm):
            return kendall_tau_b(rx[perm], ry)

    threshold = abs(observed)
    exceed = 0
    for b in range(permutations):
        rng = np.random.default_rng([seed, b])
        if abs(coef(rng.permutation(n))) >= threshold:
            exceed += 1
    p = (1.0 + exceed) / (1.0 + permutations)
    return PartialCorrResult(observed, p, kind, permutations, seed)


def conditional_mutual_information(x, y, z) -> float:
    """Plug-in conditional mutual information of discrete labels, in nats.

    Computed from contingency counts as
    (1/N) sum_xyz N_xyz * log(N_xyz * N_z / (N_xz * N_yz)), with empty
    cells contributing zero; exactly factorizing tables give exactly 0.
    """
    x = np.asarray(x)
    y = np.asarray(y)
    z = np.asarray(z)
    if not (x.shape == y.shape == z.shape) or x.ndim != 1 or x.size == 0:
        raise ValueError("x, y, z must be equal-length non-empty vectors")
    _, xc = np.unique(x, return_inverse=True)
    _, yc = np.unique(y, return_inverse=True)
    _, zc = np.unique(z, return_inverse=True)
    nx, ny, nz = xc.max() + 1, yc.max() + 1, zc.max() + 1
    joint = (xc * ny + yc) * nz + zc
    counts = np.bincount(joint, minlength=nx * ny * nz).astype(np.float64)
    counts = counts.reshape(nx, ny, nz)
    n_z = counts.sum(axis=(0, 1))
    n_xz = counts.sum(axis=1)
    n_yz = counts.sum(axis=0)
    mask = counts > 0
    num = counts * n_z[None, None, :]
    den = n_xz[:, None, :] * n_yz[None, :, :]
    total = float(np.sum(counts[mask] * np.log(num[mask] / den[mask])))
    return max(total / x.size, 0.0)


def equal_frequency_bins(x, bins: int) -> np.ndarray:
    """Assign each value to one of `bins` equal-frequency bins (0-based).

    Ordinal ranks from a stable sort, so ties split deterministically."""
    bins = int(bins)
    if bins < 2:
        raise ValueError(f"need at least 2 bins, got {bins}")
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.size == 0:
        raise ValueError("input must be a non-empty 1-D vector")
    order = np.argsort(x, kind="stable")
    ranks = np.empty(x.size, dtype=np.int64)
    ranks[order] = np.arange(x.size)
    return (ranks * bins) // x.size


@dataclass(frozen=True)
class CmiTestResult:
    value: float
    p_value: float
    bins: int
    permutations: int
    seed: int
    small_strata: int


def cmi_local_permutation_test(
    x,
    y,
    z,
    bins: int = 5,
    permutations: int = 500,
    seed: int = 0,
) -> CmiTestResult:
    """Conditional-independence test of x and y given discrete z.

    x and y are discretized into equal-frequency bins (z keeps its exact
    levels); the null distribution is simulated by shuffling the binned y
    labels within each z stratum. Strata with fewer than 2 members
    contribute no permutations and are counted in ``small_strata``.
    """
    if permutations < 99:
        raise ValueError("need at least 99 permutations")
    if seed < 0:
        raise ValueError("seed must be a nonnegative int")
    xb = equal_frequency_bins(x, bins)
    yb = equal_frequency_bins(y, bins)
    z = np.asarray(z)
    if z.shape != xb.shape:
        raise ValueError("z must match x and y in length")
    _, zc = np.unique(z, return_inverse=True)

    observed = conditional_mutual_information(xb, yb, zc)
    strata = [np.flatnonzero(zc == level) for level in range(zc.max() + 1)]
    movable = [s for s in strata if s.size >= 2]
    small = len(strata) - len(movable)

    exceed = 0
    for b in range(permutations):
        rng = np.random.default_rng([seed, b])
        yp = yb.copy()
        for members in movable:
            yp[members] = yb[members][rng.permutation(members.size)]
        if conditional_mutual_information(xb, yp, zc) >= observed:
            exceed += 1
    p = (1.0 + exceed) / (1.0 + permutations)
    return CmiTestResult(observed, p, int(bins), permutations, seed, small)


@dataclass(frozen=True)
class CorrelationReport:
    """One emitted analysis row, mirroring the layout of the result tables."""

    method: str
    measure: str
    target: str
    value: float | None
    p_value: float | None = None
    conditioning: str = ""
    group: str = ""
    measure_b: str = ""
    sample_count: int = 0
    sample_count_b: int = 0
    permutations: int = 0
    bins: int = 0
    seed: int = 0
    note: str = ""
