"""Persistence-dimension estimation by power-law regression.

The growth rate of degree-0 total persistence under subsampling encodes
the fractal dimension of a bounded point cloud: draw subsamples of
increasing size n, compute the total persistence of each (sum of spanning
tree edge lengths to the power alpha), and regress log(mean total
persistence) on log(n). With slope m the estimated dimension is
alpha / (1 - m).

Collapsed inputs (all iterates equal, or persistence growing at least
linearly) produce a structured degenerate estimate rather than NaNs.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .metricspace import DistanceOracle, subsample_indices
from .ph0 import minimum_spanning_tree, total_persistence

DEFAULT_SAMPLE_SIZES = (1000, 1500, 2000, 2500, 3000, 3500, 4000, 4500, 5000)


@dataclass(frozen=True)
class EstimatorConfig:
    """Knobs for :func:`estimate_dimension`.

    ``sample_sizes=None`` uses the default grid clipped to the number of
    captured iterates. Seeds must be nonnegative ints; every subsample
    draw derives its own stream from (seed, size, restart) so results are
    independent of evaluation order.
    """

    alpha: float = 1.0
    sample_sizes: tuple[int, ...] | None = None
    restarts_per_size: int = 5
    seed: int = 0

    def __post_init__(self):
        if self.alpha <= 0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")
        if self.restarts_per_size < 1:
            raise ValueError("restarts_per_size must be >= 1")
        if self.seed < 0:
            raise ValueError("seed must be a nonnegative int")
        if self.sample_sizes is not None:
            sizes = tuple(int(s) for s in self.sample_sizes)
            if len(sizes) < 2 or any(b <= a for a, b in zip(sizes, sizes[1:])):
                raise ValueError("sample_sizes must be strictly ascending")
            if sizes[0] < 2:
                raise ValueError("sample sizes must be >= 2")
            object.__setattr__(self, "sample_sizes", sizes)


@dataclass(frozen=True)
class DimEstimate:
    """One dimension estimate: per-size mean total persistence, the
    log-log fit, and the resulting dimension (None when degenerate)."""

    metric: str
    alpha: float
    sample_sizes: tuple[int, ...]
    mean_total_persistence: tuple[float, ...]
    restarts_per_size: int
    seed: int
    slope: float | None
    intercept: float | None
    r_squared: float | None
    dimension: float | None
    degenerate: bool
    reason: str | None


def default_sample_sizes(k: int, count: int = 9) -> tuple[int, ...]:
    """Sample-size grid for a space of k points.

    For k >= 5000 this is the standard 1000..5000 grid; smaller captures
    get `count` evenly spaced sizes from ~k/5 up to k (the default grid
    clipped to k would leave too few regression points).
    """
    if k >= DEFAULT_SAMPLE_SIZES[-1]:
        return DEFAULT_SAMPLE_SIZES
    lo = max(2, round(k / 5))
    sizes = np.unique(np.linspace(lo, k, count).round().astype(int))
    sizes = sizes[sizes >= 2]
    if sizes.size < 3:
        raise ValueError(f"cannot build a sample-size grid for k={k}")
    return tuple(int(s) for s in sizes)


def _fit_loglog(sizes: np.ndarray, means: np.ndarray) -> tuple[float, float, float]:
    """Unweighted least squares of log(mean) on log(size); returns
    (slope, intercept, r_squared)."""
    x = np.log(sizes.astype(np.float64))
    y = np.log(means)
    xc = x - x.mean()
    yc = y - y.mean()
    sxx = float(xc @ xc)
    slope = float(xc @ yc) / sxx
    intercept = float(y.mean() - slope * x.mean())
    ss_res = float(np.sum((y - (slope * x + intercept)) ** 2))
    ss_tot = float(yc @ yc)
    if ss_tot == 0.0:
        r2 = 1.0 if ss_res == 0.0 else 0.0
    else:
        r2 = 1.0 - ss_res / ss_tot
    return slope, intercept, r2


def fit_dimension(
    sample_sizes,
    mean_persistence,
    alpha: float = 1.0,
    *,
    metric: str = "synthetic",
    restarts_per_size: int = 1,
    seed: int = 0,
) -> DimEstimate:
    """Fit the power law to precomputed (size, mean total persistence)
    pairs and invert the slope into a dimension estimate."""
    sizes = np.asarray(sample_sizes, dtype=np.int64)
    means = np.asarray(mean_persistence, dtype=np.float64)
    if sizes.ndim != 1 or sizes.size != means.size:
        raise ValueError("sample sizes and persistence values must align")
    if sizes.size < 3:
        raise ValueError("need at least 3 sample sizes to fit")
    if np.any(sizes[1:] <= sizes[:-1]):
        raise ValueError("sample sizes must be strictly ascending")
    common = dict(
        metric=metric,
        alpha=float(alpha),
        sample_sizes=tuple(int(s) for s in sizes),
        mean_total_persistence=tuple(float(m) for m in means),
        restarts_per_size=restarts_per_size,
        seed=seed,
    )
    zero = np.flatnonzero(means <= 0)
    if zero.size:
        return DimEstimate(
            **common,
            slope=None,
            intercept=None,
            r_squared=None,
            dimension=None,
            degenerate=True,
            reason=f"zero total persistence at sample size {int(sizes[zero[0]])}",
        )
    slope, intercept, r2 = _fit_loglog(sizes, means)
    if slope >= 1.0:
        return DimEstimate(
            **common,
            slope=slope,
            intercept=intercept,
            r_squared=r2,
            dimension=None,
            degenerate=True,
            reason="non-contracting persistence growth (slope >= 1)",
        )
    return DimEstimate(
        **common,
        slope=slope,
        intercept=intercept,
        r_squared=r2,
        dimension=float(alpha) / (1.0 - slope),
        degenerate=False,
        reason=None,
    )


def estimate_dimension(
    oracle: DistanceOracle, config: EstimatorConfig = EstimatorConfig()
) -> DimEstimate:
    """Estimate the degree-0 persistence dimension of the oracle's space.

    For each configured sample size, draws ``restarts_per_size``
    independent subsamples, computes each subsample's total persistence
    through its minimum spanning tree, and averages; the log-log fit over
    the averaged values yields the dimension. Deterministic for a fixed
    seed regardless of execution order.
    """
    k = oracle.point_count
    if config.sample_sizes is None:
        sizes = tuple(s for s in DEFAULT_SAMPLE_SIZES if s <= k)
    else:
        sizes = config.sample_sizes
        if sizes[-1] > k:
            raise ValueError(
                f"largest sample size {sizes[-1]} exceeds point count {k}"
            )
    if len(sizes) < 3:
        raise ValueError(
            f"need at least 3 usable sample sizes for k={k}; pass an "
            f"explicit grid (e.g. default_sample_sizes({k}))"
        )

    means = []
    for n in sizes:
        values = []
        for r in range(config.restarts_per_size):
            sub = subsample_indices(k, n, seed=[config.seed, n, r])
            bars = minimum_spanning_tree(oracle, sub).barcode()
            values.append(total_persistence(bars, config.alpha))
        means.append(math.fsum(values) / len(values))

    return fit_dimension(
        sizes,
        means,
        config.alpha,
        metric=oracle.kind.value,
        restarts_per_size=config.restarts_per_size,
        seed=config.seed,
    )


def growth_exponent(est: DimEstimate) -> float:
    """Predicted subsample growth exponent 1 - alpha/dimension, reported
    alongside the fitted slope."""
    if est.degenerate or est.dimension is None:
        raise ValueError("growth exponent is undefined for degenerate estimates")
    return 1.0 - est.alpha / est.dimension
