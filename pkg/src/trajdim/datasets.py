"""Built-in desk-scale datasets.

All generators are deterministic in their seed and return float64
features. Classification labels are int64 class ids; regression targets
are float64. ``load_dataset`` produces an equal-size held-out split used
as the population-risk proxy.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True, eq=False)
class Dataset:
    name: str
    task: str  # "classification" | "regression"
    x_train: np.ndarray
    y_train: np.ndarray
    x_test: np.ndarray
    y_test: np.ndarray

    @property
    def n_features(self) -> int:
        return self.x_train.shape[1]

    @property
    def n_classes(self) -> int:
        if self.task != "classification":
            raise ValueError("n_classes is only defined for classification")
        return int(self.y_train.max()) + 1


def _shuffled(rng, x, y):
    order = rng.permutation(len(y))
    return x[order], y[order]


def gaussian_blobs(n: int, separation: float = 2.0, spread: float = 1.0, seed: int = 0):
    """Two-class isotropic Gaussian blobs in the plane."""
    rng = np.random.default_rng(seed)
    half = n // 2
    labels = np.array([0] * half + [1] * (n - half), dtype=np.int64)
    centers = np.array([[-separation / 2, 0.0], [separation / 2, 0.0]])
    x = centers[labels] + rng.normal(scale=spread, size=(n, 2))
    return _shuffled(rng, x, labels)


def two_moons(n: int, noise: float = 0.15, seed: int = 0):
    """The classic interleaved half-circles, two classes."""
    rng = np.random.default_rng(seed)
    half = n // 2
    t_outer = np.pi * rng.random(half)
    t_inner = np.pi * rng.random(n - half)
    outer = np.column_stack([np.cos(t_outer), np.sin(t_outer)])
    inner = np.column_stack([1.0 - np.cos(t_inner), 0.5 - np.sin(t_inner)])
    x = np.vstack([outer, inner]) + rng.normal(scale=noise, size=(n, 2))
    y = np.array([0] * half + [1] * (n - half), dtype=np.int64)
    return _shuffled(rng, x, y)


def ripple_surface(n: int, noise: float = 0.05, seed: int = 0):
    """Smooth 2-D regression surface z = sin(pi u) * cos(pi v) + noise."""
    rng = np.random.default_rng(seed)
    x = rng.uniform(-1.0, 1.0, size=(n, 2))
    y = np.sin(np.pi * x[:, 0]) * np.cos(np.pi * x[:, 1])
    y = y + rng.normal(scale=noise, size=n)
    return x, y


def xor_points():
    """The four XOR corners; the canonical non-linearly-separable toy set."""
    x = np.array([[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]])
    y = np.array([0, 1, 1, 0], dtype=np.int64)
    return x, y


_GENERATORS = {
    "blobs": (gaussian_blobs, "classification"),
    "moons": (two_moons, "classification"),
    "ripple": (ripple_surface, "regression"),
}

DATASET_NAMES = tuple(sorted(_GENERATORS))


def load_dataset(name: str, train_size: int, seed: int = 0, **kwargs) -> Dataset:
    """Generate `train_size` training points plus an equal held-out split."""
    if name not in _GENERATORS:
        raise ValueError(f"unknown dataset {name!r}; choose from {DATASET_NAMES}")
    if train_size < 2:
        raise ValueError("train_size must be >= 2")
    gen, task = _GENERATORS[name]
    x, y = gen(2 * train_size, seed=seed, **kwargs)
    return Dataset(
        name=name,
        task=task,
        x_train=x[:train_size],
        y_train=y[:train_size],
        x_test=x[train_size:],
        y_test=y[train_size:],
    )
