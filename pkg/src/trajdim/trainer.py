"""Desk-scale experiment generator.

A small ReLU multilayer perceptron trained with plain minibatch SGD (no
momentum, no weight decay, constant step size) implements the capture
protocol: train until the convergence rule fires, then run a fixed
number of extra iterations recording the flattened weight vector and the
per-sample training losses after every step. Those captures feed the
metric-space and dimension modules; companion measures (final-iterate
norm, mean step size, learning-rate/batch-size ratio, generalization
gaps) complete each run record.

Everything is deterministic given the config seed: weight init and batch
shuffling draw from one stream, label randomization for adversarial
initialization from a second, estimator seeds are derived per cell.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .datasets import Dataset
from .dimension import (
    DimEstimate,
    EstimatorConfig,
    default_sample_sizes,
    estimate_dimension,
)
from .metricspace import (
    PRECOMPUTE_LIMIT,
    DistanceOracle,
    LossMatrix,
    WeightTrajectory,
)
from .records import RunRecord


class DivergenceError(RuntimeError):
    def __init__(self, iteration: int):
        super().__init__(f"training diverged (non-finite loss) at iteration {iteration}")
        self.iteration = iteration


class NonConvergenceError(RuntimeError):
    pass


class MemoryBudgetError(RuntimeError):
    pass


@dataclass(frozen=True)
class MlpSpec:
    """Fully connected ReLU network: (input, hidden..., output) widths."""

    layer_widths: tuple[int, ...]
    task: str = "classification"

    def __post_init__(self):
        widths = tuple(int(w) for w in self.layer_widths)
        if len(widths) < 3:
            raise ValueError("need input, at least one hidden, and output layer")
        if min(widths) < 1:
            raise ValueError("layer widths must be >= 1")
        if self.task not in ("classification", "regression"):
            raise ValueError(f"unknown task {self.task!r}")
        if self.task == "regression" and widths[-1] != 1:
            raise ValueError("regression output layer must have width 1")
        if self.task == "classification" and widths[-1] < 2:
            raise ValueError("classification needs at least 2 output units")
        object.__setattr__(self, "layer_widths", widths)

    def with_width_multiplier(self, multiplier: int) -> "MlpSpec":
        """Scale every hidden width by an integer multiplier."""
        if multiplier < 1:
            raise ValueError("width multiplier must be >= 1")
        w = self.layer_widths
        hidden = tuple(h * multiplier for h in w[1:-1])
        return MlpSpec((w[0],) + hidden + (w[-1],), self.task)


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float
    batch_size: int
    max_iterations: int = 50_000
    convergence: str = "auto"  # auto | accuracy | loss
    loss_threshold: float = 1e-3
    capture_count: int = 5000
    seed: int = 0
    init: str = "standard"  # standard | adversarial
    memory_budget: int = 512 * 2**20

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.capture_count < 2:
            raise ValueError("capture_count must be >= 2")
        if self.seed < 0:
            raise ValueError("seed must be a nonnegative int")
        if self.convergence not in ("auto", "accuracy", "loss"):
            raise ValueError(f"unknown convergence rule {self.convergence!r}")
        if self.init not in ("standard", "adversarial"):
            raise ValueError(f"unknown init mode {self.init!r}")


@dataclass
class TrainState:
    params: list[tuple[np.ndarray, np.ndarray]]
    iterations: int
    converged: bool
    rng: np.random.Generator


@dataclass(frozen=True, eq=False)
class CaptureResult:
    trajectory: WeightTrajectory
    loss_matrix: LossMatrix
    converged: bool
    iterations_to_converge: int


def param_count(spec: MlpSpec) -> int:
    w = spec.layer_widths
    return sum(w[i] * w[i + 1] + w[i + 1] for i in range(len(w) - 1))


def init_params(spec: MlpSpec, rng: np.random.Generator):
    """Zero-mean uniform weights scaled by 1/sqrt(fan-in); zero biases."""
    params = []
    w = spec.layer_widths
    for fan_in, fan_out in zip(w[:-1], w[1:]):
        bound = 1.0 / math.sqrt(fan_in)
        params.append(
            (rng.uniform(-bound, bound, size=(fan_in, fan_out)), np.zeros(fan_out))
        )
    return params


def flatten_params(params) -> np.ndarray:
    return np.concatenate([np.concatenate([w.ravel(), b]) for w, b in params])


def unflatten_params(spec: MlpSpec, flat: np.ndarray):
    params = []
    w = spec.layer_widths
    pos = 0
    for fan_in, fan_out in zip(w[:-1], w[1:]):
        weight = flat[pos : pos + fan_in * fan_out].reshape(fan_in, fan_out)
        pos += fan_in * fan_out
        bias = flat[pos : pos + fan_out]
        pos += fan_out
        params.append((weight.copy(), bias.copy()))
    if pos != flat.size:
        raise ValueError("flat vector does not match the network's parameter count")
    return params


def _forward(params, x):
    acts = [x]
    a = x
    for weight, bias in params[:-1]:
        a = np.maximum(a @ weight + bias, 0.0)
        acts.append(a)
    weight, bias = params[-1]
    return a @ weight + bias, acts


def per_sample_losses(spec: MlpSpec, params, x, y) -> np.ndarray:
    """Continuous per-sample training losses (never zero-one)."""
    with np.errstate(over="ignore", invalid="ignore"):
        out, _ = _forward(params, x)
        if spec.task == "classification":
            m = out.max(axis=1)
            lse = m + np.log(np.sum(np.exp(out - m[:, None]), axis=1))
            return lse - out[np.arange(len(y)), y]
        return (out[:, 0] - y) ** 2


def evaluate(spec: MlpSpec, params, x, y) -> tuple[float, float | None]:
    """Mean loss and (for classification) accuracy on a dataset."""
    losses = per_sample_losses(spec, params, x, y)
    mean_loss = float(losses.mean())
    if spec.task != "classification":
        return mean_loss, None
    out, _ = _forward(params, x)
    accuracy = float(np.mean(out.argmax(axis=1) == y))
    return mean_loss, accuracy


def _sgd_step(spec: MlpSpec, params, xb, yb, lr: float) -> float:
    """One minibatch step in place; returns the batch mean loss."""
    with np.errstate(over="ignore", invalid="ignore"):
        out, acts = _forward(params, xb)
        m = len(xb)
        if spec.task == "classification":
            shift = out - out.max(axis=1, keepdims=True)
            expd = np.exp(shift)
            probs = expd / expd.sum(axis=1, keepdims=True)
            lse = np.log(expd.sum(axis=1)) + out.max(axis=1)
            loss = float(np.mean(lse - out[np.arange(m), yb]))
            delta = probs
            delta[np.arange(m), yb] -= 1.0
            delta /= m
        else:
            residual = out[:, 0] - yb
            loss = float(np.mean(residual**2))
            delta = (2.0 * residual / m)[:, None]
        for layer in reversed(range(len(params))):
            weight, bias = params[layer]
            grad_w = acts[layer].T @ delta
            grad_b = delta.sum(axis=0)
            if layer > 0:
                delta = (delta @ weight.T) * (acts[layer] > 0)
            weight -= lr * grad_w
            bias -= lr * grad_b
    return loss


def _rule(spec: MlpSpec, cfg: TrainConfig) -> str:
    if cfg.convergence != "auto":
        if cfg.convergence == "accuracy" and spec.task != "classification":
            raise ValueError("accuracy rule requires a classification task")
        return cfg.convergence
    return "accuracy" if spec.task == "classification" else "loss"


def _is_converged(spec: MlpSpec, params, x, y, rule: str, threshold: float) -> bool:
    loss, accuracy = evaluate(spec, params, x, y)
    if not np.isfinite(loss):
        return False
    if rule == "accuracy":
        return accuracy == 1.0
    return loss < threshold


def train_to_convergence(
    spec: MlpSpec, x, y, cfg: TrainConfig, start_params=None
) -> TrainState:
    """Minibatch SGD (fresh shuffle each epoch) until the convergence rule
    fires, checked at epoch boundaries, or the iteration cap is hit."""
    x = np.ascontiguousarray(x, dtype=np.float64)
    n = x.shape[0]
    if n == 0:
        raise ValueError("dataset is empty")
    if cfg.batch_size > n:
        raise ValueError(f"batch_size {cfg.batch_size} exceeds dataset size {n}")
    y = np.asarray(y)
    rule = _rule(spec, cfg)

    rng = np.random.default_rng([cfg.seed, 0])
    if start_params is None:
        params = init_params(spec, rng)
    else:
        params = [(w.copy(), b.copy()) for w, b in start_params]

    iterations = 0
    converged = _is_converged(spec, params, x, y, rule, cfg.loss_threshold)
    while not converged and iterations < cfg.max_iterations:
        order = rng.permutation(n)
        for lo in range(0, n, cfg.batch_size):
            if iterations >= cfg.max_iterations:
                break
            batch = order[lo : lo + cfg.batch_size]
            loss = _sgd_step(spec, params, x[batch], y[batch], cfg.learning_rate)
            iterations += 1
            if not np.isfinite(loss):
                raise DivergenceError(iterations)
        converged = _is_converged(spec, params, x, y, rule, cfg.loss_threshold)
    return TrainState(params, iterations, converged, rng)


def capture(spec: MlpSpec, x, y, cfg: TrainConfig, state: TrainState) -> CaptureResult:
    """Continue SGD for ``capture_count`` steps from a converged state,
    recording the flattened weights and the per-sample training losses
    after every step. Advances ``state`` in place."""
    if not state.converged:
        raise ValueError("capture requires a converged training state")
    x = np.ascontiguousarray(x, dtype=np.float64)
    y = np.asarray(y)
    n = x.shape[0]
    d = param_count(spec)
    needed = cfg.capture_count * (d + n) * 8
    if needed > cfg.memory_budget:
        raise MemoryBudgetError(
            f"capture needs ~{needed / 2**20:.0f} MiB "
            f"(budget {cfg.memory_budget / 2**20:.0f} MiB)"
        )
    weights = np.empty((cfg.capture_count, d))
    losses = np.empty((cfg.capture_count, n))
    t = 0
    while t < cfg.capture_count:
        order = state.rng.permutation(n)
        for lo in range(0, n, cfg.batch_size):
            if t >= cfg.capture_count:
                break
            batch = order[lo : lo + cfg.batch_size]
            loss = _sgd_step(spec, state.params, x[batch], y[batch], cfg.learning_rate)
            if not np.isfinite(loss):
                raise DivergenceError(state.iterations + t + 1)
            weights[t] = flatten_params(state.params)
            losses[t] = per_sample_losses(spec, state.params, x, y)
            t += 1
    return CaptureResult(
        trajectory=WeightTrajectory(weights),
        loss_matrix=LossMatrix(losses),
        converged=True,
        iterations_to_converge=state.iterations,
    )


def adversarial_initialization(spec: MlpSpec, x, y, cfg: TrainConfig):
    """Pre-train on uniformly shuffled labels to 100% train accuracy and
    return the final weights, to be used as the second phase's init."""
    if spec.task != "classification":
        raise ValueError("adversarial initialization requires classification")
    y = np.asarray(y)
    label_rng = np.random.default_rng([cfg.seed, 1])
    y_random = y[label_rng.permutation(y.size)]
    pre_cfg = TrainConfig(
        learning_rate=cfg.learning_rate,
        batch_size=cfg.batch_size,
        max_iterations=cfg.max_iterations,
        convergence="accuracy",
        capture_count=cfg.capture_count,
        seed=cfg.seed,
        memory_budget=cfg.memory_budget,
    )
    state = train_to_convergence(spec, x, y_random, pre_cfg)
    if not state.converged:
        raise NonConvergenceError(
            f"random-label pre-training did not reach 100% accuracy within "
            f"{cfg.max_iterations} iterations"
        )
    return state.params


def compute_measures(
    spec: MlpSpec, cap: CaptureResult, train_eval, test_eval, cfg: TrainConfig
):
    """Companion measures of one run; returns (measures, extras) where
    extras holds the signed gap variants kept out of the record table."""
    if train_eval is None or test_eval is None:
        raise ValueError("train and test evaluation sets are required")
    if not cap.converged:
        raise ValueError("measures require a converged capture")
    w = cap.trajectory.values
    final = w[-1]
    total = 0.0
    for t in range(w.shape[0] - 1):
        step = w[t + 1] - w[t]
        total += math.sqrt(step @ step)
    measures = {
        "norm": float(np.sqrt(final @ final)),
        "step_size": total / (w.shape[0] - 1),
        "lb_ratio": cfg.learning_rate / cfg.batch_size,
    }
    params = unflatten_params(spec, final)
    train_loss, train_acc = evaluate(spec, params, *train_eval)
    test_loss, test_acc = evaluate(spec, params, *test_eval)
    signed_loss_gap = test_loss - train_loss
    measures["gap_loss"] = abs(signed_loss_gap)
    extras = {
        "train_loss": train_loss,
        "test_loss": test_loss,
        "gap_loss_signed": signed_loss_gap,
    }
    if spec.task == "classification":
        signed_acc_gap = train_acc - test_acc
        measures["gap_accuracy"] = abs(signed_acc_gap)
        measures["test_accuracy"] = test_acc
        extras["train_accuracy"] = train_acc
        extras["gap_accuracy_signed"] = signed_acc_gap
    return measures, extras


def derive_seed(*parts: int) -> int:
    """Stable nonnegative int from integer parts, for derived streams."""
    return int(np.random.SeedSequence(list(parts)).generate_state(1)[0])


@dataclass(frozen=True)
class SweepConfig:
    learning_rates: tuple[float, ...]
    batch_sizes: tuple[int, ...]
    seeds: tuple[int, ...]
    width_multipliers: tuple[int, ...] = (1,)
    hidden_widths: tuple[int, ...] = (16,)
    init: str = "standard"
    max_iterations: int = 40_000
    capture_count: int = 400
    loss_threshold: float = 1e-3
    alpha: float = 1.0
    restarts_per_size: int = 3
    sample_sizes: tuple[int, ...] | None = None
    label_noise: float = 0.0

    def __post_init__(self):
        for grid, name in (
            (self.learning_rates, "learning_rates"),
            (self.batch_sizes, "batch_sizes"),
            (self.seeds, "seeds"),
            (self.width_multipliers, "width_multipliers"),
        ):
            if len(grid) == 0:
                raise ValueError(f"{name} must be non-empty")
        if not 0.0 <= self.label_noise < 1.0:
            raise ValueError("label_noise must lie in [0, 1)")


@dataclass
class SweepResult:
    records: list[RunRecord]
    failures: dict[str, str]
    extras: dict[str, dict]


def _dim_measure(oracle: DistanceOracle, est_cfg: EstimatorConfig) -> DimEstimate:
    return estimate_dimension(oracle, est_cfg)


def grid_sweep(dataset: Dataset, sweep: SweepConfig, on_cell=None) -> SweepResult:
    """Run the full pipeline for every grid cell x seed.

    Each cell trains, captures, estimates both dimensions, and computes
    the companion measures. Failed cells keep their record (hyperparams
    with empty measures) and land in ``failures`` with a reason; nothing
    is dropped silently. ``on_cell(record, capture, info)`` fires after
    each successful cell so callers can persist artifacts.
    """
    records: list[RunRecord] = []
    failures: dict[str, str] = {}
    extras: dict[str, dict] = {}
    out_width = dataset.n_classes if dataset.task == "classification" else 1
    cell_index = 0
    for width in sweep.width_multipliers:
        for lr in sweep.learning_rates:
            for batch in sweep.batch_sizes:
                for seed in sweep.seeds:
                    run_id = (
                        f"{dataset.name}_lr{lr:g}_b{batch}_w{width}_s{seed}"
                        + ("_adv" if sweep.init == "adversarial" else "")
                    )
                    record = RunRecord(
                        run_id=run_id,
                        learning_rate=lr,
                        batch_size=batch,
                        width=width,
                        seed=seed,
                        dataset=dataset.name,
                        init=sweep.init,
                    )
                    spec = MlpSpec(
                        (dataset.n_features,)
                        + tuple(h * width for h in sweep.hidden_widths)
                        + (out_width,),
                        dataset.task,
                    )
                    cfg = TrainConfig(
                        learning_rate=lr,
                        batch_size=batch,
                        max_iterations=sweep.max_iterations,
                        loss_threshold=sweep.loss_threshold,
                        capture_count=sweep.capture_count,
                        seed=seed,
                        init=sweep.init,
                    )
                    y_train = dataset.y_train
                    if sweep.label_noise > 0.0 and dataset.task == "classification":
                        noise_rng = np.random.default_rng([seed, 2, cell_index])
                        flip = (
                            noise_rng.random(y_train.size) < sweep.label_noise
                        )
                        y_train = y_train.copy()
                        shift = noise_rng.integers(
                            1, dataset.n_classes, size=int(flip.sum())
                        )
                        y_train[flip] = (y_train[flip] + shift) % dataset.n_classes
                    try:
                        start = None
                        if sweep.init == "adversarial":
                            start = adversarial_initialization(
                                spec, dataset.x_train, y_train, cfg
                            )
                        state = train_to_convergence(
                            spec, dataset.x_train, y_train, cfg, start_params=start
                        )
                        if not state.converged:
                            failures[run_id] = (
                                f"no convergence within {cfg.max_iterations} iterations"
                            )
                            records.append(record)
                            cell_index += 1
                            continue
                        cap = capture(spec, dataset.x_train, y_train, cfg, state)
                        measures, cell_extras = compute_measures(
                            spec,
                            cap,
                            (dataset.x_train, y_train),
                            (dataset.x_test, dataset.y_test),
                            cfg,
                        )
                        sizes = sweep.sample_sizes or default_sample_sizes(
                            cap.trajectory.iterates
                        )
                        k = cap.trajectory.iterates
                        estimates = {}
                        for metric_id, (key, oracle) in enumerate(
                            (
                                (
                                    "dim_euclidean",
                                    DistanceOracle.euclidean(
                                        cap.trajectory,
                                        precompute=k <= PRECOMPUTE_LIMIT,
                                    ),
                                ),
                                (
                                    "dim_loss",
                                    DistanceOracle.loss_based(
                                        cap.loss_matrix,
                                        precompute=k <= PRECOMPUTE_LIMIT,
                                    ),
                                ),
                            )
                        ):
                            est = _dim_measure(
                                oracle,
                                EstimatorConfig(
                                    alpha=sweep.alpha,
                                    sample_sizes=sizes,
                                    restarts_per_size=sweep.restarts_per_size,
                                    seed=derive_seed(seed, cell_index, metric_id),
                                ),
                            )
                            estimates[key] = est
                            if not est.degenerate:
                                measures[key] = est.dimension
                            else:
                                cell_extras[f"{key}_degenerate"] = est.reason
                        record.measures.update(measures)
                        cell_extras["iterations_to_converge"] = (
                            cap.iterations_to_converge
                        )
                        records.append(record)
                        extras[run_id] = cell_extras
                        if on_cell is not None:
                            on_cell(record, cap, {"estimates": estimates, **cell_extras})
                    except (
                        DivergenceError,
                        NonConvergenceError,
                        MemoryBudgetError,
                    ) as exc:
                        failures[run_id] = str(exc)
                        records.append(record)
                    cell_index += 1
    return SweepResult(records=records, failures=failures, extras=extras)
