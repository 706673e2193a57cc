"""Synthetic workloads: a linear-regression task and gradient shape profiles."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import numpy.typing as npt

logger = logging.getLogger(__name__)

# Gradient-vector lengths of the three reference models, used only by the
# benchmark harness; no network is trained.
SHAPE_PROFILES: dict[str, int] = {
    "fcn": 101_770,
    "alexnet": 1_250_000,
    "lstm": 4_020_000,
}


@dataclass(frozen=True)
class LocalDataset:
    """One client's samples of y = w* . x + noise."""

    features: npt.NDArray[np.float64]
    targets: npt.NDArray[np.float64]

    @property
    def size(self) -> int:
        return int(self.targets.shape[0])


@dataclass(frozen=True)
class LinearRegressionTask:
    """Ground truth and per-client datasets of a synthetic regression."""

    ground_truth: npt.NDArray[np.float64]
    datasets: tuple[LocalDataset, ...]

    @property
    def dim(self) -> int:
        return int(self.ground_truth.shape[0])


def make_task(
    dim: int, sample_counts: list[int], noise: float = 0.0, seed: int = 0
) -> LinearRegressionTask:
    """Draw w* uniformly from [-1, 1]^d and standard-normal features per client."""
    rng = np.random.default_rng(seed)
    ground_truth = rng.uniform(-1.0, 1.0, size=dim)
    datasets = []
    for count in sample_counts:
        features = rng.standard_normal((count, dim))
        targets = features @ ground_truth
        if noise > 0:
            targets = targets + rng.normal(0.0, noise, size=count)
        datasets.append(LocalDataset(features, targets))
    logger.debug(f"Built regression task d={dim} over {len(datasets)} clients")
    return LinearRegressionTask(ground_truth, tuple(datasets))


def mse_gradient(
    w: npt.NDArray[np.float64],
    features: npt.NDArray[np.float64],
    targets: npt.NDArray[np.float64],
) -> npt.NDArray[np.float64]:
    """Gradient of mean((X w - y)^2): (2 / b) X^T (X w - y)."""
    if features.shape[1] != w.shape[0]:
        raise ValueError(f"model has {w.shape[0]} weights, data has {features.shape[1]} features")
    residual = features @ w - targets
    return 2.0 * (features.T @ residual) / features.shape[0]


def mse_loss(w: npt.NDArray[np.float64], task: LinearRegressionTask) -> float:
    """Mean squared error over the union of all client datasets."""
    features = np.concatenate([d.features for d in task.datasets])
    targets = np.concatenate([d.targets for d in task.datasets])
    residual = features @ w - targets
    return float(np.mean(residual**2))


def minibatch(
    dataset: LocalDataset, batch_size: int | None, seed: int, client_id: int, round_index: int
) -> LocalDataset:
    """Deterministic minibatch for (client, round); the full dataset if batch_size is None."""
    if batch_size is None or batch_size >= dataset.size:
        return dataset
    rng = np.random.default_rng([seed, client_id, round_index])
    picks = rng.choice(dataset.size, size=batch_size, replace=False)
    return LocalDataset(dataset.features[picks], dataset.targets[picks])


def synthetic_gradient(
    length: int, clip_bound: float, rng: np.random.Generator
) -> npt.NDArray[np.float64]:
    """Uniform values in [-c, c] standing in for a model's gradient."""
    return rng.uniform(-clip_bound, clip_bound, size=length)
