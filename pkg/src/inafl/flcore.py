"""Minimal federated-learning math: regularized empirical loss, a single-sample
SGD step, and count-weighted star aggregation.

Model parameters are plain 1-D float64 numpy arrays.
"""
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import InvalidInputError

LOSSES = ("squared", "logistic")


def as_params(w, d=None):
    w = np.asarray(w, dtype=np.float64)
    if w.ndim != 1:
        raise InvalidInputError(f"model parameters must be a vector, got shape {w.shape}")
    if d is not None and w.size != d:
        raise InvalidInputError(f"dimension mismatch: expected {d}, got {w.size}")
    if not np.all(np.isfinite(w)):
        raise InvalidInputError("model parameters must be finite")
    return w


@dataclass(frozen=True)
class LocalDataset:
    X: np.ndarray  # (n_k, d)
    y: np.ndarray  # (n_k,)

    def __post_init__(self):
        X = np.atleast_2d(np.asarray(self.X, dtype=np.float64))
        y = np.atleast_1d(np.asarray(self.y, dtype=np.float64))
        if X.shape[0] != y.shape[0]:
            raise InvalidInputError("X and y disagree on the number of samples")
        if X.shape[0] < 1:
            raise InvalidInputError("a dataset needs at least one sample")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)

    @property
    def count(self):
        return self.X.shape[0]

    @property
    def dim(self):
        return self.X.shape[1]


@dataclass(frozen=True)
class LossSpec:
    """Per-sample loss on the margin ``x @ w`` plus ``xi * 0.5 * ||w||^2``.

    Logistic loss expects labels in {-1, +1}.
    """

    loss: str = "squared"
    xi: float = 0.0
    eta: float = 0.1

    def __post_init__(self):
        if self.loss not in LOSSES:
            raise InvalidInputError(f"unknown loss {self.loss!r}")
        if self.xi < 0:
            raise InvalidInputError("xi must be nonnegative")
        if self.eta <= 0:
            raise InvalidInputError("eta must be positive")


def _sample_loss(z, y, kind):
    if kind == "squared":
        return 0.5 * (z - y) ** 2
    return np.logaddexp(0.0, -y * z)


def _sample_dloss(z, y, kind):
    """Derivative of the per-sample loss w.r.t. the margin z."""
    if kind == "squared":
        return z - y
    # d/dz log(1 + exp(-y z)) = -y * sigmoid(-y z)
    return -y * 0.5 * (1.0 + np.tanh(-0.5 * y * z))


def global_loss(w, datasets, spec):
    """Average per-sample loss over every dataset plus the L2 penalty."""
    if not datasets:
        raise InvalidInputError("need at least one dataset")
    d = datasets[0].dim
    w = as_params(w, d)
    total = 0.0
    n = 0
    for ds in datasets:
        if ds.dim != d:
            raise InvalidInputError("datasets disagree on dimension")
        total += float(np.sum(_sample_loss(ds.X @ w, ds.y, spec.loss)))
        n += ds.count
    return total / n + spec.xi * 0.5 * float(w @ w)


def sample_loss(w, dataset, spec, sample_index):
    """Loss of one sample including the penalty; its gradient drives the SGD step."""
    x, y = dataset.X[sample_index], dataset.y[sample_index]
    w = np.asarray(w, dtype=np.float64)
    return float(_sample_loss(x @ w, y, spec.loss)) + spec.xi * 0.5 * float(w @ w)


def local_sgd_update(psi, dataset, spec, sample_index):
    """One SGD step from ``psi`` on sample ``sample_index`` of ``dataset``."""
    psi = as_params(psi, dataset.dim)
    if not 0 <= sample_index < dataset.count:
        raise InvalidInputError(
            f"sample index {sample_index} out of range [0, {dataset.count})")
    x, y = dataset.X[sample_index], dataset.y[sample_index]
    grad = _sample_dloss(x @ psi, y, spec.loss) * x + spec.xi * psi
    return psi - spec.eta * grad


def local_epoch(psi, dataset, spec):
    """Apply local_sgd_update once per sample, in order."""
    w = as_params(psi, dataset.dim)
    for i in range(dataset.count):
        w = local_sgd_update(w, dataset, spec, i)
    return w


def weighted_mean(counts, params):
    """Count-weighted mean of the rows of ``params``.

    Sums are taken relative to the first row with compensated summation and
    divided once; the result is clipped to the componentwise member range,
    which the exact mean always lies in.
    """
    counts = np.asarray(counts, dtype=np.int64)
    params = np.ascontiguousarray(params, dtype=np.float64)
    total = int(counts.sum())
    ref = params[0]
    acc = kernels.weighted_sum(counts.astype(np.float64), np.ascontiguousarray(params - ref))
    out = ref + acc / total
    return np.clip(out, params.min(axis=0), params.max(axis=0))


def global_aggregate_star(locals_):
    """Count-weighted mean of ``(n_k, w_k)`` pairs, all computed at one server."""
    if len(locals_) == 0:
        raise InvalidInputError("cannot aggregate an empty list")
    counts = []
    rows = []
    d = None
    for n_k, w_k in locals_:
        if int(n_k) != n_k or n_k < 1:
            raise InvalidInputError(f"sample counts must be positive integers, got {n_k}")
        w_k = as_params(w_k, d)
        d = w_k.size
        counts.append(int(n_k))
        rows.append(w_k)
    return weighted_mean(counts, np.vstack(rows))
