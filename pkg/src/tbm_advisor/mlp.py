"""Feed-forward regressor mapping (control, context) features to the raw
optimality score, written directly on numpy.

The network is deliberately self-contained (no autograd runtime): the
recommendation engine needs exact derivatives of the output with respect
to the *inputs*, which fall out of the same backward pass used for
training. Hidden layers are logistic sigmoid, the output unit is linear,
training is mini-batch Adam on squared error with inverted dropout.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, fields, replace
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .domain import (
    SCHEMA_VERSION,
    FeatureScaler,
    GroundClass,
    MlpModel,
)
from .errors import (
    DimensionMismatchError,
    EmptyGridError,
    InvalidConfigError,
    NonFiniteLossError,
)


@dataclass(frozen=True)
class TrainConfig:
    """Training hyperparameters (defaults follow the case-study setup)."""

    hidden_layers: tuple = (50, 50, 50)
    epochs: int = 200
    batch_size: int = 200
    learning_rate: float = 0.01
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_epsilon: float = 1e-8
    dropout: float = 0.2
    seed: int = 0

    def __post_init__(self):
        if self.epochs <= 0:
            raise InvalidConfigError("epochs must be > 0")
        if not (0.0 <= self.dropout < 1.0):
            raise InvalidConfigError("dropout must lie in [0, 1)")
        if self.learning_rate <= 0:
            raise InvalidConfigError("learning_rate must be > 0")

    def to_dict(self) -> dict:
        return {
            "hidden_layers": list(self.hidden_layers),
            "epochs": self.epochs,
            "batch_size": self.batch_size,
            "learning_rate": self.learning_rate,
            "adam_beta1": self.adam_beta1,
            "adam_beta2": self.adam_beta2,
            "adam_epsilon": self.adam_epsilon,
            "dropout": self.dropout,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        known = {f.name for f in fields(cls)}
        d = {k: v for k, v in d.items() if k in known}
        d["hidden_layers"] = tuple(d.get("hidden_layers", (50, 50, 50)))
        return cls(**d)


def _sigmoid(z):
    # numerically stable piecewise form
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def forward(weights, biases, x: np.ndarray) -> np.ndarray:
    """Plain forward pass; x has shape (n, input_dim), returns (n,)."""
    a = x
    last = len(weights) - 1
    for i, (w, b) in enumerate(zip(weights, biases)):
        z = a @ w + b
        a = z if i == last else _sigmoid(z)
    return a[:, 0]


def forward_gradient(weights, biases, x: np.ndarray):
    """Forward pass plus exact d(output)/d(input) for each row of x.

    Returns (predictions (n,), gradients (n, input_dim)). The backward
    sweep reuses the hidden activations; with a single linear output unit
    the per-row Jacobian is just a vector.
    """
    activations = [x]
    a = x
    last = len(weights) - 1
    for i, (w, b) in enumerate(zip(weights, biases)):
        z = a @ w + b
        a = z if i == last else _sigmoid(z)
        activations.append(a)
    preds = a[:, 0]
    # delta starts as d(out)/d(z_last) = 1 for the single linear unit
    delta = np.ones((x.shape[0], 1))
    for i in range(last, 0, -1):
        delta = delta @ weights[i].T
        h = activations[i]
        delta = delta * h * (1.0 - h)  # sigmoid'(z) in terms of the activation
    grads = delta @ weights[0].T
    return preds, grads


class FeedForwardRegressor(BaseEstimator, RegressorMixin):
    """Sigmoid MLP regressor with input-gradient support.

    Parameters
    ----------
    hidden_layers : tuple of int
        Widths of the hidden layers.
    epochs, batch_size, learning_rate : Adam training loop controls;
        the final short batch of each epoch is used, not dropped.
    dropout : float
        Inverted-dropout rate on hidden activations (training only, so
        inference needs no rescaling).
    seed : int
        Single source of randomness (init, shuffling, dropout masks);
        identical seeds give bitwise-identical fits.
    """

    def __init__(
        self,
        hidden_layers=(50, 50, 50),
        epochs=200,
        batch_size=200,
        learning_rate=0.01,
        adam_beta1=0.9,
        adam_beta2=0.999,
        adam_epsilon=1e-8,
        dropout=0.2,
        seed=0,
    ):
        self.hidden_layers = hidden_layers
        self.epochs = epochs
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.adam_beta1 = adam_beta1
        self.adam_beta2 = adam_beta2
        self.adam_epsilon = adam_epsilon
        self.dropout = dropout
        self.seed = seed

    # -- training ---------------------------------------------------------

    def fit(self, X, y):
        cfg = TrainConfig(
            hidden_layers=tuple(self.hidden_layers),
            epochs=self.epochs,
            batch_size=self.batch_size,
            learning_rate=self.learning_rate,
            adam_beta1=self.adam_beta1,
            adam_beta2=self.adam_beta2,
            adam_epsilon=self.adam_epsilon,
            dropout=self.dropout,
            seed=self.seed,
        )
        X = check_array(X, dtype=float)
        y = np.asarray(y, dtype=float).reshape(-1)
        if y.shape[0] != X.shape[0]:
            raise DimensionMismatchError(
                f"X has {X.shape[0]} rows but y has {y.shape[0]}"
            )
        rng = np.random.default_rng(cfg.seed)
        sizes = (X.shape[1],) + tuple(cfg.hidden_layers) + (1,)
        weights, biases = _init_xavier(sizes, rng)

        m_w = [np.zeros_like(w) for w in weights]
        v_w = [np.zeros_like(w) for w in weights]
        m_b = [np.zeros_like(b) for b in biases]
        v_b = [np.zeros_like(b) for b in biases]
        step = 0
        n = X.shape[0]
        history = []
        for epoch in range(cfg.epochs):
            order = rng.permutation(n)
            epoch_loss = 0.0
            for start in range(0, n, cfg.batch_size):
                batch = order[start : start + cfg.batch_size]
                xb, yb = X[batch], y[batch]
                loss, grads_w, grads_b = _batch_gradients(
                    weights, biases, xb, yb, cfg.dropout, rng
                )
                epoch_loss += loss * len(batch)
                step += 1
                for i in range(len(weights)):
                    _adam_update(
                        weights[i], grads_w[i], m_w[i], v_w[i], step, cfg
                    )
                    _adam_update(biases[i], grads_b[i], m_b[i], v_b[i], step, cfg)
            epoch_loss /= n
            if not np.isfinite(epoch_loss):
                raise NonFiniteLossError(
                    f"training diverged at epoch {epoch}", epoch=epoch
                )
            history.append(epoch_loss)

        self.weights_ = weights
        self.biases_ = biases
        self.layer_sizes_ = sizes
        self.train_config_ = cfg
        self.loss_history_ = history
        self.n_features_in_ = X.shape[1]
        return self

    # -- inference ----------------------------------------------------------

    def _check_x(self, X):
        check_is_fitted(self, "weights_")
        X = np.asarray(X, dtype=float)
        single = X.ndim == 1
        if single:
            X = X[None, :]
        if X.shape[1] != self.layer_sizes_[0]:
            raise DimensionMismatchError(
                f"input has dimension {X.shape[1]}, model expects {self.layer_sizes_[0]}"
            )
        return X, single

    def predict(self, X):
        X, single = self._check_x(X)
        preds = forward(self.weights_, self.biases_, X)
        return float(preds[0]) if single else preds

    def input_gradient(self, X):
        """Exact gradient of the prediction w.r.t. each input feature."""
        X, single = self._check_x(X)
        _, grads = forward_gradient(self.weights_, self.biases_, X)
        return grads[0] if single else grads

    # -- snapshots -------------------------------------------------------------

    def to_model(self, feature_scaler: FeatureScaler, ground_class: GroundClass,
                 corpus_fingerprint: str = "", calibration=None) -> MlpModel:
        check_is_fitted(self, "weights_")
        return MlpModel(
            layer_sizes=tuple(self.layer_sizes_),
            weights=tuple(w.copy() for w in self.weights_),
            biases=tuple(b.copy() for b in self.biases_),
            feature_scaler=feature_scaler,
            ground_class=ground_class,
            train_config=self.train_config_.to_dict(),
            corpus_fingerprint=corpus_fingerprint,
            calibration=calibration,
        )

    @classmethod
    def from_model(cls, model: MlpModel) -> "FeedForwardRegressor":
        cfg = TrainConfig.from_dict(model.train_config) if model.train_config else TrainConfig()
        est = cls(
            hidden_layers=cfg.hidden_layers,
            epochs=cfg.epochs,
            batch_size=cfg.batch_size,
            learning_rate=cfg.learning_rate,
            adam_beta1=cfg.adam_beta1,
            adam_beta2=cfg.adam_beta2,
            adam_epsilon=cfg.adam_epsilon,
            dropout=cfg.dropout,
            seed=cfg.seed,
        )
        est.weights_ = [np.array(w, dtype=float) for w in model.weights]
        est.biases_ = [np.array(b, dtype=float) for b in model.biases]
        est.layer_sizes_ = tuple(model.layer_sizes)
        est.train_config_ = cfg
        est.loss_history_ = []
        est.n_features_in_ = model.layer_sizes[0]
        return est


def _init_xavier(sizes, rng):
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return weights, biases


def _batch_gradients(weights, biases, xb, yb, dropout, rng):
    """One forward/backward pass with inverted dropout on hidden layers."""
    last = len(weights) - 1
    activations = [xb]
    a = xb
    masks = []
    for i, (w, b) in enumerate(zip(weights, biases)):
        z = a @ w + b
        if i == last:
            a = z
        else:
            a = _sigmoid(z)
            if dropout > 0.0:
                mask = (rng.random(a.shape) >= dropout) / (1.0 - dropout)
                a = a * mask
                masks.append(mask)
            else:
                masks.append(None)
        activations.append(a)

    preds = activations[-1][:, 0]
    residual = preds - yb
    loss = float(np.mean(residual**2))
    m = xb.shape[0]

    grads_w = [None] * len(weights)
    grads_b = [None] * len(weights)
    delta = (2.0 / m) * residual[:, None]  # d(MSE)/d(z_last)
    for i in range(last, -1, -1):
        grads_w[i] = activations[i].T @ delta
        grads_b[i] = delta.sum(axis=0)
        if i > 0:
            delta = delta @ weights[i].T
            h = activations[i]
            mask = masks[i - 1]
            if mask is not None:
                # gradient flows through the same dropout mask; h already
                # includes the mask, so recover the pre-mask activation
                pre = h / np.where(mask == 0.0, 1.0, mask)
                delta = delta * mask * pre * (1.0 - pre)
            else:
                delta = delta * h * (1.0 - h)
    return loss, grads_w, grads_b


def _adam_update(param, grad, m, v, step, cfg: TrainConfig):
    m *= cfg.adam_beta1
    m += (1.0 - cfg.adam_beta1) * grad
    v *= cfg.adam_beta2
    v += (1.0 - cfg.adam_beta2) * grad**2
    m_hat = m / (1.0 - cfg.adam_beta1**step)
    v_hat = v / (1.0 - cfg.adam_beta2**step)
    param -= cfg.learning_rate * m_hat / (np.sqrt(v_hat) + cfg.adam_epsilon)


# --- model persistence ------------------------------------------------------------

def save_model(model: MlpModel, path) -> None:
    Path(path).write_text(json.dumps(model.to_dict(), sort_keys=True) + "\n")


def load_model(path) -> MlpModel:
    d = json.loads(Path(path).read_text())
    if d.get("schema_version") != SCHEMA_VERSION:
        raise InvalidConfigError(
            f"unsupported schema_version {d.get('schema_version')!r} in {path}"
        )
    return MlpModel.from_dict(d)


# --- hyperparameter search -----------------------------------------------------------

def kfold_grid_search(X, y, grid: dict, k: int = 10, base: TrainConfig | None = None):
    """Mean validation squared error per grid cell over k folds.

    The dataset is shuffled once (seeded from the base config) and split
    into k contiguous folds. Ties between cells are broken by fewer
    hidden layers, then fewer neurons, then lower learning rate.

    ``grid`` maps TrainConfig field names to candidate value lists, e.g.
    ``{"hidden_layers": [(50,), (50, 50, 50)], "learning_rate": [0.01]}``.

    Returns (best TrainConfig, list of (config, mean score) pairs).
    """
    if not grid or any(len(v) == 0 for v in grid.values()):
        raise EmptyGridError("hyperparameter grid is empty")
    base = base or TrainConfig()
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float).reshape(-1)
    n = X.shape[0]
    if n < k:
        raise InvalidConfigError(f"need at least k={k} samples, got {n}")

    rng = np.random.default_rng(base.seed)
    order = rng.permutation(n)
    fold_edges = np.linspace(0, n, k + 1, dtype=int)

    keys = sorted(grid.keys())
    results = []
    for combo in itertools.product(*(grid[key] for key in keys)):
        overrides = dict(zip(keys, combo))
        if "hidden_layers" in overrides:
            overrides["hidden_layers"] = tuple(overrides["hidden_layers"])
        cfg = replace(base, **overrides)
        fold_scores = []
        for f in range(k):
            val_idx = order[fold_edges[f] : fold_edges[f + 1]]
            train_idx = np.concatenate([order[: fold_edges[f]], order[fold_edges[f + 1] :]])
            est = FeedForwardRegressor(
                hidden_layers=cfg.hidden_layers,
                epochs=cfg.epochs,
                batch_size=cfg.batch_size,
                learning_rate=cfg.learning_rate,
                adam_beta1=cfg.adam_beta1,
                adam_beta2=cfg.adam_beta2,
                adam_epsilon=cfg.adam_epsilon,
                dropout=cfg.dropout,
                seed=cfg.seed,
            )
            est.fit(X[train_idx], y[train_idx])
            pred = est.predict(X[val_idx])
            fold_scores.append(float(np.mean((pred - y[val_idx]) ** 2)))
        results.append((cfg, float(np.mean(fold_scores))))

    def sort_key(item):
        cfg, score = item
        return (
            score,
            len(cfg.hidden_layers),
            sum(cfg.hidden_layers),
            cfg.learning_rate,
        )

    best = min(results, key=sort_key)[0]
    return best, results
