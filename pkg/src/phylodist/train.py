"""Adam optimization with cosine decay, and the distance-network training
loop with tree-distance-based early stopping.

Validation runs the full inference pipeline per epoch: forward pass to a
distance matrix, neighbor joining, Robinson-Foulds distance against the
generating tree.  The best-validation weights are restored at the end, so
training never returns a model worse than the best epoch seen.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .errors import ConfigError, TrainingDiverged
from .losses import batch_loss
from .net.architectures import forward_matrix, network_forward
from .net.layers import Dense, ScalarMLP
from .nj import neighbor_join
from .rng import substream
from .tree import covariance_matrix, patristic_matrix, rf_distance


@dataclass
class TrainConfig:
    learning_rate: float = 0.01
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    max_epochs: int = 100
    patience: int = 10
    batch_size: int = 4
    loss: str = "mae"
    gamma: float = 1.0
    decay_horizon: int = None  # steps; defaults to max_epochs * steps/epoch
    seed: int = 0

    def __post_init__(self):
        if self.max_epochs < 1 or self.batch_size < 1:
            raise ConfigError("max_epochs and batch_size must be >= 1")


class Adam:
    def __init__(self, params, cfg):
        self.params = list(params)
        self.cfg = cfg
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]
        self.t = 0

    def step(self, lr):
        self.t += 1
        b1, b2, eps = self.cfg.beta1, self.cfg.beta2, self.cfg.eps
        for k, p in enumerate(self.params):
            g = p.grad if p.grad is not None else np.zeros_like(p.data)
            self.m[k] = b1 * self.m[k] + (1 - b1) * g
            self.v[k] = b2 * self.v[k] + (1 - b2) * g * g
            m_hat = self.m[k] / (1 - b1**self.t)
            v_hat = self.v[k] / (1 - b2**self.t)
            p.data = p.data - lr * m_hat / (np.sqrt(v_hat) + eps)


def cosine_lr(step, horizon, initial):
    """Monotone nonincreasing cosine ramp from initial at 0 to 0 at horizon."""
    frac = min(max(step, 0), horizon) / horizon
    return initial * 0.5 * (1.0 + math.cos(math.pi * frac))


@dataclass
class TrainResult:
    history: list = field(default_factory=list)
    best_epoch: int = -1
    best_val_rf: float = math.inf


def training_targets(spec, tree, labels):
    """Target matrix for one alignment: patristic distances, or MRCA
    covariances for inner-product networks, aligned to the row order."""
    if spec.head == "inner_product":
        mat = covariance_matrix(tree)
        idx = [mat.labels.index(l) for l in labels]
        return mat.values[np.ix_(idx, idx)]
    mat = patristic_matrix(tree).reorder(labels)
    return mat.values


def _param_norm(params):
    return math.sqrt(sum(float(np.sum(p.data**2)) for p in params))


def validation_rf(spec, val_data):
    """Mean RF over (alignment, true tree) pairs via forward + NJ."""
    scores = []
    for aln, tree in val_data:
        d = network_forward(spec, aln)
        scores.append(rf_distance(neighbor_join(d), tree))
    return float(np.mean(scores))


def train(spec, train_data, cfg, val_data=None):
    """Optimize a NetworkSpec on (alignment, target) pairs.

    train_data: list of (Alignment, target ndarray) with targets in the
    alignment's row order (see training_targets).  val_data: list of
    (Alignment, PhyloTree) scored by RF each epoch.  Deterministic given
    cfg.seed under single-threaded execution.
    """
    params = spec.parameters()
    opt = Adam(params, cfg)
    order_rng = substream(cfg.seed, "batch-order")
    steps_per_epoch = max(1, math.ceil(len(train_data) / cfg.batch_size))
    horizon = cfg.decay_horizon or cfg.max_epochs * steps_per_epoch
    result = TrainResult()
    best_weights = None
    stale = 0
    step = 0
    for epoch in range(cfg.max_epochs):
        order = order_rng.permutation(len(train_data))
        epoch_losses = []
        for b in range(steps_per_epoch):
            batch = [train_data[i] for i in order[b * cfg.batch_size : (b + 1) * cfg.batch_size]]
            if not batch:
                continue
            pairs = []
            for aln, target in batch:
                _, out = forward_matrix(spec, aln)
                pairs.append((out, target))
            gamma = cfg.gamma if cfg.loss in ("logdet", "vonneumann") and spec.head != "inner_product" else None
            loss = batch_loss(cfg.loss, pairs, gamma=gamma)
            value = float(loss.data)
            if not math.isfinite(value):
                raise TrainingDiverged(epoch, b, _param_norm(params))
            loss.backward()
            lr = cosine_lr(step, horizon, cfg.learning_rate)
            opt.step(lr)
            step += 1
            epoch_losses.append(value)
        val_rf = validation_rf(spec, val_data) if val_data else math.nan
        lr_now = cosine_lr(step, horizon, cfg.learning_rate)
        result.history.append(
            {
                "epoch": epoch,
                "train_loss": float(np.mean(epoch_losses)),
                "val_rf": val_rf,
                "lr": lr_now,
            }
        )
        if val_data:
            if val_rf < result.best_val_rf - 1e-12:
                result.best_val_rf = val_rf
                result.best_epoch = epoch
                best_weights = [p.data.copy() for p in params]
                stale = 0
            else:
                stale += 1
                if stale > cfg.patience:
                    break
    if best_weights is not None:
        for p, w in zip(params, best_weights):
            p.data = w
    return result


def write_history_csv(history, path):
    with open(path, "w") as fh:
        fh.write("epoch,train_loss,val_rf,lr\n")
        for row in history:
            fh.write(f"{row['epoch']},{row['train_loss']!r},{row['val_rf']!r},{row['lr']!r}\n")


# -- scalar-map fitting ----------------------------------------------------------


def fit_scalar_head(
    x,
    y,
    method="pwl_lstsq",
    knots=64,
    hidden=(16, 16, 16, 16),
    epochs=400,
    learning_rate=0.01,
    seed=0,
):
    """Fit a scalar map to samples (x, y); returns a ScalarMLP.

    pwl_lstsq: single-hidden-layer ReLU map with knots spread over the x
    range and least-squares output weights (deterministic).  adam: an ELU
    MLP trained full-batch under MAE with cosine decay.
    """
    x = np.asarray(x, float).reshape(-1)
    y = np.asarray(y, float).reshape(-1)
    if x.size < 2 or x.size != y.size:
        raise ConfigError("need at least two (x, y) samples of equal length")
    if method == "pwl_lstsq":
        lo, hi = float(x.min()), float(x.max())
        if hi <= lo:
            raise ConfigError("degenerate sample set: all x identical")
        t = np.linspace(lo, hi, knots, endpoint=False)
        basis = np.concatenate([np.maximum(x[:, None] - t[None, :], 0.0), np.ones((x.size, 1))], axis=1)
        coeffs, *_ = np.linalg.lstsq(basis, y, rcond=None)
        h = Dense(np.ones((1, knots)), -t, "relu")
        out = Dense(coeffs[:-1][:, None], coeffs[-1:], "identity")
        return ScalarMLP([h, out])
    if method != "adam":
        raise ConfigError(f"unknown fit method {method!r}")
    rng = substream(seed, "scalar-head")
    mlp = ScalarMLP.random(1, hidden, rng, activation="elu")
    params = [p for _, p in mlp.params()]
    cfg = TrainConfig(learning_rate=learning_rate, max_epochs=epochs, seed=seed)
    opt = Adam(params, cfg)
    xs = x[:, None]
    for step in range(epochs):
        pred = mlp.forward(ad.Tensor(xs))
        loss = ad.mean(ad.absolute(pred - y))
        value = float(loss.data)
        if not math.isfinite(value):
            raise TrainingDiverged(step, 0, _param_norm(params))
        loss.backward()
        opt.step(cosine_lr(step, epochs, learning_rate))
    return mlp
