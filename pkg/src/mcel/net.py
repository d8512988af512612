"""Small fully-connected softmax classifier with manual backprop and
SGD+Momentum training.

Hidden layers are ReLU; the output layer is a max-shifted softmax. The
trainer plugs in any mixing spec from the loss module: fixed specs just
change the target rows, soft (trainable) specs also receive momentum
updates on their mixing parameters each batch.
"""

import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import DataFormatError, DimensionError, TrainingDivergedError
from .losses import (
    EPS_MARGIN,
    PROB_CLAMP,
    MatrixMixing,
    PerClassMixing,
    PenaltyWeights,
    SimpleMixing,
    softmax,
)

CHECKPOINT_MAGIC = b"MCEL"
CHECKPOINT_VERSION = 1


@dataclass
class MlpModel:
    layer_sizes: tuple
    weights: list  # per layer, shape (out, in)
    biases: list  # per layer, shape (out,)

    @property
    def num_classes(self):
        return self.layer_sizes[-1]

    def copy(self):
        return MlpModel(
            self.layer_sizes,
            [w.copy() for w in self.weights],
            [b.copy() for b in self.biases],
        )

    def check_finite(self):
        for w in self.weights + self.biases:
            if not np.all(np.isfinite(w)):
                return False
        return True


@dataclass
class TrainConfig:
    learning_rate: float = 0.1
    momentum: float = 0.1
    weight_decay: float = 1e-3
    epochs: int = 100
    batch_size: int = 32
    lr_decay: float = 0.0
    seed: int = 0
    mixing: object = None  # None = plain cross-entropy; else a MixingSpec
    trainable_mixing: bool = False
    penalties: PenaltyWeights = field(default_factory=PenaltyWeights)

    def __post_init__(self):
        # 0 is admitted so a no-op step stays observable
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be >= 0")
        if not 0.0 <= self.momentum < 1.0:
            raise ValueError("momentum must be in [0, 1)")
        if self.weight_decay < 0 or self.lr_decay < 0:
            raise ValueError("decay rates must be >= 0")
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be >= 1")


def init_model(layer_sizes, seed=0):
    """Seeded He-style init: weights ~ N(0, 1/fan_in), biases zero."""
    sizes = tuple(int(s) for s in layer_sizes)
    if len(sizes) < 2 or any(s < 1 for s in sizes):
        raise ValueError("need >= 2 layer sizes, all >= 1")
    rng = np.random.default_rng(seed)
    weights = []
    biases = []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        weights.append(rng.standard_normal((fan_out, fan_in)) / np.sqrt(fan_in))
        biases.append(np.zeros(fan_out))
    return MlpModel(sizes, weights, biases)


def forward_batch(model, x):
    """Forward pass for an n x d batch; returns (probs, activations).

    activations[0] is the input, the rest are post-ReLU hidden outputs.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim != 2 or x.shape[1] != model.layer_sizes[0]:
        raise DimensionError(
            f"input must be n x {model.layer_sizes[0]}, got {x.shape}"
        )
    if not np.all(np.isfinite(x)):
        raise ValueError("input contains non-finite values")
    acts = [x]
    h = x
    for w, b in zip(model.weights[:-1], model.biases[:-1]):
        h = np.maximum(h @ w.T + b, 0.0)
        acts.append(h)
    logits = h @ model.weights[-1].T + model.biases[-1]
    return softmax(logits), acts


def forward(model, x):
    """Single-vector forward pass; returns (probs, cache)."""
    probs, acts = forward_batch(model, np.asarray(x, dtype=float)[None, :])
    return probs[0], [a[0] for a in acts]


def backprop(model, acts, grad_logits):
    """Parameter gradients given d(loss)/d(logits) for a batch.

    Gradients are sums over the batch (no averaging here).
    """
    grads_w = [None] * len(model.weights)
    grads_b = [None] * len(model.biases)
    delta = grad_logits
    for layer in range(len(model.weights) - 1, -1, -1):
        grads_w[layer] = delta.T @ acts[layer]
        grads_b[layer] = delta.sum(axis=0)
        if layer > 0:
            delta = (delta @ model.weights[layer]) * (acts[layer] > 0.0)
    return grads_w, grads_b


def _target_rows(sim, cfg, mixing_params, ys):
    """Per-sample target rows for the configured variant."""
    if cfg.mixing is None:
        h = np.eye(int(mixing_params))  # plain CE: one-hot targets
    elif isinstance(cfg.mixing, MatrixMixing):
        h = mixing_params
    else:
        eps = mixing_params
        h = eps[:, None] * sim.a
        h[np.arange(sim.k), np.arange(sim.k)] = 1.0 - eps
    return h[ys]


class Trainer:
    """Owns one model plus the optimizer state for a full training run."""

    def __init__(self, model, cfg, sim=None):
        if cfg.mixing is not None and not isinstance(cfg.mixing, MatrixMixing):
            if sim is None:
                raise ValueError("similarity matrix required for this mixing spec")
            if sim.k != model.num_classes:
                raise DimensionError("similarity matrix size does not match model")
        self.model = model
        self.cfg = cfg
        self.sim = sim
        self.epoch = 0
        self._vel_w = [np.zeros_like(w) for w in model.weights]
        self._vel_b = [np.zeros_like(b) for b in model.biases]
        self._mixing_params = self._init_mixing_params()
        self._vel_mix = (
            np.zeros_like(self._mixing_params)
            if cfg.trainable_mixing
            else None
        )

    def _init_mixing_params(self):
        cfg = self.cfg
        if cfg.mixing is None:
            return self.model.num_classes
        if isinstance(cfg.mixing, SimpleMixing):
            if cfg.trainable_mixing:
                raise ValueError("trainable mixing needs a per-class or matrix spec")
            return np.full(self.sim.k, cfg.mixing.epsilon)
        if isinstance(cfg.mixing, PerClassMixing):
            return cfg.mixing.epsilons.copy()
        return cfg.mixing.e_matrix.copy()

    @property
    def mixing_params(self):
        params = self._mixing_params
        return params.copy() if isinstance(params, np.ndarray) else params

    def learning_rate(self):
        return self.cfg.learning_rate / (1.0 + self.cfg.lr_decay * self.epoch)

    def train_epoch(self, data):
        """One seeded-shuffled pass; returns mean loss and train accuracy."""
        cfg = self.cfg
        rng = np.random.default_rng((cfg.seed, self.epoch))
        order = rng.permutation(data.n)
        lr = self.learning_rate()
        total_loss = 0.0
        correct = 0
        for start in range(0, data.n, cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            x = data.features[idx]
            ys = data.labels[idx]
            probs, acts = forward_batch(self.model, x)
            targets = _target_rows(self.sim, cfg, self._mixing_params, ys)
            clamped = np.maximum(probs, PROB_CLAMP)
            batch_loss = -float(np.sum(targets * np.log(clamped)))
            if not np.isfinite(batch_loss):
                raise TrainingDivergedError(self.epoch, start // cfg.batch_size)
            total_loss += batch_loss
            correct += int(np.sum(np.argmax(probs, axis=1) == ys))

            grad_logits = probs - targets
            grads_w, grads_b = backprop(self.model, acts, grad_logits)
            scale = 1.0 / idx.shape[0]
            for layer in range(len(self.model.weights)):
                g = grads_w[layer] * scale + cfg.weight_decay * self.model.weights[layer]
                self._vel_w[layer] = cfg.momentum * self._vel_w[layer] - lr * g
                self.model.weights[layer] += self._vel_w[layer]
                gb = grads_b[layer] * scale
                self._vel_b[layer] = cfg.momentum * self._vel_b[layer] - lr * gb
                self.model.biases[layer] += self._vel_b[layer]

            if cfg.trainable_mixing:
                self._step_mixing(clamped, ys, lr)

            if not self.model.check_finite():
                raise TrainingDivergedError(self.epoch, start // cfg.batch_size)
        self.epoch += 1
        return {
            "mean_loss": total_loss / data.n,
            "accuracy": correct / data.n,
        }

    def _step_mixing(self, clamped_probs, ys, lr):
        cfg = self.cfg
        w = cfg.penalties
        logp = np.log(clamped_probs)
        n = ys.shape[0]
        if isinstance(cfg.mixing, MatrixMixing):
            e = self._mixing_params
            k = e.shape[0]
            grad = np.zeros_like(e)
            np.add.at(grad, ys, -logp)
            row_sums = e.sum(axis=1)
            grad += w.alpha * 2.0 * (row_sums - 1.0)[:, None]
            grad += w.beta * w.p * np.abs(e - 1.0) ** (w.p - 1.0) * np.sign(e - 1.0)
            grad += w.gamma * w.p * np.abs(e) ** (w.p - 1.0) * np.sign(e)
            diag = np.diag(e)
            gap = (k - 1) * (diag - cfg.mixing.margins) - (row_sums - diag)
            grad += w.eta * 2.0 * gap[:, None] * -1.0
            grad[np.arange(k), np.arange(k)] += w.eta * 2.0 * gap * k
            self._vel_mix = cfg.momentum * self._vel_mix - lr * grad / n
            e += self._vel_mix
            np.clip(e, EPS_MARGIN, 1.0 - EPS_MARGIN, out=e)
        else:
            eps = self._mixing_params
            a = self.sim.a
            grad = np.zeros_like(eps)
            for row, y in enumerate(ys):
                a_row = a[y].copy()
                a_row[y] = -1.0
                grad[y] += -float(np.dot(logp[row], a_row))
            rho = a.sum(axis=1)
            norms = 1.0 - eps + eps * rho
            grad += w.alpha * 2.0 * (norms - 1.0) * (rho - 1.0)
            grad += w.beta * w.p * np.abs(eps - 0.5) ** (w.p - 1.0) * np.sign(eps - 0.5)
            grad += w.gamma * w.p * np.abs(eps) ** (w.p - 1.0) * np.sign(eps)
            self._vel_mix = cfg.momentum * self._vel_mix - lr * grad / n
            eps += self._vel_mix
            np.clip(eps, EPS_MARGIN, 0.5 - EPS_MARGIN, out=eps)


def evaluate(model, data, topk=5):
    """Top-1/top-k accuracy plus the confusion matrix.

    Top-k ties break toward the smaller class index.
    """
    if data.n < 1:
        raise ValueError("dataset is empty")
    k = model.num_classes
    kprime = min(topk, k)
    probs, _ = forward_batch(model, data.features)
    # stable argsort on -probs: equal probabilities keep ascending class order
    ranked = np.argsort(-probs, axis=1, kind="stable")
    pred = ranked[:, 0]
    top1 = float(np.mean(pred == data.labels))
    in_topk = np.any(ranked[:, :kprime] == data.labels[:, None], axis=1)
    topk_acc = float(np.mean(in_topk))
    confusion = np.zeros((k, k), dtype=int)
    np.add.at(confusion, (data.labels, pred), 1)
    return top1, topk_acc, confusion


def save_checkpoint(model, path):
    """Binary layout: magic 'MCEL', u32 version, u32 layer count, then per
    layer u32 rows, u32 cols, row-major little-endian f64 weights followed
    by rows f64 biases."""
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<II", CHECKPOINT_VERSION, len(model.weights)))
        for w, b in zip(model.weights, model.biases):
            rows, cols = w.shape
            fh.write(struct.pack("<II", rows, cols))
            fh.write(np.ascontiguousarray(w, dtype="<f8").tobytes())
            fh.write(np.ascontiguousarray(b, dtype="<f8").tobytes())


def load_checkpoint(path):
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != CHECKPOINT_MAGIC:
            raise DataFormatError(f"{path}: bad magic {magic!r} at offset 0")
        version, layers = struct.unpack("<II", fh.read(8))
        if version != CHECKPOINT_VERSION:
            raise DataFormatError(f"{path}: unsupported version {version}")
        weights = []
        biases = []
        sizes = []
        for _ in range(layers):
            rows, cols = struct.unpack("<II", fh.read(8))
            wbuf = fh.read(rows * cols * 8)
            bbuf = fh.read(rows * 8)
            if len(wbuf) != rows * cols * 8 or len(bbuf) != rows * 8:
                raise DataFormatError(f"{path}: truncated at offset {fh.tell()}")
            weights.append(np.frombuffer(wbuf, dtype="<f8").reshape(rows, cols).copy())
            biases.append(np.frombuffer(bbuf, dtype="<f8").copy())
            if not sizes:
                sizes.append(cols)
            sizes.append(rows)
    return MlpModel(tuple(sizes), weights, biases)
