"""Small dense classifiers with analytic gradients and momentum SGD.

Everything runs in float64.  A model is a stack of affine layers with
relu or identity activations.  Two output conventions are supported:

* binary mode: one raw score f, labels in {-1, +1}, probabilities via
  the sigmoid, per-instance loss log(1 + exp(-y f));
* softmax mode: k raw scores, labels in 0..k-1, per-instance loss
  -log softmax(f)[y].

Losses are instance-weighted, and gradients are written out by hand so
zero-weight instances contribute exactly zero gradient.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit, log_expit, logsumexp

ACTIVATIONS = ("relu", "identity")


@dataclass
class Layer:
    weights: np.ndarray  # [out x in]
    bias: np.ndarray  # [out]
    activation: str = "identity"

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=float)
        self.bias = np.asarray(self.bias, dtype=float)
        if self.weights.ndim != 2 or self.bias.ndim != 1:
            raise ValueError("layer expects a weight matrix and a bias vector")
        if self.weights.shape[0] != self.bias.shape[0]:
            raise ValueError("bias length must match the layer's output dimension")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")


@dataclass
class Model:
    layers: list[Layer]
    binary: bool = False  # single-score mode with labels in {-1, +1}

    def __post_init__(self):
        if not self.layers:
            raise ValueError("model needs at least one layer")
        for prev, nxt in zip(self.layers, self.layers[1:]):
            if nxt.weights.shape[1] != prev.weights.shape[0]:
                raise ValueError("consecutive layer dimensions do not chain")
        if self.binary and self.output_dim != 1:
            raise ValueError("binary mode requires a single output score")

    @property
    def input_dim(self) -> int:
        return self.layers[0].weights.shape[1]

    @property
    def output_dim(self) -> int:
        return self.layers[-1].weights.shape[0]

    def copy(self) -> "Model":
        return Model(
            [Layer(l.weights.copy(), l.bias.copy(), l.activation) for l in self.layers],
            binary=self.binary,
        )


def init_model(sizes, binary: bool = False, rng: np.random.Generator | None = None) -> Model:
    """Build a model from layer sizes [d, h1, ..., out].

    Weights are uniform in +-sqrt(6 / (fan_in + fan_out)), biases zero.
    Hidden layers use relu, the output layer identity.
    """
    if rng is None:
        rng = np.random.default_rng(0)
    sizes = list(sizes)
    if len(sizes) < 2:
        raise ValueError("sizes must list input and output dimensions")
    layers = []
    for i, (fan_in, fan_out) in enumerate(zip(sizes, sizes[1:])):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        act = "identity" if i == len(sizes) - 2 else "relu"
        layers.append(
            Layer(rng.uniform(-limit, limit, (fan_out, fan_in)), np.zeros(fan_out), act)
        )
    return Model(layers, binary=binary)


def _apply(activation: str, z: np.ndarray) -> np.ndarray:
    return np.maximum(z, 0.0) if activation == "relu" else z


def forward(model: Model, X: np.ndarray) -> np.ndarray:
    """Raw scores [b x out] for a feature matrix [b x d]; no softmax applied."""
    return _forward_cached(model, X)[0]


def _forward_cached(model, X):
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != model.input_dim:
        raise ValueError(
            f"feature matrix has {X.shape[-1] if X.ndim == 2 else '?'} columns, "
            f"model expects {model.input_dim}"
        )
    acts = [X]
    pre = []
    for layer in model.layers:
        z = acts[-1] @ layer.weights.T + layer.bias
        pre.append(z)
        acts.append(_apply(layer.activation, z))
    return acts[-1], pre, acts


def probabilities(logits: np.ndarray) -> np.ndarray:
    """Class probabilities, rows summing to 1.

    A [b x 1] input is a binary raw score and yields [p(-1), p(+1)] via
    the sigmoid.  Wider inputs go through a max-shifted softmax.
    """
    logits = np.asarray(logits, dtype=float)
    if logits.ndim != 2:
        raise ValueError("expected a [batch x outputs] logit matrix")
    if not np.isfinite(logits).all():
        raise ValueError("logits must be finite")
    if logits.shape[1] == 1:
        f = logits[:, 0]
        return np.column_stack([expit(-f), expit(f)])
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def _instance_losses(logits, labels):
    """Per-instance -log p(label); log-sum-exp based, safe at large margins."""
    labels = np.asarray(labels)
    if logits.shape[1] == 1:
        if not np.isin(labels, (-1, 1)).all():
            raise ValueError("binary labels must be -1 or +1")
        return -log_expit(labels * logits[:, 0])
    if labels.min() < 0 or labels.max() >= logits.shape[1]:
        raise ValueError("class label out of range")
    rows = np.arange(len(labels))
    return logsumexp(logits, axis=1) - logits[rows, labels]


def weighted_ce_loss(logits: np.ndarray, labels: np.ndarray, weights: np.ndarray) -> float:
    """Weighted cross entropy sum_j w_j * (-log p(y_j | x_j)).

    Uniform weights 1/b recover the plain mean cross entropy.
    """
    logits = np.asarray(logits, dtype=float)
    weights = np.asarray(weights, dtype=float)
    if weights.shape != (logits.shape[0],):
        raise ValueError("weights must align with the batch")
    if (weights < 0).any():
        raise ValueError("instance weights must be non-negative")
    return float(weights @ _instance_losses(logits, labels))


def gradients(model: Model, X, labels, weights):
    """Analytic gradient of weighted_ce_loss w.r.t. every parameter.

    Returns one (d_weights, d_bias) pair per layer, in layer order.
    """
    weights = np.asarray(weights, dtype=float)
    if (weights < 0).any():
        raise ValueError("instance weights must be non-negative")
    logits, pre, acts = _forward_cached(model, X)
    if weights.shape != (logits.shape[0],):
        raise ValueError("weights must align with the batch")
    labels = np.asarray(labels)
    if logits.shape[1] == 1:
        if not np.isin(labels, (-1, 1)).all():
            raise ValueError("binary labels must be -1 or +1")
        target = (labels + 1) / 2.0
        d_out = ((expit(logits[:, 0]) - target) * weights)[:, None]
    else:
        probs = probabilities(logits)
        rows = np.arange(len(labels))
        probs[rows, labels] -= 1.0
        d_out = probs * weights[:, None]

    grads = []
    d_act = d_out
    for li in range(len(model.layers) - 1, -1, -1):
        layer = model.layers[li]
        d_pre = d_act * (pre[li] > 0) if layer.activation == "relu" else d_act
        grads.append((d_pre.T @ acts[li], d_pre.sum(axis=0)))
        d_act = d_pre @ layer.weights
    grads.reverse()
    return grads


@dataclass
class OptimizerConfig:
    learning_rate: float
    momentum: float = 0.0
    weight_decay: float = 0.0
    decay_epochs: tuple[int, ...] = ()
    decay_factor: float = 10.0

    def __post_init__(self):
        self.decay_epochs = tuple(int(e) for e in self.decay_epochs)
        if self.learning_rate <= 0:
            raise ValueError("learning rate must be positive")
        if not 0 <= self.momentum < 1:
            raise ValueError("momentum must be in [0, 1)")
        if self.weight_decay < 0:
            raise ValueError("weight decay must be non-negative")
        if self.decay_factor <= 0:
            raise ValueError("decay factor must be positive")
        if any(b <= a for a, b in zip(self.decay_epochs, self.decay_epochs[1:])):
            raise ValueError("decay epochs must be strictly increasing")

    def lr_at(self, epoch: int) -> float:
        """Step schedule: initial / factor^(number of decay epochs <= epoch)."""
        drops = sum(1 for e in self.decay_epochs if e <= epoch)
        return self.learning_rate / self.decay_factor**drops


class SGD:
    """Momentum SGD; weight decay enters the velocity like a gradient term.

    velocity <- momentum * velocity + grad + weight_decay * param
    param    <- param - lr(epoch) * velocity
    """

    def __init__(self, config: OptimizerConfig):
        self.config = config
        self._velocity = None

    def step(self, model: Model, grads, epoch: int) -> Model:
        if self._velocity is None:
            self._velocity = [
                (np.zeros_like(l.weights), np.zeros_like(l.bias)) for l in model.layers
            ]
        if len(grads) != len(model.layers):
            raise ValueError("gradient set does not match the model")
        lr = self.config.lr_at(epoch)
        mom, wd = self.config.momentum, self.config.weight_decay
        for layer, (gw, gb), (vw, vb) in zip(model.layers, grads, self._velocity):
            if gw.shape != layer.weights.shape or gb.shape != layer.bias.shape:
                raise ValueError("gradient shapes do not match the parameters")
            vw *= mom
            vw += gw + wd * layer.weights
            vb *= mom
            vb += gb + wd * layer.bias
            layer.weights -= lr * vw
            layer.bias -= lr * vb
        return model
