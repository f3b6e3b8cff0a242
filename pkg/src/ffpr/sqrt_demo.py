"""
Square-root toy problem: learn ``x`` from ``y = x**2``.

Raw targets ``x`` make the regression target two-valued, so a network
trained on them collapses toward a near-zero function; canonical targets
``|x|`` are a smooth function of ``y`` and are learned easily.

The MLP, its backpropagation and the Adam optimizer are written directly
in numpy. Inputs are standardized and weights use fan-in (He) scaling
in place of batch normalization.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

ULTRA_DENSE = 50_000
DENSE = 2_000
FULL_BATCH_LIMIT = 4096
MINIBATCH = 128


class DivergenceError(RuntimeError):
    pass


@dataclass
class ScalarDataset:
    inputs: np.ndarray
    targets: np.ndarray
    broken: bool
    density: float

    def __len__(self):
        return len(self.inputs)

    @property
    def pairs(self):
        return list(zip(self.inputs.tolist(), self.targets.tolist()))


@dataclass
class MlpConfig:
    layers: int = 6
    hidden_width: int = 100
    activation: str = "relu"
    epochs: int = 2000
    batch_size: int | None = None  # None: full batch up to 4096 samples, else 128
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    seed: int = 0

    def __post_init__(self):
        if self.layers < 2:
            raise ValueError("layers must be >= 2")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")


def build_sqrt_dataset(n: int, break_symmetry: bool, seed=0, low=-3.0, high=3.0) -> ScalarDataset:
    """Pairs ``(x**2, x)`` or ``(x**2, |x|)`` with ``x ~ U[low, high]``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    x = np.random.default_rng(seed).uniform(low, high, n)
    t = np.abs(x) if break_symmetry else x
    return ScalarDataset(inputs=x**2, targets=t, broken=break_symmetry, density=n / (high - low))


def _relu(z):
    return np.maximum(z, 0.0)


def _drelu(z):
    return (z > 0).astype(z.dtype)


def _dtanh(z):
    return 1.0 - np.tanh(z) ** 2


ACTIVATIONS = {"relu": (_relu, _drelu), "tanh": (np.tanh, _dtanh)}


@dataclass
class Mlp:
    weights: list
    biases: list
    activation: str = "relu"
    in_mean: float = 0.0
    in_std: float = 1.0

    @classmethod
    def init(cls, config: MlpConfig, rng, in_mean=0.0, in_std=1.0):
        sizes = [1] + [config.hidden_width] * (config.layers - 1) + [1]
        gain = 2.0 if config.activation == "relu" else 1.0
        ws, bs = [], []
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
            ws.append(rng.normal(0.0, np.sqrt(gain / fan_in), (fan_in, fan_out)))
            bs.append(np.zeros(fan_out))
        return cls(ws, bs, config.activation, in_mean, in_std)

    @property
    def params(self):
        return self.weights + self.biases

    def forward(self, y, cache=False):
        act, _ = ACTIVATIONS[self.activation]
        h = ((np.asarray(y, float) - self.in_mean) / self.in_std).reshape(-1, 1)
        hs, zs = [h], []
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            z = h @ w + b
            h = z if i == last else act(z)
            zs.append(z)
            hs.append(h)
        out = h[:, 0]
        return (out, (hs, zs)) if cache else out

    __call__ = forward

    def loss_and_grads(self, y, t):
        """Mean squared error and its gradients w.r.t. weights then biases."""
        _, dact = ACTIVATIONS[self.activation]
        pred, (hs, zs) = self.forward(y, cache=True)
        r = pred - t
        loss = float(np.mean(r**2))
        delta = (2.0 / len(t)) * r[:, None]
        gw = [None] * len(self.weights)
        gb = [None] * len(self.biases)
        for i in reversed(range(len(self.weights))):
            gw[i] = hs[i].T @ delta
            gb[i] = delta.sum(axis=0)
            if i:
                delta = (delta @ self.weights[i].T) * dact(zs[i - 1])
        return loss, gw + gb


def train_mlp(data: ScalarDataset, config: MlpConfig | None = None):
    """Train with Adam on MSE; returns ``(model, per_epoch_loss)``.

    The loss curve records the full-dataset training MSE after each epoch.
    """
    config = config or MlpConfig()
    if len(data) == 0:
        raise ValueError("empty dataset")
    rng = np.random.default_rng(config.seed)
    y, t = np.asarray(data.inputs, float), np.asarray(data.targets, float)
    std = float(y.std()) or 1.0
    model = Mlp.init(config, rng, float(y.mean()), std)
    batch = config.batch_size or (len(y) if len(y) <= FULL_BATCH_LIMIT else MINIBATCH)

    params = model.params
    m = [np.zeros_like(p) for p in params]
    v = [np.zeros_like(p) for p in params]
    b1, b2 = config.beta1, config.beta2
    step = 0
    curve = np.empty(config.epochs)
    for epoch in range(config.epochs):
        order = rng.permutation(len(y)) if batch < len(y) else np.arange(len(y))
        for start in range(0, len(y), batch):
            idx = order[start:start + batch]
            loss, grads = model.loss_and_grads(y[idx], t[idx])
            if not np.isfinite(loss):
                raise DivergenceError(f"non-finite loss at epoch {epoch}")
            step += 1
            for p, g, mi, vi in zip(params, grads, m, v):
                mi *= b1
                mi += (1 - b1) * g
                vi *= b2
                vi += (1 - b2) * g * g
                mhat = mi / (1 - b1**step)
                vhat = vi / (1 - b2**step)
                p -= config.learning_rate * mhat / (np.sqrt(vhat) + config.adam_eps)
        curve[epoch] = float(np.mean((model(y) - t) ** 2))
        if not np.isfinite(curve[epoch]):
            raise DivergenceError(f"non-finite loss at epoch {epoch}")
    return model, curve


def evaluate_sqrt(model, grid):
    """Rows ``(y, prediction, sqrt(y))`` over ``grid``."""
    grid = np.asarray(grid, float)
    pred = model(grid)
    return [(float(g), float(p), float(np.sqrt(g))) for g, p in zip(grid, pred)]
