"""Multilayer-perceptron auto-encoder with hand-written reverse mode and Adam.

Batches are column-major: a ``(d, T)`` matrix holds ``T`` vectors of
dimension ``d``. Every hidden layer uses a leaky ReLU; the output layer is
linear so reconstructions may leave ``[0, 1]``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

DEFAULT_SLOPE = 0.2
CHECKPOINT_MAGIC = "mmqs-mlp 1"


@dataclass
class Mlp:
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    slope: float = DEFAULT_SLOPE

    def __post_init__(self):
        if len(self.weights) != len(self.biases) or not self.weights:
            raise ValueError("need one bias per weight matrix and at least one layer")
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            if b.shape != (w.shape[0],):
                raise ValueError(f"layer {i}: bias shape {b.shape} vs weight {w.shape}")
            if i and w.shape[1] != self.weights[i - 1].shape[0]:
                raise ValueError(f"layer {i}: input width {w.shape[1]} != previous output")

    @classmethod
    def init(cls, dims, seed: int = 0, slope: float = DEFAULT_SLOPE) -> "Mlp":
        """He-uniform weights and zero biases for layer widths ``dims``."""
        dims = [int(d) for d in dims]
        if len(dims) < 2:
            raise ValueError("an MLP needs at least input and output widths")
        rng = np.random.Generator(np.random.PCG64(seed))
        weights, biases = [], []
        for fan_in, fan_out in zip(dims[:-1], dims[1:]):
            bound = np.sqrt(6.0 / fan_in)
            weights.append(rng.uniform(-bound, bound, size=(fan_out, fan_in)))
            biases.append(np.zeros(fan_out))
        return cls(weights, biases, slope)

    @classmethod
    def autoencoder(cls, input_dim: int, hidden, seed: int = 0, slope: float = DEFAULT_SLOPE) -> "Mlp":
        return cls.init([input_dim, *hidden, input_dim], seed=seed, slope=slope)

    @property
    def dims(self) -> list[int]:
        return [self.weights[0].shape[1]] + [w.shape[0] for w in self.weights]

    @property
    def input_dim(self) -> int:
        return self.dims[0]

    @property
    def bottleneck_layer(self) -> int:
        """Position in :attr:`dims` of the narrowest hidden layer."""
        hidden = self.dims[1:-1]
        if not hidden:
            return len(self.dims) - 1
        return 1 + int(np.argmin(hidden))

    @property
    def bottleneck_dim(self) -> int:
        return self.dims[self.bottleneck_layer]

    def params(self) -> list[np.ndarray]:
        return [*self.weights, *self.biases]

    def copy(self) -> "Mlp":
        return Mlp([w.copy() for w in self.weights], [b.copy() for b in self.biases], self.slope)


@dataclass
class Gradients:
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    input: np.ndarray | None = None

    def params(self) -> list[np.ndarray]:
        return [*self.weights, *self.biases]


def _leaky(z: np.ndarray, slope: float) -> np.ndarray:
    if 0.0 <= slope <= 1.0:
        h = z * slope
        return np.maximum(z, h, out=h)
    return np.where(z > 0, z, slope * z)


def _check_batch(net: Mlp, batch) -> np.ndarray:
    batch = np.asarray(batch, dtype=np.float64)
    if batch.ndim == 1:
        batch = batch[:, None]
    if batch.shape[0] != net.input_dim:
        raise ValueError(f"batch has {batch.shape[0]} rows, network expects {net.input_dim}")
    return batch


def forward_cached(net: Mlp, batch) -> tuple[np.ndarray, list[np.ndarray]]:
    """Forward pass that also returns the pre-activations of every layer."""
    h = _check_batch(net, batch)
    acts = [h]
    pre = []
    last = len(net.weights) - 1
    for i, (w, b) in enumerate(zip(net.weights, net.biases)):
        z = w @ h
        z += b[:, None]
        pre.append(z)
        h = z if i == last else _leaky(z, net.slope)
        acts.append(h)
    return h, acts + pre


def forward(net: Mlp, batch) -> np.ndarray:
    return forward_cached(net, batch)[0]


def encode(net: Mlp, batch) -> np.ndarray:
    """Activations of the bottleneck layer, one column per input."""
    h = _check_batch(net, batch)
    for i in range(net.bottleneck_layer):
        z = net.weights[i] @ h
        z += net.biases[i][:, None]
        h = z if i == len(net.weights) - 1 else _leaky(z, net.slope)
    return h


def backprop(net: Mlp, cache: list[np.ndarray], grad_out: np.ndarray) -> Gradients:
    """Pull ``dL/d(output)`` back to parameter and input gradients."""
    n = len(net.weights)
    acts, pre = cache[: n + 1], cache[n + 1 :]
    g = grad_out
    gw, gb = [None] * n, [None] * n
    for i in reversed(range(n)):
        if i != n - 1:
            g = g * np.array([net.slope, 1.0])[(pre[i] > 0).view(np.uint8)]
        gw[i] = g @ acts[i].T
        gb[i] = g.sum(axis=1)
        g = net.weights[i].T @ g
    return Gradients(gw, gb, g)


def backward(net: Mlp, batch_in, batch_target) -> tuple[float, Gradients]:
    """Squared-error loss ``sum ||target - net(in)||^2`` and its exact gradient."""
    target = _check_batch(net, batch_target)
    out, cache = forward_cached(net, batch_in)
    if out.shape != target.shape:
        raise ValueError(f"target shape {target.shape} does not match output {out.shape}")
    resid = out - target
    return float(np.sum(resid * resid)), backprop(net, cache, 2.0 * resid)


@dataclass
class AdamState:
    """Adam moments for a fixed list of parameter arrays."""

    lr: float = 0.01
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: list[np.ndarray] = field(default_factory=list)
    v: list[np.ndarray] = field(default_factory=list)

    def update(self, params: list[np.ndarray], grads: list[np.ndarray]) -> None:
        """In-place Adam step with bias correction."""
        if not self.m:
            self.m = [np.zeros_like(p) for p in params]
            self.v = [np.zeros_like(p) for p in params]
        if len(params) != len(self.m) or len(grads) != len(params):
            raise ValueError("parameter list does not match optimizer state")
        self.step += 1
        c1 = 1.0 - self.beta1**self.step
        c2 = 1.0 - self.beta2**self.step
        for p, g, m, v in zip(params, grads, self.m, self.v):
            if g.shape != p.shape or m.shape != p.shape:
                raise ValueError(f"gradient shape {g.shape} does not match parameter {p.shape}")
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


def adam_step(net: Mlp, state: AdamState, grads: Gradients) -> tuple[Mlp, AdamState]:
    state.update(net.params(), grads.params())
    return net, state


def train_dae(net: Mlp, data: np.ndarray, sigma: float, iters: int, state: AdamState | None = None,
              seed: int = 0, batch_size: int | None = None) -> list[float]:
    """Fit a denoising auto-encoder to the columns of ``data``.

    Each step corrupts a (mini-)batch with fresh ``N(0, sigma^2)`` noise and
    regresses the clean columns. Returns the per-step losses.
    """
    state = state or AdamState()
    rng = np.random.Generator(np.random.PCG64(seed))
    n = data.shape[1]
    losses = []
    for _ in range(iters):
        cols = data if batch_size is None or batch_size >= n else data[:, rng.choice(n, batch_size, replace=False)]
        noisy = cols + sigma * rng.standard_normal(cols.shape)
        loss, grads = backward(net, noisy, cols)
        adam_step(net, state, grads)
        losses.append(loss)
    return losses


def save_checkpoint(net: Mlp, path) -> None:
    """Write weights as text.

    Layout: a magic line, ``dims d0 d1 ...``, ``slope s``, then for each layer
    its weight rows (one row per line) followed by one bias line. Values are
    written with 17 significant digits so a reload is exact.
    """
    lines = [CHECKPOINT_MAGIC, "dims " + " ".join(map(str, net.dims)), f"slope {net.slope!r}"]
    for w, b in zip(net.weights, net.biases):
        lines.extend(" ".join(f"{v:.17g}" for v in row) for row in w)
        lines.append(" ".join(f"{v:.17g}" for v in b))
    Path(path).write_text("\n".join(lines) + "\n")


def load_checkpoint(path) -> Mlp:
    lines = Path(path).read_text().splitlines()
    if not lines or lines[0] != CHECKPOINT_MAGIC:
        raise ValueError(f"{path}: not an MLP checkpoint")
    dims = [int(v) for v in lines[1].split()[1:]]
    slope = float(lines[2].split()[1])
    pos = 3
    weights, biases = [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        w = np.array([[float(v) for v in lines[pos + r].split()] for r in range(fan_out)]).reshape(fan_out, fan_in)
        pos += fan_out
        biases.append(np.array([float(v) for v in lines[pos].split()]).reshape(fan_out))
        pos += 1
        weights.append(w)
    return Mlp(weights, biases, slope)
