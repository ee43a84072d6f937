"""Small fully-connected networks and an adaptive-moment optimizer, numpy only."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class MLP:
    """Rectified-linear network with a linear output layer.

    Parameters are kept as a list of (W, b) pairs; forward returns the
    pre-activation cache needed by backward.
    """

    def __init__(self, layer_sizes: list[int], rng: np.random.Generator):
        if len(layer_sizes) < 2:
            raise ValueError("need at least input and output sizes")
        self.layer_sizes = list(layer_sizes)
        self.weights = []
        self.biases = []
        for fan_in, fan_out in zip(layer_sizes[:-1], layer_sizes[1:]):
            scale = np.sqrt(2.0 / fan_in)
            self.weights.append(rng.normal(0.0, scale, size=(fan_in, fan_out)))
            self.biases.append(np.zeros(fan_out))

    @property
    def in_dim(self) -> int:
        return self.layer_sizes[0]

    @property
    def out_dim(self) -> int:
        return self.layer_sizes[-1]

    def forward(self, x: np.ndarray) -> tuple[np.ndarray, list]:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        cache = [x]
        h = x
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            z = h @ w + b
            h = z if i == last else np.maximum(z, 0.0)
            cache.append(h)
        return h, cache

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return self.forward(x)[0]

    def backward(self, cache: list, dout: np.ndarray) -> list[tuple[np.ndarray, np.ndarray]]:
        """Gradients of a scalar loss w.r.t. every (W, b), given d loss / d output."""
        grads = [None] * len(self.weights)
        delta = dout
        for i in range(len(self.weights) - 1, -1, -1):
            h_in = cache[i]
            grads[i] = (h_in.T @ delta, delta.sum(axis=0))
            if i > 0:
                delta = (delta @ self.weights[i].T) * (cache[i] > 0)
        return grads

    def params_flat(self) -> np.ndarray:
        parts = []
        for w, b in zip(self.weights, self.biases):
            parts.append(w.ravel())
            parts.append(b.ravel())
        return np.concatenate(parts)

    def set_params_flat(self, flat: np.ndarray) -> None:
        i = 0
        for k, (w, b) in enumerate(zip(self.weights, self.biases)):
            self.weights[k] = flat[i:i + w.size].reshape(w.shape).copy()
            i += w.size
            self.biases[k] = flat[i:i + b.size].reshape(b.shape).copy()
            i += b.size
        if i != flat.size:
            raise ValueError("flat parameter vector has the wrong length")

    def num_params(self) -> int:
        return sum(w.size + b.size for w, b in zip(self.weights, self.biases))


def grads_flat(mlp: MLP, grads: list[tuple[np.ndarray, np.ndarray]]) -> np.ndarray:
    parts = []
    for gw, gb in grads:
        parts.append(gw.ravel())
        parts.append(gb.ravel())
    return np.concatenate(parts)


@dataclass
class Adam:
    """Adaptive-moment gradient descent on a flat parameter vector."""

    learning_rate: float = 3e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    m: np.ndarray | None = None
    v: np.ndarray | None = None
    step_count: int = 0

    def step(self, params: np.ndarray, grad: np.ndarray) -> np.ndarray:
        if self.m is None:
            self.m = np.zeros_like(params)
            self.v = np.zeros_like(params)
        self.step_count += 1
        self.m = self.beta1 * self.m + (1 - self.beta1) * grad
        self.v = self.beta2 * self.v + (1 - self.beta2) * grad ** 2
        m_hat = self.m / (1 - self.beta1 ** self.step_count)
        v_hat = self.v / (1 - self.beta2 ** self.step_count)
        return params - self.learning_rate * m_hat / (np.sqrt(v_hat) + self.eps)


def log_softmax(logits: np.ndarray) -> np.ndarray:
    m = logits.max(axis=1, keepdims=True)
    z = logits - m
    return z - np.log(np.exp(z).sum(axis=1, keepdims=True))


def cross_entropy(logits: np.ndarray, labels: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean cross entropy and its gradient w.r.t. the logits."""
    n = logits.shape[0]
    logp = log_softmax(logits)
    loss = -float(logp[np.arange(n), labels].mean())
    dlogits = np.exp(logp)
    dlogits[np.arange(n), labels] -= 1.0
    return loss, dlogits / n
