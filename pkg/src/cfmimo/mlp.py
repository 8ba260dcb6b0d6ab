"""Feed-forward power-control network on a flat parameter vector.

The network maps a normalized snapshot of the M*K large-scale gains to K
per-user power coefficients in (0, 1).  All weights and biases live in a
single contiguous float64 array; the per-layer matrices are views into it,
so optimizer updates on the flat array are immediately visible to the
forward pass and checkpointing is a single array dump.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError

ELU_ALPHA = 1.0

INPUT_TRANSFORMS = ("linear", "log")


def elu(z):
    return np.where(z > 0.0, z, ELU_ALPHA * np.expm1(np.minimum(z, 0.0)))


def elu_grad(z, out):
    """Derivative of elu using the cached activation output."""
    return np.where(z > 0.0, 1.0, out + ELU_ALPHA)


def sigmoid(z):
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    pos = z >= 0.0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def layer_sizes(n_aps: int, n_users: int) -> list[int]:
    """Input width, three hidden widths, output width."""
    mk = n_aps * n_users
    return [mk, mk, n_users, n_aps, n_users]


def parameter_count(sizes) -> int:
    return sum((fi + 1) * fo for fi, fo in zip(sizes[:-1], sizes[1:]))


def _layer_views(sizes, flat):
    weights, biases = [], []
    offset = 0
    for fi, fo in zip(sizes[:-1], sizes[1:]):
        weights.append(flat[offset:offset + fi * fo].reshape(fo, fi))
        offset += fi * fo
        biases.append(flat[offset:offset + fo])
        offset += fo
    return weights, biases


class Mlp:
    """Fully connected net, elu hidden layers, sigmoid output."""

    def __init__(self, sizes, params: np.ndarray | None = None):
        self.sizes = [int(s) for s in sizes]
        if len(self.sizes) < 2 or any(s < 1 for s in self.sizes):
            raise ValidationError("layer sizes must be positive, two at least")
        n = parameter_count(self.sizes)
        if params is None:
            params = np.zeros(n)
        else:
            params = np.ascontiguousarray(params, dtype=np.float64)
            if params.shape != (n,):
                raise ValidationError(
                    f"expected {n} parameters, got shape {params.shape}"
                )
        self.params = params
        self.weights, self.biases = _layer_views(self.sizes, params)

    @property
    def n_layers(self) -> int:
        return len(self.weights)

    def clone(self) -> "Mlp":
        return Mlp(self.sizes, self.params.copy())

    def forward(self, x: np.ndarray) -> np.ndarray:
        """Power coefficients for one input (in,) or a batch (B, in)."""
        single = x.ndim == 1
        a = x[None, :] if single else x
        last = self.n_layers - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            z = a @ w.T + b
            a = sigmoid(z) if i == last else elu(z)
        return a[0] if single else a

    def forward_cached(self, x: np.ndarray):
        """Batch forward that keeps pre- and post-activations for backward."""
        zs, acts = [], [x]
        a = x
        last = self.n_layers - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            z = a @ w.T + b
            a = sigmoid(z) if i == last else elu(z)
            zs.append(z)
            acts.append(a)
        return a, zs, acts

    def backward(self, zs, acts, grad_out) -> np.ndarray:
        """Gradient of sum_b loss_b wrt the flat parameters.

        grad_out is d(loss)/d(output) for the batch, shape (B, out).
        """
        grad = np.zeros_like(self.params)
        gws, gbs = _layer_views(self.sizes, grad)
        out = acts[-1]
        delta = grad_out * out * (1.0 - out)
        for i in range(self.n_layers - 1, -1, -1):
            gws[i][...] = delta.T @ acts[i]
            gbs[i][...] = delta.sum(axis=0)
            if i > 0:
                delta = (delta @ self.weights[i]) * elu_grad(zs[i - 1], acts[i])
        return grad


def build_model(n_aps: int, n_users: int, rng: np.random.Generator) -> Mlp:
    """Glorot-uniform weights, zero biases."""
    model = Mlp(layer_sizes(n_aps, n_users))
    for w in model.weights:
        fo, fi = w.shape
        lim = math.sqrt(6.0 / (fi + fo))
        w[...] = rng.uniform(-lim, lim, size=w.shape)
    return model


@dataclass(frozen=True)
class Normalizer:
    """Input standardization frozen from training-set statistics."""

    mode: str
    mean: np.ndarray  # (M*K,)
    std: np.ndarray   # (M*K,)

    def __post_init__(self):
        if self.mode not in INPUT_TRANSFORMS:
            raise ValidationError(f"unknown input transform {self.mode!r}")

    def transform(self, beta: np.ndarray) -> np.ndarray:
        """Flatten (..., M, K) gains to (..., M*K) network inputs."""
        return (_features(beta, self.mode) - self.mean) / self.std


def _features(beta: np.ndarray, mode: str) -> np.ndarray:
    arr = np.asarray(beta, dtype=float)
    flat = arr.reshape(*arr.shape[:-2], -1)
    if mode == "log":
        return 10.0 * np.log10(flat)
    return flat


def fit_normalizer(beta: np.ndarray, mode: str = "linear") -> Normalizer:
    """Per-feature mean/std over the training stack (N, M, K)."""
    if beta.ndim != 3:
        raise ValidationError("normalizer statistics need an (N, M, K) stack")
    feats = _features(beta, mode)
    std = np.maximum(feats.std(axis=0), 1e-12)
    return Normalizer(mode=mode, mean=feats.mean(axis=0), std=std)


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    step: int = 0

    @classmethod
    def zeros(cls, n: int) -> "AdamState":
        return cls(np.zeros(n), np.zeros(n))


def adam_step(params, grad, state: AdamState, lr: float,
              beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
    """One Adam update, in place on params."""
    state.step += 1
    state.m *= beta1
    state.m += (1.0 - beta1) * grad
    state.v *= beta2
    state.v += (1.0 - beta2) * grad * grad
    m_hat = state.m / (1.0 - beta1 ** state.step)
    v_hat = state.v / (1.0 - beta2 ** state.step)
    params -= lr * m_hat / (np.sqrt(v_hat) + eps)
