"""Fully connected autoencoders with hand-written backpropagation and Adam.

Weights are stored ``(out, in)`` so a layer computes ``x @ W.T + b``.
Everything runs in float64.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

ACTIVATIONS = ("relu", "linear")


class ShapeError(ValueError):
    """Raised when array shapes do not chain."""


class ForwardCacheError(RuntimeError):
    """Raised when backward is called without a matching forward cache."""


@dataclass
class Layer:
    weight: np.ndarray  # (out, in)
    bias: np.ndarray  # (out,)
    activation: str = "linear"

    def __post_init__(self):
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        if self.weight.ndim != 2 or self.bias.shape != (self.weight.shape[0],):
            raise ShapeError(
                f"bias shape {self.bias.shape} does not match weight {self.weight.shape}")

    @property
    def fan_in(self) -> int:
        return self.weight.shape[1]

    @property
    def fan_out(self) -> int:
        return self.weight.shape[0]


MlpParams = List[Layer]


def check_chain(params: Sequence[Layer]) -> None:
    for k in range(1, len(params)):
        if params[k].fan_in != params[k - 1].fan_out:
            raise ShapeError(
                f"layer {k} expects {params[k].fan_in} inputs but layer {k - 1} "
                f"produces {params[k - 1].fan_out}")


def init_mlp(widths: Sequence[int], rng: np.random.Generator,
             hidden_activation: str = "relu",
             output_activation: str = "linear") -> MlpParams:
    """Glorot-uniform weights and zero biases for a chain of ``widths``."""
    if len(widths) < 2:
        raise ValueError("need at least an input and an output width")
    layers = []
    n = len(widths) - 1
    for k in range(n):
        fan_in, fan_out = int(widths[k]), int(widths[k + 1])
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        w = rng.uniform(-limit, limit, size=(fan_out, fan_in))
        act = output_activation if k == n - 1 else hidden_activation
        layers.append(Layer(w, np.zeros(fan_out), act))
    return layers


def encoder_widths(input_dim: int, hidden: Sequence[int], embed_dim: int) -> List[int]:
    return [input_dim, *hidden, embed_dim]


def decoder_widths(input_dim: int, hidden: Sequence[int], embed_dim: int) -> List[int]:
    return [embed_dim, *reversed(hidden), input_dim]


@dataclass
class ForwardCache:
    inputs: List[np.ndarray]
    preacts: List[np.ndarray]


def forward(x: np.ndarray, params: Sequence[Layer]) -> Tuple[np.ndarray, ForwardCache]:
    """Run the MLP, keeping what backward() needs."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2:
        raise ShapeError(f"expected a 2-D batch, got shape {x.shape}")
    inputs, preacts = [], []
    h = x
    for k, layer in enumerate(params):
        if h.shape[1] != layer.fan_in:
            raise ShapeError(
                f"layer {k} expects {layer.fan_in} inputs, got {h.shape[1]}")
        inputs.append(h)
        pre = h @ layer.weight.T + layer.bias
        preacts.append(pre)
        h = np.maximum(pre, 0.0) if layer.activation == "relu" else pre
    return h, ForwardCache(inputs, preacts)


def encode(x_batch: np.ndarray, phi: Sequence[Layer]) -> np.ndarray:
    return forward(x_batch, phi)[0]


def decode(z_batch: np.ndarray, psi: Sequence[Layer]) -> np.ndarray:
    return forward(z_batch, psi)[0]


def reconstruction_loss(x: np.ndarray, x_hat: np.ndarray) -> float:
    """Squared Frobenius norm of ``x - x_hat``."""
    x = np.asarray(x, dtype=np.float64)
    x_hat = np.asarray(x_hat, dtype=np.float64)
    if x.shape != x_hat.shape:
        raise ShapeError(f"shape mismatch {x.shape} vs {x_hat.shape}")
    diff = x - x_hat
    return float(np.sum(diff * diff))


def reconstruction_grad(x: np.ndarray, x_hat: np.ndarray) -> np.ndarray:
    """d/dx_hat of reconstruction_loss."""
    return 2.0 * (x_hat - x)


@dataclass
class LayerGrad:
    weight: np.ndarray
    bias: np.ndarray


def backward(cache: Optional[ForwardCache], params: Sequence[Layer],
             upstream_grad: np.ndarray) -> Tuple[List[LayerGrad], np.ndarray]:
    """Backpropagate ``upstream_grad`` (dL/doutput).

    Returns per-layer gradients and dL/dinput.
    """
    if cache is None:
        raise ForwardCacheError("backward called without a forward cache")
    if len(cache.preacts) != len(params):
        raise ForwardCacheError(
            f"cache holds {len(cache.preacts)} layers, params have {len(params)}")
    g = np.asarray(upstream_grad, dtype=np.float64)
    if g.shape != cache.preacts[-1].shape:
        raise ShapeError(
            f"upstream gradient {g.shape} does not match output {cache.preacts[-1].shape}")
    grads: List[LayerGrad] = [None] * len(params)  # type: ignore[list-item]
    for k in range(len(params) - 1, -1, -1):
        layer = params[k]
        if layer.activation == "relu":
            g = g * (cache.preacts[k] > 0.0)
        grads[k] = LayerGrad(g.T @ cache.inputs[k], g.sum(axis=0))
        g = g @ layer.weight
    return grads, g


def flatten_params(params: Sequence[Layer]) -> List[np.ndarray]:
    out = []
    for layer in params:
        out.extend((layer.weight, layer.bias))
    return out


def flatten_grads(grads: Sequence[LayerGrad]) -> List[np.ndarray]:
    out = []
    for g in grads:
        out.extend((g.weight, g.bias))
    return out


def unflatten_params(template: Sequence[Layer], arrays: Sequence[np.ndarray]) -> MlpParams:
    if len(arrays) != 2 * len(template):
        raise ShapeError("array count does not match layer count")
    return [Layer(arrays[2 * k], arrays[2 * k + 1], layer.activation)
            for k, layer in enumerate(template)]


@dataclass
class AdamState:
    """Moment accumulators for a flat list of parameter arrays."""

    m: List[np.ndarray]
    v: List[np.ndarray]
    step: int = 0
    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def zeros_like(cls, params: Sequence[np.ndarray], lr: float = 1e-4,
                   beta1: float = 0.9, beta2: float = 0.999,
                   eps: float = 1e-8) -> "AdamState":
        return cls([np.zeros_like(p) for p in params],
                   [np.zeros_like(p) for p in params],
                   0, lr, beta1, beta2, eps)


def adam_step(params: Sequence[np.ndarray], grads: Sequence[np.ndarray],
              state: AdamState) -> Tuple[List[np.ndarray], AdamState]:
    """One bias-corrected Adam update. Inputs are left untouched."""
    if not (len(params) == len(grads) == len(state.m) == len(state.v)):
        raise ShapeError("params, grads and moments must have equal length")
    step = state.step + 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1 ** step
    c2 = 1.0 - b2 ** step
    new_p, new_m, new_v = [], [], []
    for k, (p, g, m, v) in enumerate(zip(params, grads, state.m, state.v)):
        if not (p.shape == g.shape == m.shape == v.shape):
            raise ShapeError(f"entry {k}: param {p.shape}, grad {g.shape}, "
                             f"moment {m.shape}")
        m = b1 * m + (1.0 - b1) * g
        v = b2 * v + (1.0 - b2) * (g * g)
        m_hat = m / c1
        v_hat = v / c2
        new_p.append(p - state.lr * m_hat / (np.sqrt(v_hat) + state.eps))
        new_m.append(m)
        new_v.append(v)
    return new_p, AdamState(new_m, new_v, step, state.lr, b1, b2, state.eps)
