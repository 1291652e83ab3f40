"""MLP construction, Adam optimization and Polyak target smoothing.

Networks are plain parameter records (immutable by convention); updates
return new records so snapshots can be shared across threads safely.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Mapping, Sequence

import numpy as np

from .autodiff import Array, AutodiffError, affine, relu, tanh

OUTPUT_ACTIVATIONS = ("identity", "tanh")


@dataclass
class MlpParams:
    """Fully connected net: relu between layers, configurable output activation."""

    layers: list[tuple[Array, Array]]  # (weight [out x in], bias [out]) per layer
    output_activation: str = "identity"

    @property
    def sizes(self) -> tuple[int, ...]:
        dims = [self.layers[0][0].shape[1]]
        dims += [w.shape[0] for w, _ in self.layers]
        return tuple(dims)


def mlp_init(sizes: Sequence[int], output_activation: str = "identity", seed: int = 0) -> MlpParams:
    """Weights uniform in +-1/sqrt(fan_in), biases zero, deterministic given seed."""
    if len(sizes) < 2:
        raise ValueError(f"mlp_init: need at least one layer, got sizes {tuple(sizes)}")
    if any(s <= 0 for s in sizes):
        raise ValueError(f"mlp_init: sizes must be positive, got {tuple(sizes)}")
    if output_activation not in OUTPUT_ACTIVATIONS:
        raise ValueError(f"mlp_init: unknown output activation {output_activation!r}")
    rng = np.random.default_rng(seed)
    layers = []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        bound = 1.0 / np.sqrt(fan_in)
        w = rng.uniform(-bound, bound, size=(fan_out, fan_in))
        layers.append((Array(w, requires_grad=True), Array(np.zeros(fan_out), requires_grad=True)))
    return MlpParams(layers=layers, output_activation=output_activation)


def mlp_apply(params: MlpParams, x, frozen: bool = False) -> Array:
    """Forward pass building the gradient history.

    With ``frozen`` the parameters are treated as constants: the output still
    carries gradients with respect to the input, not the weights.
    """
    h = x if isinstance(x, Array) else Array(x)
    last = len(params.layers) - 1
    for i, (w, b) in enumerate(params.layers):
        if frozen:
            w, b = Array(w.data), Array(b.data)
        h = affine(w, b, h)
        if i < last:
            h = relu(h)
    if params.output_activation == "tanh":
        h = tanh(h)
    return h


def mlp_apply_numpy(params: MlpParams, x: np.ndarray) -> np.ndarray:
    """History-free forward pass for rollouts; same arithmetic as mlp_apply."""
    h = np.asarray(x, dtype=np.float64)
    last = len(params.layers) - 1
    for i, (w, b) in enumerate(params.layers):
        h = h @ w.data.T + b.data if h.ndim == 2 else w.data @ h + b.data
        if i < last:
            h = np.maximum(h, 0.0)
    if params.output_activation == "tanh":
        h = np.tanh(h)
    return h


def mlp_parameters(params: MlpParams) -> list[Array]:
    """Canonical flat order: weight then bias, layer by layer."""
    out: list[Array] = []
    for w, b in params.layers:
        out.append(w)
        out.append(b)
    return out


def mlp_with_parameters(params: MlpParams, flat: Sequence[Array]) -> MlpParams:
    if len(flat) != 2 * len(params.layers):
        raise ValueError("mlp_with_parameters: wrong parameter count")
    layers = [(flat[2 * i], flat[2 * i + 1]) for i in range(len(params.layers))]
    return replace(params, layers=layers)


@dataclass
class AdamState:
    """Standard bias-corrected Adam moments for a fixed parameter ordering."""

    lr: float
    m: list[np.ndarray]
    v: list[np.ndarray]
    step_count: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


def adam_init(params: Sequence[Array], lr: float) -> AdamState:
    return AdamState(
        lr=lr,
        m=[np.zeros_like(p.data) for p in params],
        v=[np.zeros_like(p.data) for p in params],
    )


def adam_step(
    params: Sequence[Array], grads: Mapping[Array, Array], state: AdamState
) -> tuple[list[Array], AdamState]:
    """One Adam update; returns new parameter Arrays and the advanced state."""
    t = state.step_count + 1
    new_params: list[Array] = []
    new_m: list[np.ndarray] = []
    new_v: list[np.ndarray] = []
    c1 = 1.0 - state.beta1**t
    c2 = 1.0 - state.beta2**t
    for i, p in enumerate(params):
        try:
            g = grads[p].data
        except KeyError:
            raise AutodiffError(f"adam_step: missing gradient for parameter {i} (shape {p.shape})") from None
        m = state.beta1 * state.m[i] + (1.0 - state.beta1) * g
        v = state.beta2 * state.v[i] + (1.0 - state.beta2) * (g * g)
        update = state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
        new_params.append(Array(p.data - update, requires_grad=True))
        new_m.append(m)
        new_v.append(v)
    return new_params, replace(state, m=new_m, v=new_v, step_count=t)


def polyak_update(target: MlpParams, online: MlpParams, rho: float) -> MlpParams:
    """target <- rho * online + (1 - rho) * target, shape-checked per layer."""
    if not 0.0 <= rho <= 1.0:
        raise ValueError(f"polyak_update: rho must be in [0, 1], got {rho}")
    layers = []
    for (tw, tb), (ow, ob) in zip(target.layers, online.layers, strict=True):
        if tw.shape != ow.shape or tb.shape != ob.shape:
            raise ValueError(f"polyak_update: shape mismatch {tw.shape} vs {ow.shape}")
        layers.append(
            (
                Array(rho * ow.data + (1.0 - rho) * tw.data, requires_grad=True),
                Array(rho * ob.data + (1.0 - rho) * tb.data, requires_grad=True),
            )
        )
    return replace(target, layers=layers)
