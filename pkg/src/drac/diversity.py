"""Log-distance diversity regularization and pairwise-distance diagnostics.

The regularizer scores a policy at a state by the mean log L2 distance
between independently sampled action pairs. Distances are floored at
``EPS_DISTANCE`` before the log so coincident samples stay finite; the
floored branch carries zero gradient.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Array

EPS_DISTANCE = 1e-6


@dataclass(frozen=True)
class DiversityEstimate:
    value: float  # mean log-distance over the sampled pairs
    n_pairs: int
    floored_count: int  # pairs whose distance hit the floor


def log_distance(x, y) -> float:
    """log(max(||x - y||_2, EPS_DISTANCE)), natural logarithm."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise ValueError(f"log_distance: shapes {x.shape} and {y.shape} differ")
    return float(np.log(max(np.linalg.norm(x - y), EPS_DISTANCE)))


def _action_of(actor, state, latent) -> np.ndarray:
    fast = getattr(actor, "act_numpy", None)
    out = fast(state, latent) if fast is not None else actor.act(state, latent)
    return np.asarray(getattr(out, "data", out), dtype=np.float64)


def estimate_diversity(actor, state, n: int, rng: np.random.Generator) -> DiversityEstimate:
    """Monte-Carlo mean log-distance at one state, 2n fresh latents in (x, y) pair order."""
    if n < 1:
        raise ValueError(f"estimate_diversity: need n >= 1, got {n}")
    total = 0.0
    floored = 0
    for _ in range(n):
        zx = actor.sample_latent(rng)
        zy = actor.sample_latent(rng)
        ax = _action_of(actor, state, zx)
        ay = _action_of(actor, state, zy)
        dist = np.linalg.norm(ax - ay)
        if dist < EPS_DISTANCE:
            floored += 1
        total += np.log(max(dist, EPS_DISTANCE))
    return DiversityEstimate(value=total / n, n_pairs=n, floored_count=floored)


def _pair_inputs(actor, states: np.ndarray, n: int, rng: np.random.Generator):
    """Tiled states plus the x and y latent blocks stacked into one batch.

    One fused forward over 2nB rows is markedly cheaper than two; the first
    nB rows are the x samples, the rest the y samples.
    """
    b = states.shape[0]
    zx = actor.sample_latent(rng, batch=n * b)
    zy = actor.sample_latent(rng, batch=n * b)
    # diffusion latents are (steps+1, batch, A); flat actors are (batch, L)
    axis = 1 if zx.ndim == 3 else 0
    return np.tile(states, (2 * n, 1)), np.concatenate([zx, zy], axis=axis)


def diversity_per_state(actor, states: np.ndarray, n: int, rng: np.random.Generator) -> np.ndarray:
    """History-free per-state estimates for a batch of states, shape (B,)."""
    states = np.asarray(states, dtype=np.float64)
    b = states.shape[0]
    tiled, latents = _pair_inputs(actor, states, n, rng)
    actions = actor.act_numpy(tiled, latents)
    dist = np.maximum(np.linalg.norm(actions[: n * b] - actions[n * b :], axis=-1), EPS_DISTANCE)
    return np.log(dist).reshape(n, b).mean(axis=0)


def diversity_loss_term(actor, states: np.ndarray, n: int, rng: np.random.Generator) -> Array:
    """Differentiable batch-mean diversity estimate (scalar Array).

    Gradients flow through both members of every pair back to the actor
    parameters; same latent draw order as :func:`diversity_per_state`.
    """
    states = np.asarray(states, dtype=np.float64)
    b = states.shape[0]
    tiled, latents = _pair_inputs(actor, states, n, rng)
    actions = actor.act(tiled, latents)
    diff = ad.sub(ad.slice_rows(actions, 0, n * b), ad.slice_rows(actions, n * b, 2 * n * b))
    floored = ad.maximum(ad.l2norm(diff), Array(np.full(n * b, EPS_DISTANCE)))
    return ad.mean(ad.log(floored))


def _pair_distances(points) -> np.ndarray:
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim == 1:
        pts = pts[:, None]
    if pts.shape[0] < 2:
        raise ValueError(f"need at least 2 points, got {pts.shape[0]}")
    i, j = np.triu_indices(pts.shape[0], k=1)
    return np.linalg.norm(pts[i] - pts[j], axis=-1)


def mean_pairwise_distance(points) -> float:
    """Arithmetic mean of L2 distances over all unordered pairs."""
    return float(np.mean(_pair_distances(points)))


def geometric_mean_distance(points) -> float:
    """Geometric mean of floored pairwise distances, computed in log space.

    Unlike the arithmetic mean, tiny intra-cluster distances drag this
    sharply down, which is the point of using it as a diagnostic.
    """
    d = np.maximum(_pair_distances(points), EPS_DISTANCE)
    return float(np.exp(np.mean(np.log(d))))
