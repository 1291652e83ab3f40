"""Stochastic-mapping actors: Gaussian, amortized, and diffusion policies.

Each actor is a deterministic, differentiable map from (state, latent) to a
bounded action together with a fixed latent sampler; drawing an action means
drawing a latent and applying the map. ``act`` builds the gradient history
for training, ``act_numpy`` is the history-free twin for rollouts (the two
are arithmetic-identical and unit-tested as such).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Array
from .nn import MlpParams, mlp_apply, mlp_apply_numpy, mlp_init, mlp_parameters, mlp_with_parameters

LOGSTD_MIN = -5.0
LOGSTD_MAX = 2.0
DEFAULT_HIDDEN = (256, 256)


class ActorKind(enum.Enum):
    GAUSSIAN = "gaussian"
    AMORTIZED = "amortized"
    DIFFUSION = "diffusion"


@dataclass(frozen=True)
class DiffusionSchedule:
    """Noise schedule: beta per step, alpha = 1 - beta, alpha_bar its running product."""

    beta: np.ndarray

    def __post_init__(self):
        beta = np.asarray(self.beta, dtype=np.float64)
        if beta.ndim != 1 or beta.size < 1:
            raise ValueError("DiffusionSchedule: beta must be a nonempty 1-D sequence")
        if np.any(beta <= 0.0) or np.any(beta >= 1.0):
            raise ValueError("DiffusionSchedule: beta values must lie strictly in (0, 1)")
        object.__setattr__(self, "beta", beta)

    @property
    def steps(self) -> int:
        return self.beta.size

    @property
    def alpha(self) -> np.ndarray:
        return 1.0 - self.beta

    @property
    def alpha_bar(self) -> np.ndarray:
        return np.cumprod(self.alpha)


def make_schedule(steps: int) -> DiffusionSchedule:
    """Linear beta from 1e-4 to 0.2 over the given number of denoising steps."""
    if steps < 1:
        raise ValueError(f"make_schedule: need at least 1 step, got {steps}")
    return DiffusionSchedule(beta=np.linspace(1e-4, 0.2, steps))


def t_embedding(t: int, steps: int) -> float:
    """Scalar step feature 2t/T - 1 in [-1, 1] fed to the denoising net."""
    if not 1 <= t <= steps:
        raise ValueError(f"t_embedding: t={t} outside 1..{steps}")
    return 2.0 * t / steps - 1.0


def _check_latent(kind: str, latent: np.ndarray, expected_last: int, expected_ndim: tuple):
    if latent.ndim not in expected_ndim or latent.shape[-1] != expected_last:
        raise ValueError(f"{kind} actor: latent shape {latent.shape} does not match the actor")


class GaussianActor:
    """tanh(mu(s) + sigma(s) * z) with a state-dependent, clamped log-std head."""

    kind = ActorKind.GAUSSIAN

    def __init__(self, obs_dim: int, action_dim: int, hidden=DEFAULT_HIDDEN, seed: int = 0, net: MlpParams | None = None):
        self.obs_dim = obs_dim
        self.action_dim = action_dim
        self.latent_dim = action_dim
        self.net = net if net is not None else mlp_init((obs_dim, *hidden, 2 * action_dim), "identity", seed)

    def sample_latent(self, rng: np.random.Generator, batch: int | None = None) -> np.ndarray:
        shape = (self.latent_dim,) if batch is None else (batch, self.latent_dim)
        return rng.standard_normal(shape)

    def act(self, state, latent: np.ndarray) -> Array:
        latent = np.asarray(latent, dtype=np.float64)
        _check_latent("gaussian", latent, self.latent_dim, (1, 2))
        out = mlp_apply(self.net, state)
        mu = ad.slice_features(out, 0, self.action_dim)
        log_std = ad.slice_features(out, self.action_dim, 2 * self.action_dim)
        sigma = ad.exp(ad.clip(log_std, LOGSTD_MIN, LOGSTD_MAX))
        return ad.tanh(ad.add(mu, ad.mul(sigma, Array(latent))))

    def act_numpy(self, state: np.ndarray, latent: np.ndarray) -> np.ndarray:
        latent = np.asarray(latent, dtype=np.float64)
        _check_latent("gaussian", latent, self.latent_dim, (1, 2))
        out = mlp_apply_numpy(self.net, state)
        mu = out[..., : self.action_dim]
        sigma = np.exp(np.clip(out[..., self.action_dim :], LOGSTD_MIN, LOGSTD_MAX))
        return np.tanh(mu + sigma * latent)

    def parameters(self) -> list[Array]:
        return mlp_parameters(self.net)

    def set_parameters(self, flat) -> None:
        self.net = mlp_with_parameters(self.net, flat)


class AmortizedActor:
    """Direct net on the concatenation of state and latent, tanh-bounded output."""

    kind = ActorKind.AMORTIZED

    def __init__(
        self,
        obs_dim: int,
        action_dim: int,
        latent_dim: int | None = None,
        hidden=DEFAULT_HIDDEN,
        seed: int = 0,
        net: MlpParams | None = None,
    ):
        self.obs_dim = obs_dim
        self.action_dim = action_dim
        self.latent_dim = latent_dim if latent_dim is not None else action_dim
        self.net = net if net is not None else mlp_init((obs_dim + self.latent_dim, *hidden, action_dim), "tanh", seed)

    def sample_latent(self, rng: np.random.Generator, batch: int | None = None) -> np.ndarray:
        shape = (self.latent_dim,) if batch is None else (batch, self.latent_dim)
        return rng.standard_normal(shape)

    def act(self, state, latent: np.ndarray) -> Array:
        latent = np.asarray(latent, dtype=np.float64)
        _check_latent("amortized", latent, self.latent_dim, (1, 2))
        s = state if isinstance(state, Array) else Array(state)
        return mlp_apply(self.net, ad.concat(s, Array(latent)))

    def act_numpy(self, state: np.ndarray, latent: np.ndarray) -> np.ndarray:
        latent = np.asarray(latent, dtype=np.float64)
        _check_latent("amortized", latent, self.latent_dim, (1, 2))
        x = np.concatenate([np.asarray(state, dtype=np.float64), latent], axis=-1)
        return mlp_apply_numpy(self.net, x)

    def parameters(self) -> list[Array]:
        return mlp_parameters(self.net)

    def set_parameters(self, flat) -> None:
        self.net = mlp_with_parameters(self.net, flat)


class DiffusionActor:
    """Action as the terminal state of a learned reverse-diffusion chain.

    The latent is the full noise bundle z_0..z_T: x_T = z_T, and each
    denoising step t = T..1 computes

        x_{t-1} = (x_t - beta_t / sqrt(1 - alpha_bar_t) * eps(s, x_t, t)) / sqrt(alpha_t)
                  + sqrt(beta_t) * z_{t-1},

    noise included at every step; x_0 is then hard-clipped to [-1, 1].
    """

    kind = ActorKind.DIFFUSION

    def __init__(
        self,
        obs_dim: int,
        action_dim: int,
        steps: int = 20,
        hidden=DEFAULT_HIDDEN,
        seed: int = 0,
        net: MlpParams | None = None,
        schedule: DiffusionSchedule | None = None,
    ):
        self.obs_dim = obs_dim
        self.action_dim = action_dim
        self.schedule = schedule if schedule is not None else make_schedule(steps)
        self.latent_dim = action_dim  # per noise vector; the bundle holds steps+1 of them
        self.net = net if net is not None else mlp_init((obs_dim + action_dim + 1, *hidden, action_dim), "identity", seed)

    @property
    def steps(self) -> int:
        return self.schedule.steps

    def sample_latent(self, rng: np.random.Generator, batch: int | None = None) -> np.ndarray:
        if batch is None:
            return rng.standard_normal((self.steps + 1, self.action_dim))
        return rng.standard_normal((self.steps + 1, batch, self.action_dim))

    def _check_bundle(self, state: np.ndarray, latent: np.ndarray):
        single = np.asarray(state).ndim == 1
        want_ndim = 2 if single else 3
        if latent.ndim != want_ndim or latent.shape[0] != self.steps + 1 or latent.shape[-1] != self.action_dim:
            raise ValueError(f"diffusion actor: latent shape {latent.shape} does not match the actor")

    def act(self, state, latent: np.ndarray) -> Array:
        latent = np.asarray(latent, dtype=np.float64)
        sdata = state.data if isinstance(state, Array) else np.asarray(state, dtype=np.float64)
        self._check_bundle(sdata, latent)
        s = state if isinstance(state, Array) else Array(sdata)
        alpha, alpha_bar, beta = self.schedule.alpha, self.schedule.alpha_bar, self.schedule.beta
        x = Array(latent[self.steps])
        for t in range(self.steps, 0, -1):
            emb = t_embedding(t, self.steps)
            temb = Array(np.array([emb]) if sdata.ndim == 1 else np.full((sdata.shape[0], 1), emb))
            eps = mlp_apply(self.net, ad.concat(s, x, temb))
            x = ad.scale(ad.sub(x, ad.scale(eps, beta[t - 1] / np.sqrt(1.0 - alpha_bar[t - 1]))), 1.0 / np.sqrt(alpha[t - 1]))
            x = ad.add(x, Array(np.sqrt(beta[t - 1]) * latent[t - 1]))
        return ad.clip(x, -1.0, 1.0)

    def act_numpy(self, state: np.ndarray, latent: np.ndarray) -> np.ndarray:
        latent = np.asarray(latent, dtype=np.float64)
        s = np.asarray(state, dtype=np.float64)
        self._check_bundle(s, latent)
        alpha, alpha_bar, beta = self.schedule.alpha, self.schedule.alpha_bar, self.schedule.beta
        x = latent[self.steps]
        for t in range(self.steps, 0, -1):
            emb = t_embedding(t, self.steps)
            temb = np.array([emb]) if s.ndim == 1 else np.full((s.shape[0], 1), emb)
            eps = mlp_apply_numpy(self.net, np.concatenate([s, x, temb], axis=-1))
            # same arithmetic as act() so the two paths agree bit for bit
            x = (x - eps * (beta[t - 1] / np.sqrt(1.0 - alpha_bar[t - 1]))) * (1.0 / np.sqrt(alpha[t - 1]))
            x = x + np.sqrt(beta[t - 1]) * latent[t - 1]
        return np.clip(x, -1.0, 1.0)

    def parameters(self) -> list[Array]:
        return mlp_parameters(self.net)

    def set_parameters(self, flat) -> None:
        self.net = mlp_with_parameters(self.net, flat)


Actor = GaussianActor | AmortizedActor | DiffusionActor


def make_actor(
    kind: ActorKind | str,
    obs_dim: int,
    action_dim: int,
    hidden=DEFAULT_HIDDEN,
    seed: int = 0,
    latent_dim: int | None = None,
    diffusion_steps: int = 20,
) -> Actor:
    kind = ActorKind(kind) if not isinstance(kind, ActorKind) else kind
    if kind is ActorKind.GAUSSIAN:
        return GaussianActor(obs_dim, action_dim, hidden=hidden, seed=seed)
    if kind is ActorKind.AMORTIZED:
        return AmortizedActor(obs_dim, action_dim, latent_dim=latent_dim, hidden=hidden, seed=seed)
    return DiffusionActor(obs_dim, action_dim, steps=diffusion_steps, hidden=hidden, seed=seed)
