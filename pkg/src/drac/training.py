"""Diversity-regularized actor-critic training.

One loop step stores a transition, then (past warmup) performs gradient
steps until the gradient-step count catches up with replay_ratio times the
post-warmup environment steps. Each gradient step, in order: critic update
against a diversity-augmented bootstrap target, reparameterized actor
update, temperature dual update, Polyak target smoothing.

Randomness comes from a single stream with a fixed draw order so runs are
bit-reproducible: episode reset noise -> action latent -> batch indices ->
target latents (next-action latent, then pair block) -> actor latents
(action latent, then pair block). Network initialization and evaluation use
seeds derived from the root seed and never touch the training stream.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from . import autodiff as ad
from .autodiff import Array
from .actors import Actor, ActorKind, make_actor
from .diversity import diversity_loss_term, diversity_per_state
from .evaluation import EvalReport, evaluate
from .maze import MazeEnv, load_map
from .nn import AdamState, MlpParams, adam_init, adam_step, mlp_apply, mlp_apply_numpy, mlp_init, mlp_parameters, mlp_with_parameters, polyak_update


class ConfigError(ValueError):
    pass


@dataclass
class TrainConfig:
    """Full hyperparameter record for one training run."""

    map_path: str
    actor_kind: ActorKind
    seed: int
    total_steps: int
    gamma: float = 0.99
    rho: float = 0.005
    batch_size: int = 256
    replay_ratio: float = 1.0
    n_pairs: int = 8
    beta: float = 0.8
    warmup_steps: int = 5000
    eval_period: int = 5000
    eval_episodes: int = 100
    diffusion_steps: int = 20
    lr: float = 3e-4
    alpha_lr: float = 5e-3
    latent_dim: int | None = None
    hidden: tuple[int, ...] = (256, 256)
    fixed_alpha: float | None = None  # freeze the temperature (0 disables diversity)
    early_stop_success: float | None = None
    early_stop_reachable: int | None = None
    buffer_capacity: int = 1_000_000

    def validate(self) -> list[str]:
        errors = []
        positive = [
            ("gamma", self.gamma), ("rho", self.rho), ("batch_size", self.batch_size),
            ("replay_ratio", self.replay_ratio), ("n_pairs", self.n_pairs), ("beta", self.beta),
            ("eval_period", self.eval_period), ("eval_episodes", self.eval_episodes),
            ("diffusion_steps", self.diffusion_steps), ("lr", self.lr), ("alpha_lr", self.alpha_lr),
            ("buffer_capacity", self.buffer_capacity),
        ]
        for name, value in positive:
            if value <= 0:
                errors.append(f"{name} must be positive, got {value}")
        if self.total_steps < 0:
            errors.append(f"total_steps must be >= 0, got {self.total_steps}")
        if self.warmup_steps < self.batch_size:
            errors.append(
                f"warmup_steps ({self.warmup_steps}) must be >= batch_size ({self.batch_size}) "
                "so the first sampled batch is full"
            )
        if self.gamma >= 1.0:
            errors.append(f"gamma must be < 1, got {self.gamma}")
        if not 0.0 <= self.rho <= 1.0:
            errors.append(f"rho must be in [0, 1], got {self.rho}")
        if self.fixed_alpha is not None and self.fixed_alpha < 0:
            errors.append(f"fixed_alpha must be >= 0, got {self.fixed_alpha}")
        if self.latent_dim is not None and self.latent_dim <= 0:
            errors.append(f"latent_dim must be positive, got {self.latent_dim}")
        if not self.hidden or any(h <= 0 for h in self.hidden):
            errors.append(f"hidden sizes must be positive, got {self.hidden}")
        return errors


@dataclass(frozen=True)
class Transition:
    obs: np.ndarray
    action: np.ndarray
    reward: float
    next_obs: np.ndarray
    done: float  # 1 only for goal termination; horizon truncation stores 0


@dataclass(frozen=True)
class Batch:
    obs: np.ndarray
    action: np.ndarray
    reward: np.ndarray  # (B, 1)
    next_obs: np.ndarray
    done: np.ndarray  # (B, 1)


class ReplayBuffer:
    """Bounded FIFO store with uniform (with-replacement) sampling."""

    def __init__(self, capacity: int, obs_dim: int, action_dim: int):
        if capacity < 1:
            raise ValueError("replay buffer capacity must be >= 1")
        self.capacity = capacity
        self._obs = np.zeros((capacity, obs_dim))
        self._action = np.zeros((capacity, action_dim))
        self._reward = np.zeros((capacity, 1))
        self._next_obs = np.zeros((capacity, obs_dim))
        self._done = np.zeros((capacity, 1))
        self._cursor = 0
        self._size = 0

    def __len__(self) -> int:
        return self._size

    def add(self, obs, action, reward: float, next_obs, done: float) -> None:
        i = self._cursor
        self._obs[i] = obs
        self._action[i] = action
        self._reward[i, 0] = reward
        self._next_obs[i] = next_obs
        self._done[i, 0] = done
        self._cursor = (i + 1) % self.capacity
        self._size = min(self._size + 1, self.capacity)

    def contents(self) -> list[Transition]:
        order = [(self._cursor + k) % self.capacity for k in range(self._size)] if self._size == self.capacity else range(self._size)
        return [
            Transition(self._obs[i].copy(), self._action[i].copy(), float(self._reward[i, 0]), self._next_obs[i].copy(), float(self._done[i, 0]))
            for i in order
        ]

    def sample(self, batch_size: int, rng: np.random.Generator) -> Batch:
        if self._size < batch_size:
            raise ValueError(f"replay buffer holds {self._size} < batch size {batch_size}")
        idx = rng.integers(0, self._size, size=batch_size)
        return Batch(
            obs=self._obs[idx],
            action=self._action[idx],
            reward=self._reward[idx],
            next_obs=self._next_obs[idx],
            done=self._done[idx],
        )


# ---------------------------------------------------------------------------
# temperature


def target_diversity(beta: float, action_dim: int) -> float:
    """log(beta * sqrt(|A|)), the target the temperature dual steers toward."""
    if beta <= 0:
        raise ValueError(f"target_diversity: beta must be positive, got {beta}")
    if action_dim < 1:
        raise ValueError(f"target_diversity: action_dim must be >= 1, got {action_dim}")
    return float(np.log(beta * np.sqrt(action_dim)))


def alpha_of(w: float) -> float:
    """Continuous positive parameterization: exp(w) below 0, w + 1 above."""
    return math.exp(w) if w < 0 else w + 1.0


@dataclass(frozen=True)
class TemperatureState:
    w: float
    target: float
    lr: float = 5e-3

    @property
    def alpha(self) -> float:
        return alpha_of(self.w)


def alpha_step(temp: TemperatureState, diversity_mean: float) -> TemperatureState:
    """One dual descent step on alpha(w) * (D_mean - D_target)."""
    dalpha_dw = math.exp(temp.w) if temp.w < 0 else 1.0
    return replace(temp, w=temp.w - temp.lr * (diversity_mean - temp.target) * dalpha_dw)


# ---------------------------------------------------------------------------
# critics


@dataclass
class CriticEnsemble:
    q1: MlpParams
    q2: MlpParams
    q1_target: MlpParams
    q2_target: MlpParams
    adam1: AdamState
    adam2: AdamState


def _copy_mlp(net: MlpParams) -> MlpParams:
    layers = [(Array(w.data.copy(), requires_grad=True), Array(b.data.copy(), requires_grad=True)) for w, b in net.layers]
    return replace(net, layers=layers)


def make_critics(obs_dim: int, action_dim: int, hidden: Sequence[int], lr: float, seed1: int, seed2: int) -> CriticEnsemble:
    sizes = (obs_dim + action_dim, *hidden, 1)
    q1 = mlp_init(sizes, "identity", seed1)
    q2 = mlp_init(sizes, "identity", seed2)
    return CriticEnsemble(
        q1=q1, q2=q2, q1_target=_copy_mlp(q1), q2_target=_copy_mlp(q2),
        adam1=adam_init(mlp_parameters(q1), lr), adam2=adam_init(mlp_parameters(q2), lr),
    )


def compute_critic_target(
    batch: Batch, actor: Actor, critics: CriticEnsemble, alpha: float,
    gamma: float, n_pairs: int, rng: np.random.Generator,
) -> np.ndarray:
    """Per-sample bootstrap targets y, detached from every network by construction.

    y = r + gamma * (1 - d) * (min_i Qhat_i(s', f(s', z)) + alpha * D(s'))
    """
    z = actor.sample_latent(rng, batch=batch.next_obs.shape[0])
    next_action = actor.act_numpy(batch.next_obs, z)
    sa = np.concatenate([batch.next_obs, next_action], axis=-1)
    v_min = np.minimum(mlp_apply_numpy(critics.q1_target, sa), mlp_apply_numpy(critics.q2_target, sa))
    bootstrap = v_min
    if alpha != 0.0:
        d = diversity_per_state(actor, batch.next_obs, n_pairs, rng)[:, None]
        bootstrap = v_min + alpha * d
    return batch.reward + gamma * (1.0 - batch.done) * bootstrap


def critic_step(
    batch: Batch, actor: Actor, critics: CriticEnsemble, alpha: float,
    gamma: float, n_pairs: int, rng: np.random.Generator,
) -> tuple[CriticEnsemble, float, float]:
    """Adam step on each critic's MSE against the shared target."""
    y = Array(compute_critic_target(batch, actor, critics, alpha, gamma, n_pairs, rng))
    sa = np.concatenate([batch.obs, batch.action], axis=-1)
    losses = []
    nets = []
    adams = []
    for net, adam in ((critics.q1, critics.adam1), (critics.q2, critics.adam2)):
        q = mlp_apply(net, sa)
        loss = ad.mean(ad.square(ad.sub(q, y)))
        params = mlp_parameters(net)
        grads = ad.gradients(loss, params)
        new_flat, new_adam = adam_step(params, grads, adam)
        nets.append(mlp_with_parameters(net, new_flat))
        adams.append(new_adam)
        losses.append(loss.item())
    new = replace(critics, q1=nets[0], q2=nets[1], adam1=adams[0], adam2=adams[1])
    return new, losses[0], losses[1]


def actor_step(
    states: np.ndarray, actor: Actor, critics: CriticEnsemble, actor_adam: AdamState,
    alpha: float, n_pairs: int, rng: np.random.Generator,
) -> tuple[AdamState, float, float | None]:
    """Reparameterized policy-gradient step on -(min Q + alpha * D); critics frozen.

    Returns the new Adam state, the loss value, and the batch-mean diversity
    estimate (None when alpha is exactly 0, where the term is skipped).
    The actor's parameters are replaced in place.
    """
    z = actor.sample_latent(rng, batch=states.shape[0])
    action = actor.act(states, z)
    sa = ad.concat(Array(states), action)
    q_min = ad.minimum(mlp_apply(critics.q1, sa, frozen=True), mlp_apply(critics.q2, sa, frozen=True))
    loss = ad.scale(ad.mean(q_min), -1.0)
    diversity_mean = None
    if alpha != 0.0:
        d_term = diversity_loss_term(actor, states, n_pairs, rng)
        loss = ad.sub(loss, ad.scale(d_term, alpha))
        diversity_mean = d_term.item()
    params = actor.parameters()
    grads = ad.gradients(loss, params)
    new_flat, new_adam = adam_step(params, grads, actor_adam)
    actor.set_parameters(new_flat)
    return new_adam, loss.item(), diversity_mean


# ---------------------------------------------------------------------------
# the loop


@dataclass(frozen=True)
class MetricsRow:
    env_step: int
    gradient_step: int
    success_rate: float
    reachable_goals: int
    alpha: float
    diversity_mean: float
    critic_loss: float
    actor_loss: float


@dataclass
class TrainResult:
    actor: Actor
    critics: CriticEnsemble
    actor_adam: AdamState
    temperature: TemperatureState
    metrics: list[MetricsRow]
    env_steps: int
    gradient_steps: int
    stopped_early: bool = False


def derived_seeds(seed: int) -> np.ndarray:
    """Stable sub-seeds: actor init, q1 init, q2 init, training stream, eval root."""
    return np.random.SeedSequence(seed).generate_state(5, dtype=np.uint32)


def train(config: TrainConfig, env: MazeEnv | None = None, on_eval=None) -> TrainResult:
    """Run the full training loop; ``on_eval(row, snapshot)`` fires per eval point."""
    errors = config.validate()
    if errors:
        raise ConfigError("invalid config:\n" + "\n".join(f"  - {e}" for e in errors))
    if env is None:
        env = MazeEnv(load_map(config.map_path))

    actor_seed, q1_seed, q2_seed, stream_seed, eval_root = (int(s) for s in derived_seeds(config.seed))
    actor = make_actor(
        config.actor_kind, env.obs_dim, env.action_dim, hidden=config.hidden,
        seed=actor_seed, latent_dim=config.latent_dim, diffusion_steps=config.diffusion_steps,
    )
    critics = make_critics(env.obs_dim, env.action_dim, config.hidden, config.lr, q1_seed, q2_seed)
    actor_adam = adam_init(actor.parameters(), config.lr)
    temperature = TemperatureState(w=0.0, target=target_diversity(config.beta, env.action_dim), lr=config.alpha_lr)
    buffer = ReplayBuffer(min(config.buffer_capacity, max(config.total_steps, 1)), env.obs_dim, env.action_dim)

    rng = np.random.default_rng(stream_seed)
    obs = env.reset(rng)
    need_reset = False

    metrics: list[MetricsRow] = []
    gradient_steps = 0
    window = {"critic": 0.0, "actor": 0.0, "diversity": 0.0, "n": 0, "n_div": 0}
    stopped_early = False
    env_step = 0

    def snapshot() -> TrainResult:
        return TrainResult(actor, critics, actor_adam, temperature, metrics, env_step, gradient_steps, stopped_early)

    for env_step in range(1, config.total_steps + 1):
        if need_reset:
            obs = env.reset(rng)
            need_reset = False
        if env_step <= config.warmup_steps:
            action = rng.uniform(-1.0, 1.0, size=env.action_dim)
        else:
            action = actor.act_numpy(obs, actor.sample_latent(rng))
        next_obs, reward, done, info = env.step(action)
        terminal = 1.0 if (done and info["goal_id"] >= 0) else 0.0
        buffer.add(obs, action, reward, next_obs, terminal)
        obs = next_obs
        need_reset = done

        if env_step > config.warmup_steps:
            while gradient_steps < (env_step - config.warmup_steps) * config.replay_ratio:
                batch = buffer.sample(config.batch_size, rng)
                alpha = config.fixed_alpha if config.fixed_alpha is not None else temperature.alpha
                critics, loss1, loss2 = critic_step(batch, actor, critics, alpha, config.gamma, config.n_pairs, rng)
                actor_adam, actor_loss, diversity_mean = actor_step(
                    batch.obs, actor, critics, actor_adam, alpha, config.n_pairs, rng
                )
                if config.fixed_alpha is None and diversity_mean is not None:
                    temperature = alpha_step(temperature, diversity_mean)
                critics.q1_target = polyak_update(critics.q1_target, critics.q1, config.rho)
                critics.q2_target = polyak_update(critics.q2_target, critics.q2, config.rho)
                gradient_steps += 1
                window["critic"] += 0.5 * (loss1 + loss2)
                window["actor"] += actor_loss
                window["n"] += 1
                if diversity_mean is not None:
                    window["diversity"] += diversity_mean
                    window["n_div"] += 1

        if env_step % config.eval_period == 0:
            report = evaluate(actor, env.spec, config.eval_episodes, np.random.default_rng([eval_root, env_step]))
            row = MetricsRow(
                env_step=env_step,
                gradient_step=gradient_steps,
                success_rate=report.success_rate,
                reachable_goals=report.reachable_goals,
                alpha=config.fixed_alpha if config.fixed_alpha is not None else temperature.alpha,
                diversity_mean=window["diversity"] / window["n_div"] if window["n_div"] else float("nan"),
                critic_loss=window["critic"] / window["n"] if window["n"] else float("nan"),
                actor_loss=window["actor"] / window["n"] if window["n"] else float("nan"),
            )
            metrics.append(row)
            window = {"critic": 0.0, "actor": 0.0, "diversity": 0.0, "n": 0, "n_div": 0}
            if on_eval is not None:
                on_eval(row, snapshot())
            if (
                config.early_stop_success is not None
                and report.success_rate >= config.early_stop_success
                and (config.early_stop_reachable is None or report.reachable_goals >= config.early_stop_reachable)
            ):
                stopped_early = True
                break

    return snapshot()
