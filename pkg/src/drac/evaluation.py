"""Evaluation protocols: success rate, reachable goals, few-shot robustness.

Policies are evaluated stochastically (a fresh latent every step) because
the spread of behavior is the object of study. Episodes run on independent
generators derived from the caller's rng, so reports are reproducible and
order-independent.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .maze import MazeSpec, perturb, reset, step

REACHABLE_FRACTION = 0.05  # a goal counts as reachable at >= 5% episode frequency


@dataclass(frozen=True)
class EvalReport:
    episodes: int
    success_rate: float
    per_goal_counts: dict[int, int]
    reachable_goals: int
    mean_episode_length: float


@dataclass(frozen=True)
class RobustnessReport:
    removal: float
    obstacle: float


def _episode_rngs(rng: np.random.Generator, n: int) -> list[np.random.Generator]:
    seeds = rng.integers(0, 2**63 - 1, size=n, dtype=np.int64)
    return [np.random.default_rng(int(s)) for s in seeds]


def rollout_episode(policy, spec: MazeSpec, rng: np.random.Generator, record: bool = False):
    """One episode with a fresh latent per step; optionally records (x, y) rows."""
    state, obs = reset(spec, rng)
    trajectory = []
    while True:
        latent = policy.sample_latent(rng)
        action = policy.act_numpy(obs, latent)
        state, obs, reward, done, info = step(spec, state, action)
        if record:
            trajectory.append((state.x, state.y, reward, info["goal_id"]))
        if done:
            return info["goal_id"], state.steps, trajectory


def evaluate(policy, spec: MazeSpec, episodes: int, rng: np.random.Generator) -> EvalReport:
    if episodes < 1:
        raise ValueError(f"evaluate: episodes must be >= 1, got {episodes}")
    counts: dict[int, int] = {}
    lengths = []
    successes = 0
    for episode_rng in _episode_rngs(rng, episodes):
        goal_id, steps, _ = rollout_episode(policy, spec, episode_rng)
        lengths.append(steps)
        if goal_id >= 0:
            successes += 1
            counts[goal_id] = counts.get(goal_id, 0) + 1
    threshold = max(1, math.ceil(REACHABLE_FRACTION * episodes))
    reachable = sum(1 for c in counts.values() if c >= threshold)
    return EvalReport(
        episodes=episodes,
        success_rate=successes / episodes,
        per_goal_counts=counts,
        reachable_goals=reachable,
        mean_episode_length=float(np.mean(lengths)),
    )


def five_episode_success(policy, spec: MazeSpec, repeats: int, rng: np.random.Generator) -> float:
    """Fraction of 5-episode blocks containing at least one success."""
    if repeats < 1:
        raise ValueError(f"five_episode_success: repeats must be >= 1, got {repeats}")
    hits = 0
    for _ in range(repeats):
        for episode_rng in _episode_rngs(rng, 5):
            goal_id, _, _ = rollout_episode(policy, spec, episode_rng)
            if goal_id >= 0:
                hits += 1
                break
    return hits / repeats


def robustness_suite(policy, spec: MazeSpec, rng: np.random.Generator, repeats: int = 400) -> RobustnessReport:
    """Five-episode success under goal removal and under activated obstacles."""
    removed = perturb(spec, "removal", rng)
    obstructed = perturb(spec, "obstacle")
    return RobustnessReport(
        removal=five_episode_success(policy, removed, repeats, rng),
        obstacle=five_episode_success(policy, obstructed, repeats, rng),
    )


def export_trajectories(policy, spec: MazeSpec, episodes: int, rng: np.random.Generator, path) -> None:
    """CSV rows (episode, step, x, y, reward, goal_id) with goal_id -1 off-goal."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["episode", "step", "x", "y", "reward", "goal_id"])
        for episode, episode_rng in enumerate(_episode_rngs(rng, episodes)):
            _, _, trajectory = rollout_episode(policy, spec, episode_rng, record=True)
            for step_idx, (x, y, reward, goal_id) in enumerate(trajectory, start=1):
                writer.writerow([episode, step_idx, repr(float(x)), repr(float(y)), repr(float(reward)), goal_id])
