"""Scripted policies used as evaluation oracles in the tests."""

from __future__ import annotations

import numpy as np


class StationaryPolicy:
    """Always outputs the zero action; never reaches anything."""

    def sample_latent(self, rng, batch=None):
        return rng.standard_normal(1 if batch is None else (batch, 1))

    def act_numpy(self, obs, latent):
        return np.zeros(2)


class WaypointPolicy:
    """PD controller through a fixed waypoint chain ending at one goal.

    Episode boundaries are detected from the zero velocity that only occurs
    at reset, so one instance can be reused across episodes.
    """

    def __init__(self, spec, waypoints, kp=3.0, kd=4.0):
        self.spec = spec
        self.waypoints = list(waypoints)
        self.kp, self.kd = kp, kd
        self.idx = 0

    def sample_latent(self, rng, batch=None):
        return rng.standard_normal(1 if batch is None else (batch, 1))

    def act_numpy(self, obs, latent):
        if obs[2] == 0.0 and obs[3] == 0.0:
            self.idx = 0
        x = (obs[0] + 1.0) / 2.0 * self.spec.cols
        y = (obs[1] + 1.0) / 2.0 * self.spec.rows
        if self.idx < len(self.waypoints) - 1:
            tx, ty = self.waypoints[self.idx]
            if np.hypot(tx - x, ty - y) < 0.3:
                self.idx += 1
        tx, ty = self.waypoints[self.idx]
        return np.clip([self.kp * (tx - x) - self.kd * obs[2], self.kp * (ty - y) - self.kd * obs[3]], -1.0, 1.0)


def goal_seeker(spec, goal_id: int) -> WaypointPolicy:
    """Waypoint route on the shipped simple map toward one of its four goals.

    All routes climb the stem to the cross junction, then branch.
    """
    routes = {
        0: [(3.5, 3.5), (1.5, 3.5), (1.5, 5.5)],  # up, left, up to top-left
        1: [(3.5, 3.5), (5.5, 3.5), (5.5, 5.5)],
        2: [(3.5, 3.5), (1.5, 3.5), (1.5, 1.5)],  # up, left, down to bottom-left
        3: [(3.5, 3.5), (5.5, 3.5), (5.5, 1.5)],
    }
    return WaypointPolicy(spec, routes[goal_id])


class CoinPolicy:
    """Succeeds in half the episodes: steers iff the reset jitter pushed x right.

    The jitter sign is an exact fair coin, independent across episodes, so
    per-episode success probability is 0.5.
    """

    def __init__(self, spec):
        self.seeker = goal_seeker(spec, 2)
        self.steer = False

    def sample_latent(self, rng, batch=None):
        return rng.standard_normal(1 if batch is None else (batch, 1))

    def act_numpy(self, obs, latent):
        if obs[2] == 0.0 and obs[3] == 0.0:
            self.steer = obs[0] > 0.0
        if self.steer:
            return self.seeker.act_numpy(obs, latent)
        return np.zeros(2)
