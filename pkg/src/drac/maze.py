"""Multi-goal point-maze environment: damped point-mass dynamics on a grid.

Maps are plain-text grids (legend ``# . S G O``); ``O`` cells are free
during training and become walls under the obstacle perturbation. The
continuous coordinate frame is x rightward in [0, cols] and y upward in
[0, rows], so text row 0 is the top of the maze. Reaching any goal pays
+100 and ends the episode; everything else pays 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from importlib import resources

import numpy as np

WALL, FREE, START, GOAL, OBSTACLE = "#", ".", "S", "G", "O"
LEGEND = {WALL, FREE, START, GOAL, OBSTACLE}

GOAL_RADIUS = 0.45  # cell units
HORIZON = 300
START_JITTER = 0.1
VEL_DECAY = 0.9
VEL_GAIN = 0.1
DT = 0.25
_WALL_EPS = 1e-9


class MapError(ValueError):
    pass


@dataclass(frozen=True)
class MazeSpec:
    grid: tuple[str, ...]
    start: tuple[int, int]  # (row, col)
    goals: tuple[tuple[int, int], ...]  # row-major order, stable ids
    goal_radius: float = GOAL_RADIUS
    horizon: int = HORIZON
    start_jitter: float = START_JITTER

    @property
    def rows(self) -> int:
        return len(self.grid)

    @property
    def cols(self) -> int:
        return len(self.grid[0])

    def is_wall(self, row: int, col: int) -> bool:
        if not (0 <= row < self.rows and 0 <= col < self.cols):
            return True
        return self.grid[row][col] == WALL

    def cell_center(self, row: int, col: int) -> tuple[float, float]:
        return col + 0.5, self.rows - row - 0.5

    @property
    def goal_centers(self) -> np.ndarray:
        return np.array([self.cell_center(r, c) for r, c in self.goals], dtype=np.float64)


def parse_map(text: str) -> MazeSpec:
    lines = [line for line in text.splitlines() if line.strip() != ""]
    if not lines:
        raise MapError("empty map")
    width = len(lines[0])
    for i, line in enumerate(lines):
        if len(line) != width:
            raise MapError(f"ragged map: row {i} has length {len(line)}, expected {width}")
        bad = set(line) - LEGEND
        if bad:
            raise MapError(f"unknown map characters {sorted(bad)} in row {i}")
    starts = [(r, c) for r, line in enumerate(lines) for c, ch in enumerate(line) if ch == START]
    if len(starts) != 1:
        raise MapError(f"map must contain exactly one start cell, found {len(starts)}")
    goals = tuple((r, c) for r, line in enumerate(lines) for c, ch in enumerate(line) if ch == GOAL)
    if not goals:
        raise MapError("map contains no goal cells")
    border = (
        [lines[0], lines[-1]]
        + ["".join(line[0] for line in lines)]
        + ["".join(line[-1] for line in lines)]
    )
    if any(set(edge) != {WALL} for edge in border):
        raise MapError("map boundary must be all walls")
    return MazeSpec(grid=tuple(lines), start=starts[0], goals=goals)


def load_map(path) -> MazeSpec:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_map(fh.read())


def builtin_map_path(name: str):
    """Filesystem path of a map shipped with the package (simple/medium/hard)."""
    path = resources.files("drac").joinpath(f"maps/{name}.txt")
    if not path.is_file():
        raise MapError(f"no builtin map named {name!r}")
    return path


def perturb(spec: MazeSpec, kind: str, rng: np.random.Generator | None = None) -> MazeSpec:
    """Test-time perturbation: delete half the goals, or turn O cells into walls."""
    if kind == "removal":
        if len(spec.goals) < 2:
            raise MapError("removal perturbation needs at least 2 goals")
        if rng is None:
            raise MapError("removal perturbation needs an rng")
        k = math.ceil(len(spec.goals) / 2)
        removed = set(rng.choice(len(spec.goals), size=k, replace=False).tolist())
        grid = [list(row) for row in spec.grid]
        for i in sorted(removed):
            r, c = spec.goals[i]
            grid[r][c] = FREE
        goals = tuple(g for i, g in enumerate(spec.goals) if i not in removed)
        return replace(spec, grid=tuple("".join(row) for row in grid), goals=goals)
    if kind == "obstacle":
        grid = tuple(row.replace(OBSTACLE, WALL) for row in spec.grid)
        return replace(spec, grid=grid)
    raise MapError(f"unknown perturbation kind {kind!r}")


@dataclass(frozen=True)
class EnvState:
    x: float
    y: float
    vx: float
    vy: float
    steps: int


def observe(spec: MazeSpec, state: EnvState) -> np.ndarray:
    """(x, y, vx, vy) with positions affinely normalized to [-1, 1]."""
    return np.array(
        [
            2.0 * state.x / spec.cols - 1.0,
            2.0 * state.y / spec.rows - 1.0,
            state.vx,
            state.vy,
        ]
    )


def reset(spec: MazeSpec, rng: np.random.Generator) -> tuple[EnvState, np.ndarray]:
    cx, cy = spec.cell_center(*spec.start)
    jitter = rng.uniform(-spec.start_jitter, spec.start_jitter, size=2)
    state = EnvState(x=cx + float(jitter[0]), y=cy + float(jitter[1]), vx=0.0, vy=0.0, steps=0)
    return state, observe(spec, state)


def _move_axis(pos: float, vel: float, other_cell: int, spec: MazeSpec, axis: str) -> tuple[float, float]:
    """Advance one axis, clamping at a wall face and zeroing the velocity there.

    Speed is bounded by 1 so at most one cell boundary is crossed per step.
    """
    new = pos + DT * vel
    old_cell, new_cell = math.floor(pos), math.floor(new)
    if new_cell != old_cell:
        if axis == "x":
            wall = spec.is_wall(spec.rows - 1 - other_cell, new_cell)
        else:
            wall = spec.is_wall(spec.rows - 1 - new_cell, other_cell)
        if wall:
            new = new_cell - _WALL_EPS if new_cell > old_cell else old_cell + _WALL_EPS
            vel = 0.0
    return new, vel


def step(spec: MazeSpec, state: EnvState, action) -> tuple[EnvState, np.ndarray, float, bool, dict]:
    action = np.asarray(action, dtype=np.float64)
    clipped = bool(np.any(action < -1.0) or np.any(action > 1.0))
    action = np.clip(action, -1.0, 1.0)

    vx = VEL_DECAY * state.vx + VEL_GAIN * float(action[0])
    vy = VEL_DECAY * state.vy + VEL_GAIN * float(action[1])
    x, vx = _move_axis(state.x, vx, math.floor(state.y), spec, "x")
    y, vy = _move_axis(state.y, vy, math.floor(x), spec, "y")

    new_state = EnvState(x=x, y=y, vx=vx, vy=vy, steps=state.steps + 1)
    info = {"goal_id": -1, "truncated": False, "action_clipped": clipped}

    dists = np.linalg.norm(spec.goal_centers - np.array([x, y]), axis=-1)
    hit = int(np.argmin(dists))
    if dists[hit] <= spec.goal_radius:
        info["goal_id"] = hit
        return new_state, observe(spec, new_state), 100.0, True, info
    if new_state.steps >= spec.horizon:
        info["truncated"] = True
        return new_state, observe(spec, new_state), 0.0, True, info
    return new_state, observe(spec, new_state), 0.0, False, info


class MazeEnv:
    """Stateful wrapper owning one rollout at a time."""

    def __init__(self, spec: MazeSpec):
        self.spec = spec
        self.state: EnvState | None = None

    @property
    def obs_dim(self) -> int:
        return 4

    @property
    def action_dim(self) -> int:
        return 2

    def reset(self, rng: np.random.Generator) -> np.ndarray:
        self.state, obs = reset(self.spec, rng)
        return obs

    def step(self, action) -> tuple[np.ndarray, float, bool, dict]:
        if self.state is None:
            raise RuntimeError("step before reset")
        self.state, obs, reward, done, info = step(self.spec, self.state, action)
        return obs, reward, done, info
