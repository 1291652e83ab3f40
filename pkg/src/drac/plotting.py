"""Standalone SVG rendering of mazes and evaluation trajectories.

Hand-written markup keeps the output dependency-free and easy to assert on:
walls are unit squares, goals are circles at their capture radius, each
episode is one polyline (or a dot for stationary episodes).
"""

from __future__ import annotations

import csv
from pathlib import Path

from .maze import GOAL, MazeSpec, OBSTACLE, WALL

CELL_PX = 48
PALETTE = (
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
    "#17becf", "#e377c2", "#8c564b", "#bcbd22", "#7f7f7f",
)


class TrajectoryFormatError(ValueError):
    pass


def read_trajectories(path) -> dict[int, list[tuple[float, float]]]:
    """Parse the export CSV into per-episode (x, y) paths, validating the schema."""
    expected = ["episode", "step", "x", "y", "reward", "goal_id"]
    episodes: dict[int, list[tuple[float, float]]] = {}
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != expected:
            raise TrajectoryFormatError(f"{path}: bad header {header!r}, expected {expected!r}")
        for lineno, row in enumerate(reader, start=2):
            try:
                episode = int(row[0])
                x, y = float(row[2]), float(row[3])
            except (IndexError, ValueError):
                raise TrajectoryFormatError(f"{path}: bad row {lineno}: {row!r}") from None
            episodes.setdefault(episode, []).append((x, y))
    return episodes


def _svg_xy(spec: MazeSpec, x: float, y: float) -> tuple[float, float]:
    # SVG y axis points down; maze y axis points up.
    return x * CELL_PX, (spec.rows - y) * CELL_PX


def render_svg(spec: MazeSpec, episodes: dict[int, list[tuple[float, float]]]) -> str:
    width, height = spec.cols * CELL_PX, spec.rows * CELL_PX
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="#ffffff"/>',
    ]
    for r, line in enumerate(spec.grid):
        for c, ch in enumerate(line):
            if ch == WALL:
                parts.append(
                    f'<rect class="wall" x="{c * CELL_PX}" y="{r * CELL_PX}" '
                    f'width="{CELL_PX}" height="{CELL_PX}" fill="#444444"/>'
                )
            elif ch == OBSTACLE:
                parts.append(
                    f'<rect class="obstacle" x="{c * CELL_PX}" y="{r * CELL_PX}" '
                    f'width="{CELL_PX}" height="{CELL_PX}" fill="#cccccc"/>'
                )
    for goal_id, (r, c) in enumerate(spec.goals):
        gx, gy = _svg_xy(spec, *spec.cell_center(r, c))
        parts.append(
            f'<circle class="goal" data-goal-id="{goal_id}" cx="{gx}" cy="{gy}" '
            f'r="{spec.goal_radius * CELL_PX}" fill="#7fc97f" stroke="#2e7d32"/>'
        )
    sx, sy = _svg_xy(spec, *spec.cell_center(*spec.start))
    parts.append(f'<circle class="start" cx="{sx}" cy="{sy}" r="{0.18 * CELL_PX}" fill="#c62828"/>')
    for episode in sorted(episodes):
        points = episodes[episode]
        color = PALETTE[episode % len(PALETTE)]
        coords = [_svg_xy(spec, x, y) for x, y in points]
        if len(coords) == 1 or all(c == coords[0] for c in coords):
            px, py = coords[0]
            parts.append(
                f'<circle class="trajectory" data-episode="{episode}" cx="{px}" cy="{py}" '
                f'r="{0.1 * CELL_PX}" fill="{color}"/>'
            )
        else:
            path = " ".join(f"{px:.2f},{py:.2f}" for px, py in coords)
            parts.append(
                f'<polyline class="trajectory" data-episode="{episode}" points="{path}" '
                f'fill="none" stroke="{color}" stroke-width="2" stroke-opacity="0.8"/>'
            )
    parts.append("</svg>")
    return "\n".join(parts)


def plot_trajectories(trajectory_csv, spec: MazeSpec, out_path) -> None:
    episodes = read_trajectories(trajectory_csv)
    Path(out_path).write_text(render_svg(spec, episodes), encoding="utf-8")
