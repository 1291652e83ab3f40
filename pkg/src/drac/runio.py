"""Run-directory bookkeeping: manifest, append-only metrics CSV, atomic writes."""

from __future__ import annotations

import hashlib
import json
import time
from dataclasses import asdict
from pathlib import Path

from .training import MetricsRow

METRICS_COLUMNS = (
    "env_step",
    "gradient_step",
    "success_rate",
    "reachable_goals",
    "alpha",
    "diversity_mean",
    "critic_loss",
    "actor_loss",
)


def atomic_write_text(path: Path, text: str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    tmp.replace(path)


def file_sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def metrics_row_text(row: MetricsRow) -> str:
    values = asdict(row)
    return ",".join(_fmt(values[c]) for c in METRICS_COLUMNS)


class RunWriter:
    """Owns one run directory: manifest at start, metrics rows and checkpoints as they come."""

    def __init__(self, run_dir, config_path, config_text: str, seed: int, map_path: str, code_version: str):
        self.run_dir = Path(run_dir)
        self.run_dir.mkdir(parents=True, exist_ok=True)
        self.metrics_path = self.run_dir / "metrics.csv"
        self._manifest = {
            "config_path": str(config_path),
            "config": config_text,
            "seed": seed,
            "code_version": code_version,
            "map_path": map_path,
            "map_sha256": file_sha256(map_path),
            "started_at": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
            "finished_at": None,
        }
        atomic_write_text(self.run_dir / "manifest.json", json.dumps(self._manifest, indent=2))
        atomic_write_text(self.metrics_path, ",".join(METRICS_COLUMNS) + "\n")

    def append_metrics(self, row: MetricsRow) -> None:
        with open(self.metrics_path, "a", encoding="utf-8") as fh:
            fh.write(metrics_row_text(row) + "\n")

    def finish(self) -> None:
        self._manifest["finished_at"] = time.strftime("%Y-%m-%dT%H:%M:%S%z")
        atomic_write_text(self.run_dir / "manifest.json", json.dumps(self._manifest, indent=2))
