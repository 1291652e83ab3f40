"""Flat ``key = value`` run configuration files.

Lines are ``key = value`` with ``#`` comments; parsing is total: every
accepted file maps to exactly one TrainConfig, and a rejected file reports
every offending key at once. The ``map`` value is either a path (resolved
against the config file's directory) or a builtin name (simple, medium,
hard).
"""

from __future__ import annotations

from pathlib import Path

from .actors import ActorKind
from .maze import builtin_map_path
from .training import ConfigError, TrainConfig

BUILTIN_MAPS = ("simple", "medium", "hard")


def _parse_int(text: str) -> int:
    return int(text)


def _parse_float(text: str) -> float:
    return float(text)


def _parse_hidden(text: str) -> tuple[int, ...]:
    return tuple(int(part.strip()) for part in text.split(",") if part.strip())


_OPTIONAL_NONE = {"none", ""}

# key -> (TrainConfig field, converter, optional)
_KEYS = {
    "map": ("map_path", str, False),
    "actor": ("actor_kind", ActorKind, False),
    "seed": ("seed", _parse_int, False),
    "total_steps": ("total_steps", _parse_int, False),
    "gamma": ("gamma", _parse_float, True),
    "rho": ("rho", _parse_float, True),
    "batch_size": ("batch_size", _parse_int, True),
    "replay_ratio": ("replay_ratio", _parse_float, True),
    "n_pairs": ("n_pairs", _parse_int, True),
    "beta": ("beta", _parse_float, True),
    "warmup_steps": ("warmup_steps", _parse_int, True),
    "eval_period": ("eval_period", _parse_int, True),
    "eval_episodes": ("eval_episodes", _parse_int, True),
    "diffusion_steps": ("diffusion_steps", _parse_int, True),
    "lr": ("lr", _parse_float, True),
    "alpha_lr": ("alpha_lr", _parse_float, True),
    "latent_dim": ("latent_dim", _parse_int, True),
    "hidden": ("hidden", _parse_hidden, True),
    "fixed_alpha": ("fixed_alpha", _parse_float, True),
    "early_stop_success": ("early_stop_success", _parse_float, True),
    "early_stop_reachable": ("early_stop_reachable", _parse_int, True),
    "buffer_capacity": ("buffer_capacity", _parse_int, True),
    "run_dir": (None, str, True),  # consumed by the CLI, not TrainConfig
}


def resolve_map(value: str, base_dir: Path) -> tuple[str | None, str | None]:
    """Returns (resolved path, error)."""
    if value in BUILTIN_MAPS:
        return str(builtin_map_path(value)), None
    path = Path(value)
    if not path.is_absolute():
        path = base_dir / path
    if not path.is_file():
        return None, f"map: no such file {str(path)!r}"
    return str(path), None


def parse_config(path) -> tuple[TrainConfig, dict]:
    """Parse and validate one config file; raises ConfigError listing all problems."""
    path = Path(path)
    base_dir = path.parent
    errors: list[str] = []
    values: dict[str, object] = {}
    extras: dict[str, object] = {}

    for lineno, raw_line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        line = raw_line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            errors.append(f"line {lineno}: expected 'key = value', got {raw_line.strip()!r}")
            continue
        key, _, raw_value = line.partition("=")
        key = key.strip()
        raw_value = raw_value.strip()
        if key not in _KEYS:
            errors.append(f"line {lineno}: unknown key {key!r}")
            continue
        field, converter, optional = _KEYS[key]
        if key in values or (field is None and key in extras):
            errors.append(f"line {lineno}: duplicate key {key!r}")
            continue
        if optional and raw_value.lower() in _OPTIONAL_NONE:
            continue
        try:
            value = converter(raw_value)
        except (ValueError, KeyError):
            errors.append(f"line {lineno}: bad value for {key}: {raw_value!r}")
            continue
        if field is None:
            extras[key] = value
        else:
            values[field] = value

    for key, (field, _, optional) in _KEYS.items():
        if not optional and field is not None and field not in values:
            errors.append(f"missing required key {key!r}")

    if "map_path" in values:
        resolved, err = resolve_map(str(values["map_path"]), base_dir)
        if err:
            errors.append(err)
        else:
            values["map_path"] = resolved

    if not errors:
        config = TrainConfig(**values)  # type: ignore[arg-type]
        errors.extend(config.validate())
        if not errors:
            return config, extras
    raise ConfigError(f"invalid config {path}:\n" + "\n".join(f"  - {e}" for e in errors))
