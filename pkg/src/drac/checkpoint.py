"""Versioned binary checkpoints with bit-exact round trips.

Layout (all integers and floats little-endian):
  magic  8 bytes  b"DRACCKP\\x01"
  header: actor kind (u8), obs_dim u32, action_dim u32, latent_dim u32,
          diffusion_steps u32, env_step u64, gradient_step u64, w f64
  array table: count u32, then per array
          name (u16 length + utf-8), ndim u8, dims u32 each, f64 payload

Array names carry the structure ("actor.w0", "q1.b2", "adam.q1.m3",
"adam.actor.meta", ...), so loading rebuilds networks from shapes alone.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .actors import Actor, ActorKind, make_actor
from .nn import AdamState, MlpParams, mlp_parameters

MAGIC = b"DRACCKP\x01"
_KIND_CODE = {ActorKind.GAUSSIAN: 0, ActorKind.AMORTIZED: 1, ActorKind.DIFFUSION: 2}
_CODE_KIND = {v: k for k, v in _KIND_CODE.items()}


class CheckpointError(ValueError):
    pass


@dataclass
class Checkpoint:
    kind: ActorKind
    obs_dim: int
    action_dim: int
    latent_dim: int
    diffusion_steps: int
    env_step: int
    gradient_step: int
    w: float
    arrays: dict[str, np.ndarray]


def _mlp_arrays(prefix: str, net: MlpParams) -> dict[str, np.ndarray]:
    out = {}
    for i, (w, b) in enumerate(net.layers):
        out[f"{prefix}.w{i}"] = w.data
        out[f"{prefix}.b{i}"] = b.data
    return out


def _adam_arrays(prefix: str, state: AdamState) -> dict[str, np.ndarray]:
    out = {f"{prefix}.hyper": np.array([state.step_count, state.lr, state.beta1, state.beta2, state.eps])}
    for i, (m, v) in enumerate(zip(state.m, state.v)):
        out[f"{prefix}.m{i}"] = m
        out[f"{prefix}.v{i}"] = v
    return out


def _adam_from_arrays(prefix: str, arrays: dict[str, np.ndarray]) -> AdamState:
    meta = arrays[f"{prefix}.hyper"]
    n = sum(1 for k in arrays if k.startswith(f"{prefix}.m"))
    return AdamState(
        lr=float(meta[1]),
        m=[arrays[f"{prefix}.m{i}"] for i in range(n)],
        v=[arrays[f"{prefix}.v{i}"] for i in range(n)],
        step_count=int(meta[0]),
        beta1=float(meta[2]),
        beta2=float(meta[3]),
        eps=float(meta[4]),
    )


def _mlp_restore(prefix: str, template: MlpParams, arrays: dict[str, np.ndarray]) -> None:
    from .autodiff import Array

    layers = []
    for i in range(len(template.layers)):
        layers.append(
            (Array(arrays[f"{prefix}.w{i}"], requires_grad=True), Array(arrays[f"{prefix}.b{i}"], requires_grad=True))
        )
    template.layers = layers


def save_checkpoint(path, actor: Actor, critics, actor_adam: AdamState, w: float, env_step: int, gradient_step: int) -> None:
    arrays: dict[str, np.ndarray] = {}
    arrays.update(_mlp_arrays("actor", actor.net))
    arrays.update(_mlp_arrays("q1", critics.q1))
    arrays.update(_mlp_arrays("q2", critics.q2))
    arrays.update(_mlp_arrays("q1_target", critics.q1_target))
    arrays.update(_mlp_arrays("q2_target", critics.q2_target))
    arrays.update(_adam_arrays("adam.actor", actor_adam))
    arrays.update(_adam_arrays("adam.q1", critics.adam1))
    arrays.update(_adam_arrays("adam.q2", critics.adam2))

    diffusion_steps = getattr(actor, "steps", 0)
    blob = bytearray()
    blob += MAGIC
    blob += struct.pack(
        "<BIIIIQQd",
        _KIND_CODE[actor.kind],
        actor.obs_dim,
        actor.action_dim,
        actor.latent_dim,
        diffusion_steps,
        env_step,
        gradient_step,
        w,
    )
    blob += struct.pack("<I", len(arrays))
    for name in sorted(arrays):
        data = np.ascontiguousarray(arrays[name], dtype="<f8")
        encoded = name.encode("utf-8")
        blob += struct.pack("<H", len(encoded)) + encoded
        blob += struct.pack("<B", data.ndim) + struct.pack(f"<{data.ndim}I", *data.shape)
        blob += data.tobytes()

    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(bytes(blob))
    tmp.replace(path)


def load_checkpoint(path) -> Checkpoint:
    raw = Path(path).read_bytes()
    if raw[: len(MAGIC)] != MAGIC:
        raise CheckpointError(f"{path}: not a checkpoint file (bad magic)")
    off = len(MAGIC)
    kind_code, obs_dim, action_dim, latent_dim, diffusion_steps, env_step, gradient_step, w = struct.unpack_from(
        "<BIIIIQQd", raw, off
    )
    off += struct.calcsize("<BIIIIQQd")
    (count,) = struct.unpack_from("<I", raw, off)
    off += 4
    arrays: dict[str, np.ndarray] = {}
    for _ in range(count):
        (name_len,) = struct.unpack_from("<H", raw, off)
        off += 2
        name = raw[off : off + name_len].decode("utf-8")
        off += name_len
        (ndim,) = struct.unpack_from("<B", raw, off)
        off += 1
        dims = struct.unpack_from(f"<{ndim}I", raw, off)
        off += 4 * ndim
        n = int(np.prod(dims)) if ndim else 1
        arrays[name] = np.frombuffer(raw, dtype="<f8", count=n, offset=off).reshape(dims).copy()
        off += 8 * n
    if kind_code not in _CODE_KIND:
        raise CheckpointError(f"{path}: unknown actor kind code {kind_code}")
    return Checkpoint(
        kind=_CODE_KIND[kind_code],
        obs_dim=obs_dim,
        action_dim=action_dim,
        latent_dim=latent_dim,
        diffusion_steps=diffusion_steps,
        env_step=env_step,
        gradient_step=gradient_step,
        w=w,
        arrays=arrays,
    )


def actor_from_checkpoint(ckpt: Checkpoint, expect_kind: ActorKind | None = None) -> Actor:
    """Rebuild the actor (hidden sizes inferred from the stored shapes)."""
    if expect_kind is not None and ckpt.kind != expect_kind:
        raise CheckpointError(f"checkpoint holds a {ckpt.kind.value} actor, expected {expect_kind.value}")
    n_layers = sum(1 for k in ckpt.arrays if k.startswith("actor.w"))
    hidden = tuple(ckpt.arrays[f"actor.w{i}"].shape[0] for i in range(n_layers - 1))
    actor = make_actor(
        ckpt.kind, ckpt.obs_dim, ckpt.action_dim, hidden=hidden,
        latent_dim=ckpt.latent_dim, diffusion_steps=max(ckpt.diffusion_steps, 1),
    )
    _mlp_restore("actor", actor.net, ckpt.arrays)
    return actor


def training_state_from_checkpoint(ckpt: Checkpoint):
    """Rebuild (actor, critics, actor_adam) for resuming or regression tests."""
    from .training import CriticEnsemble

    actor = actor_from_checkpoint(ckpt)
    n_layers = sum(1 for k in ckpt.arrays if k.startswith("q1.w"))
    hidden = tuple(ckpt.arrays[f"q1.w{i}"].shape[0] for i in range(n_layers - 1))
    from .nn import mlp_init

    def restore(prefix: str) -> MlpParams:
        net = mlp_init((ckpt.obs_dim + ckpt.action_dim, *hidden, 1), "identity", 0)
        _mlp_restore(prefix, net, ckpt.arrays)
        return net

    critics = CriticEnsemble(
        q1=restore("q1"),
        q2=restore("q2"),
        q1_target=restore("q1_target"),
        q2_target=restore("q2_target"),
        adam1=_adam_from_arrays("adam.q1", ckpt.arrays),
        adam2=_adam_from_arrays("adam.q2", ckpt.arrays),
    )
    actor_adam = _adam_from_arrays("adam.actor", ckpt.arrays)
    return actor, critics, actor_adam
