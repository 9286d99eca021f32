"""Ego-centric feature construction and batch assembly."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from agentimp.errors import ShapeError
from agentimp.model.params import ModelConfig
from agentimp.scenegen.scene import AgentTrack, Scene


@dataclass(frozen=True)
class EgoFrame:
    """Ego-centric frame at the current timestep: +y forward, +x to the right."""

    origin: np.ndarray
    heading: float

    @classmethod
    def from_track(cls, ego: AgentTrack) -> "EgoFrame":
        vx, vy = ego.history[-1, 2:]
        if math.hypot(vx, vy) > 0.5:
            heading = math.atan2(vy, vx)
        else:
            d = ego.history[-1, :2] - ego.history[0, :2]
            heading = math.atan2(d[1], d[0]) if math.hypot(d[0], d[1]) > 0.5 else 0.0
        return cls(np.array(ego.history[-1, :2], dtype=np.float64), heading)

    @property
    def rotation(self) -> np.ndarray:
        """Rows map world vectors to (right, forward)."""
        c, s = math.cos(self.heading), math.sin(self.heading)
        return np.array([[s, -c], [c, s]])

    def to_frame(self, points: np.ndarray) -> np.ndarray:
        return (np.asarray(points) - self.origin) @ self.rotation.T

    def vec_to_frame(self, vecs: np.ndarray) -> np.ndarray:
        return np.asarray(vecs) @ self.rotation.T

    def vec_to_world(self, vecs: np.ndarray) -> np.ndarray:
        return np.asarray(vecs) @ self.rotation

    def to_world(self, points: np.ndarray) -> np.ndarray:
        return self.vec_to_world(points) + self.origin


def agent_input(track: AgentTrack, frame: EgoFrame, config: ModelConfig) -> np.ndarray:
    """Flattened, scaled history in the ego frame: (x, y, vx, vy) per step."""
    if track.history.shape[0] != config.history_len:
        raise ShapeError(f"agent {track.id}: history length {track.history.shape[0]} != {config.history_len}")
    pos = frame.to_frame(track.history[:, :2]) / config.pos_scale
    vel = frame.vec_to_frame(track.history[:, 2:]) / config.vel_scale
    return np.concatenate([pos, vel], axis=1).ravel()


@dataclass
class SceneTensors:
    """Per-scene arrays for the network; row 0 is the ego."""

    agent_ids: list
    frame: EgoFrame
    inputs: np.ndarray
    positions: np.ndarray
    world_now: np.ndarray
    anchor: np.ndarray
    target: np.ndarray

    @property
    def n(self) -> int:
        return len(self.agent_ids)


def scene_tensors(scene: Scene, config: ModelConfig) -> SceneTensors:
    if scene.ego.future.shape[0] != config.future_len:
        raise ShapeError(f"scene {scene.scene_id}: horizon {scene.ego.future.shape[0]} != {config.future_len}")
    frame = EgoFrame.from_track(scene.ego)
    tracks = scene.tracks
    inputs = np.stack([agent_input(t, frame, config) for t in tracks])
    now = np.stack([t.history[-1, :2] for t in tracks])
    positions = frame.to_frame(now)
    vel = frame.vec_to_frame(np.stack([t.history[-1, 2:] for t in tracks]))
    times = config.future_dt * np.arange(1, config.future_len + 1)
    anchor = (vel[:, None, :] * times[None, :, None]).reshape(len(tracks), -1)
    fut = np.stack([frame.vec_to_frame(t.future - t.history[-1, :2]) for t in tracks])
    target = fut.reshape(len(tracks), -1)
    return SceneTensors([t.id for t in tracks], frame, inputs, positions, now, anchor, target)


def pair_index(n: int) -> tuple[np.ndarray, np.ndarray]:
    """All ordered (target, source) pairs with target != source, target-major."""
    tgt, src = np.nonzero(~np.eye(n, dtype=bool))
    return tgt.astype(np.int64), src.astype(np.int64)


@dataclass
class Batch:
    inputs: np.ndarray
    anchor: np.ndarray
    target: np.ndarray
    seg: np.ndarray
    tgt: np.ndarray
    src: np.ndarray
    deltas: np.ndarray


def make_batch(items: list[SceneTensors], config: ModelConfig) -> Batch:
    seg = np.concatenate([[0], np.cumsum([it.n for it in items])]).astype(np.int64)
    tgts, srcs, deltas = [], [], []
    for it, off in zip(items, seg[:-1]):
        t, s = pair_index(it.n)
        tgts.append(t + off)
        srcs.append(s + off)
        deltas.append((it.positions[s] - it.positions[t]) / config.delta_scale)
    return Batch(
        inputs=np.concatenate([it.inputs for it in items]),
        anchor=np.concatenate([it.anchor for it in items]),
        target=np.concatenate([it.target for it in items]),
        seg=seg,
        tgt=np.concatenate(tgts),
        src=np.concatenate(srcs),
        deltas=np.concatenate(deltas).reshape(-1, 2),
    )
