"""Scene data types and the JSON-lines scene file format (schema 1)."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

import numpy as np

from agentimp.errors import DataError

SCHEMA_VERSION = 1
SCENARIO_KINDS = ("lead_brake", "cut_in", "crossing", "trailing", "mixed")
AGENT_KINDS = ("ego", "vehicle")
MAX_AGENTS = 12


def _frozen(a, shape_tail: int) -> np.ndarray:
    arr = np.array(a, dtype=np.float64).reshape(-1, shape_tail)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class AgentTrack:
    """One agent: history rows (x, y, vx, vy) at ``dt``; future rows (x, y) at ``future_dt``.

    ``behavior`` is the scripted controller that produced the track; the
    counterfactual oracle replays it.
    """

    id: int
    kind: str
    history: np.ndarray
    future: np.ndarray
    behavior: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "history", _frozen(self.history, 4))
        object.__setattr__(self, "future", _frozen(self.future, 2))
        if self.kind not in AGENT_KINDS:
            raise DataError(f"agent {self.id}: unknown kind {self.kind!r}")
        if not (np.isfinite(self.history).all() and np.isfinite(self.future).all()):
            raise DataError(f"agent {self.id}: non-finite track")

    @property
    def position(self) -> np.ndarray:
        return self.history[-1, :2]

    @property
    def velocity(self) -> np.ndarray:
        return self.history[-1, 2:]

    def to_dict(self) -> dict:
        return {
            "id": int(self.id),
            "kind": self.kind,
            "history": self.history.tolist(),
            "future": self.future.tolist(),
            "behavior": dict(self.behavior),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "AgentTrack":
        try:
            return cls(int(d["id"]), d["kind"], d["history"], d["future"], dict(d.get("behavior", {})))
        except (KeyError, TypeError, ValueError) as exc:
            raise DataError(f"bad agent record: {exc}") from exc

    def __eq__(self, other):
        if not isinstance(other, AgentTrack):
            return NotImplemented
        return self.to_dict() == other.to_dict()

    __hash__ = None


@dataclass(frozen=True, eq=False)
class Scene:
    scene_id: str
    ego: AgentTrack
    agents: tuple
    scenario_kind: str = "mixed"
    dt: float = 0.1
    future_dt: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "agents", tuple(self.agents))
        if self.ego.kind != "ego":
            raise DataError(f"scene {self.scene_id}: ego track has kind {self.ego.kind!r}")
        if len(self.agents) > MAX_AGENTS:
            raise DataError(f"scene {self.scene_id}: {len(self.agents)} agents exceeds {MAX_AGENTS}")
        if self.scenario_kind not in SCENARIO_KINDS:
            raise DataError(f"scene {self.scene_id}: unknown scenario kind {self.scenario_kind!r}")
        ids = [self.ego.id] + [a.id for a in self.agents]
        if len(set(ids)) != len(ids):
            raise DataError(f"scene {self.scene_id}: duplicate agent ids")
        for a in self.agents:
            if a.kind != "vehicle":
                raise DataError(f"scene {self.scene_id}: more than one ego")
            if a.history.shape != self.ego.history.shape or a.future.shape != self.ego.future.shape:
                raise DataError(f"scene {self.scene_id}: agent {a.id} track length differs from ego")

    @property
    def tracks(self) -> tuple:
        return (self.ego,) + self.agents

    @property
    def agent_ids(self) -> list[int]:
        return [a.id for a in self.agents]

    def agent(self, agent_id: int) -> AgentTrack:
        for a in self.agents:
            if a.id == agent_id:
                return a
        raise KeyError(f"scene {self.scene_id}: no agent with id {agent_id}")

    def replace_agents(self, agents) -> "Scene":
        return Scene(self.scene_id, self.ego, tuple(agents), self.scenario_kind, self.dt, self.future_dt)

    def to_dict(self) -> dict:
        return {
            "schema": SCHEMA_VERSION,
            "scene_id": self.scene_id,
            "scenario_kind": self.scenario_kind,
            "dt": self.dt,
            "future_dt": self.future_dt,
            "ego": self.ego.to_dict(),
            "agents": [a.to_dict() for a in self.agents],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Scene":
        if not isinstance(d, dict):
            raise DataError("scene record must be a JSON object")
        if d.get("schema") != SCHEMA_VERSION:
            raise DataError(f"unsupported scene schema {d.get('schema')!r} (expected {SCHEMA_VERSION})")
        try:
            return cls(
                str(d["scene_id"]),
                AgentTrack.from_dict(d["ego"]),
                tuple(AgentTrack.from_dict(a) for a in d["agents"]),
                d.get("scenario_kind", "mixed"),
                float(d.get("dt", 0.1)),
                float(d.get("future_dt", 1.0)),
            )
        except KeyError as exc:
            raise DataError(f"scene record missing field {exc}") from exc

    def __eq__(self, other):
        if not isinstance(other, Scene):
            return NotImplemented
        return self.to_dict() == other.to_dict()

    __hash__ = None


def dumps_scene(scene: Scene) -> str:
    return json.dumps(scene.to_dict(), separators=(",", ":"), allow_nan=False)


def write_scenes(path, scenes: Iterable[Scene]) -> int:
    n = 0
    with open(path, "w", encoding="utf-8") as fh:
        for scene in scenes:
            fh.write(dumps_scene(scene))
            fh.write("\n")
            n += 1
    return n


def read_scenes(path) -> list[Scene]:
    path = Path(path)
    scenes = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"{path}:{lineno}: invalid JSON ({exc.msg})") from exc
            try:
                scenes.append(Scene.from_dict(record))
            except DataError as exc:
                raise DataError(f"{path}:{lineno}: {exc}") from exc
    return scenes
