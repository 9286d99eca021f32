"""Scripted scene generation and the counterfactual influence oracle."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from agentimp.errors import ConfigError, DataError
from agentimp.scenegen import sim
from agentimp.scenegen.scene import MAX_AGENTS, SCENARIO_KINDS, AgentTrack, Scene
from agentimp.scenegen.sim import CONSTANT, CRUISE, IDM, LANE_CHANGE, NO_BRAKE, SimConfig

log = logging.getLogger(__name__)

DEFAULT_MIX = {"lead_brake": 0.3, "cut_in": 0.2, "crossing": 0.15, "trailing": 0.1, "mixed": 0.25}
LANE = 3.5


@dataclass(frozen=True)
class GenConfig:
    num_scenes: int = 100
    seed: int = 0
    scenario_mix: dict = field(default_factory=lambda: dict(DEFAULT_MIX))
    history_len: int = 21
    future_len: int = 8
    future_dt: float = 1.0
    min_distractors: int = 2
    max_distractors: int = 6
    sim: SimConfig = SimConfig()

    @property
    def future_stride(self) -> int:
        return int(round(self.future_dt / self.sim.dt))

    @property
    def t_start(self) -> float:
        return -(self.history_len - 1) * self.sim.dt


def check_mix(mix: dict) -> dict:
    if not mix:
        raise ConfigError("scenario mix is empty")
    unknown = set(mix) - set(SCENARIO_KINDS)
    if unknown:
        raise ConfigError(f"unknown scenario kinds in mix: {sorted(unknown)}")
    weights = np.array([float(mix[k]) for k in mix])
    if not np.isfinite(weights).all() or (weights < 0).any() or weights.sum() <= 0:
        raise ConfigError(f"invalid scenario mix weights: {mix}")
    return {k: float(mix[k]) / float(weights.sum()) for k in SCENARIO_KINDS if k in mix}


def parse_mix(text: str) -> dict:
    """Parse ``"lead_brake=0.3,cut_in=0.2"`` into a weight map."""
    mix = {}
    for item in filter(None, (s.strip() for s in text.split(","))):
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"mix entry {item!r} is not key=weight")
        try:
            mix[key.strip()] = float(value)
        except ValueError as exc:
            raise ConfigError(f"mix weight {value!r} is not a number") from exc
    return check_mix(mix)


# --------------------------------------------------------------------------
# behaviour encoding
# --------------------------------------------------------------------------

def behavior_arrays(tracks) -> tuple[np.ndarray, np.ndarray]:
    codes = np.empty(len(tracks), dtype=np.int64)
    params = np.zeros((len(tracks), 3))
    for n, tr in enumerate(tracks):
        b = tr.behavior if isinstance(tr, AgentTrack) else tr
        kind = b.get("type")
        if kind == "idm":
            codes[n] = IDM
            params[n, 0] = b["v_des"]
        elif kind == "cruise":
            codes[n] = CRUISE
            t_brake = b.get("t_brake")
            params[n, 0] = NO_BRAKE if t_brake is None else t_brake
            params[n, 1] = b.get("decel", 0.0)
        elif kind == "lane_change":
            codes[n] = LANE_CHANGE
            params[n] = (b["t_start"], b["duration"], b["dy"])
        elif kind == "constant":
            codes[n] = CONSTANT
        else:
            raise DataError(f"unknown behavior {b!r}")
    return codes, params


def _lane_change_speed(t, b) -> float:
    return float(sim._lateral_speed_np(np.float64(t), b["t_start"], b["duration"], b["dy"]))


# --------------------------------------------------------------------------
# agent placement (positions at the first history sample; ego starts at x=0)
# --------------------------------------------------------------------------

def _lead(rng, ego_v, t0, brake, x=None):
    x = rng.uniform(15.0, 35.0) if x is None else x
    b = {"type": "cruise", "t_brake": None, "decel": 0.0}
    if brake:
        b = {"type": "cruise", "t_brake": round(float(rng.uniform(-1.8, -0.2)), 3), "decel": float(rng.uniform(2.0, 5.0))}
        v = ego_v * rng.uniform(0.85, 1.05)
    else:
        v = ego_v * rng.uniform(0.4, 0.85)
    return (x, 0.0, v, 0.0), b


def _cut_in(rng, ego_v, t0):
    side = rng.choice([-1.0, 1.0])
    b = {
        "type": "lane_change",
        "t_start": round(float(rng.uniform(-1.8, -0.3)), 3),
        "duration": float(rng.uniform(2.5, 3.5)),
        "dy": -side * LANE,
    }
    return (rng.uniform(5.0, 25.0), side * LANE, ego_v * rng.uniform(0.6, 0.95), _lane_change_speed(t0, b)), b


def _crossing(rng, ego_v, t0):
    side = rng.choice([-1.0, 1.0])
    return (rng.uniform(25.0, 60.0), side * rng.uniform(8.0, 20.0), 0.0, -side * rng.uniform(3.0, 7.0)), {"type": "constant"}


def _trailing(rng, ego_v, t0, ego_vdes):
    return (-rng.uniform(8.0, 30.0), 0.0, ego_v * rng.uniform(0.9, 1.1), 0.0), {
        "type": "idm",
        "v_des": float(ego_vdes * rng.uniform(1.0, 1.2)),
    }


def _cruiser(rng, ego_v, t0):
    side = rng.choice([-1.0, 1.0]) * rng.choice([1.0, 2.0])
    return (rng.uniform(-40.0, 60.0), side * LANE, rng.uniform(5.0, 20.0), 0.0), {"type": "constant"}


def _far_parked(rng, ego_v, t0):
    if rng.random() < 0.5:
        return (-rng.uniform(100.0, 150.0), rng.choice([-1.0, 0.0, 1.0]) * LANE, 0.0, 0.0), {"type": "constant"}
    return (rng.uniform(100.0, 160.0), rng.choice([-2.0, -1.0, 1.0, 2.0]) * LANE, 0.0, 0.0), {"type": "constant"}


def _scene_roles(rng, kind, ego_v, ego_vdes, t0, n_distract):
    roles = []
    distractor_pool = ("cruiser", "trailing", "far_parked", "cruiser")
    if kind == "lead_brake":
        roles.append(_lead(rng, ego_v, t0, brake=True))
    elif kind == "cut_in":
        roles.append(_cut_in(rng, ego_v, t0))
        if rng.random() < 0.5:
            roles.append(_lead(rng, ego_v, t0, brake=False, x=rng.uniform(30.0, 60.0)))
    elif kind == "crossing":
        roles.append(_crossing(rng, ego_v, t0))
        if rng.random() < 0.5:
            roles.append(_lead(rng, ego_v, t0, brake=False, x=rng.uniform(30.0, 60.0)))
    elif kind == "trailing":
        roles.append(_trailing(rng, ego_v, t0, ego_vdes))
        if rng.random() < 0.5:
            roles.append(_cruiser(rng, ego_v, t0))
    elif kind == "mixed":
        pool = ("lead", "lead_brake", "cut_in", "crossing", "trailing", "cruiser", "far_parked")
        lead_x = None
        for _ in range(rng.integers(2, 6)):
            role = pool[rng.integers(len(pool))]
            if role in ("lead", "lead_brake"):
                x = None if lead_x is None else lead_x + rng.uniform(15.0, 30.0)
                roles.append(_lead(rng, ego_v, t0, brake=role == "lead_brake", x=x))
                lead_x = roles[-1][0][0]
            elif role == "trailing":
                roles.append(_trailing(rng, ego_v, t0, ego_vdes))
            else:
                roles.append({"cut_in": _cut_in, "crossing": _crossing, "cruiser": _cruiser, "far_parked": _far_parked}[role](rng, ego_v, t0))
        n_distract = max(0, n_distract - 1)
    for _ in range(n_distract):
        role = distractor_pool[rng.integers(len(distractor_pool))]
        if role == "trailing":
            roles.append(_trailing(rng, ego_v, t0, ego_vdes))
        else:
            roles.append({"cruiser": _cruiser, "far_parked": _far_parked}[role](rng, ego_v, t0))
    return roles[:MAX_AGENTS]


def _scene_id(seed: int, index: int) -> str:
    return f"s{seed}_{index:06d}"


def make_scene(config: GenConfig, index: int, kind: str | None = None) -> Scene:
    """Build scene ``index`` of the set defined by ``config``.

    The RNG is seeded by (seed, index) so any scene can be produced in
    isolation.
    """
    rng = np.random.default_rng([config.seed, index])
    mix = check_mix(config.scenario_mix)
    kinds = list(mix)
    chosen = kinds[int(rng.choice(len(kinds), p=[mix[k] for k in kinds]))]
    kind = kind or chosen
    t0 = config.t_start
    ego_vdes = float(rng.uniform(10.0, 16.0))
    ego_v = ego_vdes * rng.uniform(0.85, 1.0)
    n_distract = int(rng.integers(config.min_distractors, config.max_distractors + 1))
    roles = _scene_roles(rng, kind, ego_v, ego_vdes, t0, n_distract)
    order = rng.permutation(len(roles))
    roles = [roles[n] for n in order]

    states = [(0.0, 0.0, ego_v, 0.0)] + [r[0] for r in roles]
    behaviors = [{"type": "idm", "v_des": ego_vdes}] + [r[1] for r in roles]
    codes, params = behavior_arrays(behaviors)
    n_hist = config.history_len
    n_steps = n_hist - 1 + config.future_len * config.future_stride
    traj = sim.simulate(np.array(states, dtype=np.float64), codes, params, t0, n_steps, config.sim)
    fut_idx = n_hist - 1 + config.future_stride * np.arange(1, config.future_len + 1)

    tracks = []
    for n, b in enumerate(behaviors):
        tracks.append(
            AgentTrack(
                id=n,
                kind="ego" if n == 0 else "vehicle",
                history=traj[:n_hist, n, :],
                future=traj[fut_idx, n, :2],
                behavior=b,
            )
        )
    return Scene(_scene_id(config.seed, index), tracks[0], tuple(tracks[1:]), kind, config.sim.dt, config.future_dt)


def generate(config: GenConfig) -> list[Scene]:
    if config.num_scenes < 1:
        raise ConfigError("num_scenes must be >= 1")
    check_mix(config.scenario_mix)
    return [make_scene(config, n) for n in range(config.num_scenes)]


# --------------------------------------------------------------------------
# counterfactual oracle
# --------------------------------------------------------------------------

def rollout_ego(scene: Scene, exclude=(), sim_config: SimConfig = SimConfig(), use_numba=None) -> np.ndarray:
    """Re-simulate the scene from the current timestep; return ego future waypoints (T, 2)."""
    tracks = [scene.ego] + [a for a in scene.agents if a.id not in exclude]
    state0 = np.array([tr.history[-1] for tr in tracks])
    codes, params = behavior_arrays(tracks)
    stride = int(round(scene.future_dt / sim_config.dt))
    horizon = scene.ego.future.shape[0]
    traj = sim.simulate(state0, codes, params, 0.0, horizon * stride, sim_config, use_numba=use_numba)
    return traj[stride::stride, 0, :2]


def causal_influence(scene: Scene, agent_id: int, sim_config: SimConfig = SimConfig(), use_numba=None) -> float:
    """Mean pointwise L2 gap (m) between ego rollouts with and without ``agent_id``."""
    if agent_id == scene.ego.id:
        raise KeyError("the ego cannot be removed")
    scene.agent(agent_id)
    base = rollout_ego(scene, (), sim_config, use_numba)
    cf = rollout_ego(scene, (agent_id,), sim_config, use_numba)
    return float(np.mean(np.sqrt(((base - cf) ** 2).sum(axis=1))))


def causal_influences(scene: Scene, sim_config: SimConfig = SimConfig()) -> dict[int, float]:
    return {a.id: causal_influence(scene, a.id, sim_config) for a in scene.agents}
