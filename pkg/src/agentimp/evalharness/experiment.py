"""Agent-removal experiments, quantile table and the spatial attention heatmap."""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from agentimp import importance as imp
from agentimp.errors import DataError, NumericError
from agentimp.evalharness.stats import QUANTILES, UndefinedStatistic, pearson, quantiles, r_squared, spearman
from agentimp.model.features import EgoFrame
from agentimp.model.net import forward
from agentimp.model.params import ModelParams
from agentimp.scenegen.generate import causal_influences
from agentimp.scenegen.scene import Scene

log = logging.getLogger(__name__)

ALL = "all"
ANGLE_EPS = 1e-6


def remove_agent(scene: Scene, agent_id: int) -> Scene:
    """Copy of ``scene`` without ``agent_id``; the input is left untouched."""
    if agent_id == scene.ego.id:
        raise ValueError("cannot remove the ego")
    if agent_id not in scene.agent_ids:
        raise KeyError(f"scene {scene.scene_id}: no agent with id {agent_id}")
    return scene.replace_agents(a for a in scene.agents if a.id != agent_id)


def remove_agents(scene: Scene, agent_ids) -> Scene:
    drop = set(agent_ids)
    return scene.replace_agents(a for a in scene.agents if a.id not in drop)


def traj_delta(pre, post) -> float:
    """Mean pointwise L2 distance (m) between two (T, 2) trajectories."""
    pre = np.asarray(pre, dtype=np.float64)
    post = np.asarray(post, dtype=np.float64)
    if pre.shape != post.shape:
        raise ValueError(f"trajectory shapes differ: {pre.shape} vs {post.shape}")
    d = pre - post
    return float(np.mean(np.hypot(d[..., 0], d[..., 1])))


def angular_delta(pre, post, ego_position) -> float | None:
    """Angle (rad, in [0, pi]) between ego->last-waypoint vectors, or None if degenerate."""
    o = np.asarray(ego_position, dtype=np.float64)
    a = np.asarray(pre, dtype=np.float64)[-1] - o
    b = np.asarray(post, dtype=np.float64)[-1] - o
    na, nb = math.hypot(*a), math.hypot(*b)
    if na <= ANGLE_EPS or nb <= ANGLE_EPS:
        return None
    a, b = a / na, b / nb
    cross = a[0] * b[1] - a[1] * b[0]
    dot = a[0] * b[0] + a[1] * b[1]
    return abs(math.atan2(cross, dot))


@dataclass
class RemovalRecord:
    scene_id: str
    k: object
    agent_ids: tuple
    removed_attention: float
    traj_delta: float
    error_delta: float
    angular_delta: float | None

    def row(self) -> dict:
        d = asdict(self)
        d["agent_ids"] = " ".join(str(a) for a in self.agent_ids)
        return d


@dataclass
class CorrelationRow:
    label: object
    n: int
    traj_pearson: float | None
    traj_r2: float | None
    err_pearson: float | None
    err_r2: float | None


def _safe(fn, xs, ys):
    try:
        return fn(xs, ys)
    except UndefinedStatistic:
        return None


def correlation_row(label, records) -> CorrelationRow:
    att = [r.removed_attention for r in records]
    td = [r.traj_delta for r in records]
    ed = [r.error_delta for r in records]
    return CorrelationRow(
        label, len(records), _safe(pearson, att, td), _safe(r_squared, att, td), _safe(pearson, att, ed), _safe(r_squared, att, ed)
    )


def _ego_error(pred, truth) -> float:
    return traj_delta(pred, truth)


def _check(result, scene_id):
    if not np.isfinite(result.trajectories).all():
        raise NumericError(f"scene {scene_id}: model produced non-finite trajectories")
    return result


@dataclass
class SceneEval:
    """Baseline forward pass and importance scores of one scene."""

    scene: Scene
    pred: np.ndarray
    scores: imp.ImportanceScores


def evaluate_scene(params: ModelParams, scene: Scene) -> SceneEval:
    res = _check(forward(params, scene, trace=True), scene.scene_id)
    return SceneEval(scene, res.ego, imp.score_trace(scene.scene_id, res.trace))


@dataclass
class RemovalResult:
    records: list
    rows: list
    excluded: list = field(default_factory=list)
    warnings: list = field(default_factory=list)

    def row(self, label) -> CorrelationRow:
        for r in self.rows:
            if r.label == label:
                return r
        raise KeyError(label)


def _parse_k(k):
    if isinstance(k, str):
        if k.lower() == ALL:
            return ALL
        k = int(k)
    if k < 1:
        raise ValueError(f"k must be >= 1 or 'all', got {k}")
    return int(k)


def run_removal_experiment(params: ModelParams, scenes, ks=(1, 2, 3, ALL), agg_mode: str = "last", evals=None) -> RemovalResult:
    """Remove the k-th ranked agent of each scene and record the ego's response.

    Scenes without a k-th agent are skipped for that k. Scenes whose agents
    all receive zero attention are excluded with a warning. The ``all`` row
    removes every agent and uses the summed raw (unnormalized) score as its
    attention value, since the normalized scores always sum to one.
    """
    ks = [_parse_k(k) for k in ks]
    evals = evals if evals is not None else [evaluate_scene(params, s) for s in scenes]
    records = {k: [] for k in ks}
    excluded, warnings = [], []
    for ev in sorted(evals, key=lambda e: e.scene.scene_id):
        scene = ev.scene
        if not scene.agents:
            continue
        if ev.scores.degenerate():
            excluded.append(scene.scene_id)
            continue
        agg = ev.scores.aggregated[agg_mode] if agg_mode in ev.scores.aggregated else imp.aggregate(ev.scores.normalized, agg_mode)
        order = imp.rank(agg)
        ego_now = scene.ego.position
        truth = scene.ego.future
        base_err = _ego_error(ev.pred, truth)
        for k in ks:
            if k == ALL:
                removed = list(order)
                raw_agg = imp.aggregate(ev.scores.raw, agg_mode, renormalize=False)
                att = math.fsum(raw_agg.values())
            else:
                if k > len(order):
                    continue
                removed = [order[k - 1]]
                att = agg[removed[0]]
            post_scene = remove_agents(scene, removed)
            post = _check(forward(params, post_scene), scene.scene_id).ego
            with np.errstate(over="ignore", invalid="ignore"):
                rec = RemovalRecord(
                    scene.scene_id, k, tuple(removed), float(att), traj_delta(ev.pred, post),
                    _ego_error(post, truth) - base_err, angular_delta(ev.pred, post, ego_now),
                )
            if not all(math.isfinite(v) for v in (rec.removed_attention, rec.traj_delta, rec.error_delta)):
                raise NumericError(f"scene {scene.scene_id}: non-finite removal statistics for k={k}")
            records[k].append(rec)
    if excluded:
        msg = f"{len(excluded)} scene(s) excluded: no agent received attention"
        log.warning(msg)
        warnings.append(msg)
    rows = [correlation_row(k, records[k]) for k in ks]
    flat = [r for k in ks for r in records[k]]
    return RemovalResult(flat, rows, excluded, warnings)


# --------------------------------------------------------------------------
# agreement with the counterfactual oracle
# --------------------------------------------------------------------------

@dataclass
class OracleAgreement:
    mean_spearman: float | None
    per_scene: dict
    skipped: list


def oracle_agreement(evals, agg_mode: str = "last") -> OracleAgreement:
    """Per-scene Spearman between importance scores and the rollout oracle.

    Scenes with fewer than two agents, or where every agent has the same
    oracle influence, carry no ranking signal and are skipped. A scene where
    the model gives every agent the same score counts as 0.
    """
    per_scene, skipped = {}, []
    for ev in sorted(evals, key=lambda e: e.scene.scene_id):
        scene = ev.scene
        ids = scene.agent_ids
        if len(ids) < 2:
            skipped.append(scene.scene_id)
            continue
        infl = causal_influences(scene)
        oracle = [infl[a] for a in ids]
        if len(set(oracle)) == 1:
            skipped.append(scene.scene_id)
            continue
        agg = ev.scores.aggregated[agg_mode]
        try:
            per_scene[scene.scene_id] = spearman([agg[a] for a in ids], oracle)
        except UndefinedStatistic:
            per_scene[scene.scene_id] = 0.0
    mean = math.fsum(per_scene.values()) / len(per_scene) if per_scene else None
    return OracleAgreement(mean, per_scene, skipped)


# --------------------------------------------------------------------------
# quantile table
# --------------------------------------------------------------------------

QUANTITIES = ("highest_attention", "relevant_agents", "max_attention_shift", "angular_delta_top1")


def quantile_table(records, evals, agg_mode: str = "last", threshold: float = 0.1) -> dict:
    """Nearest-rank quantiles of the four per-scene quantities.

    Rows with no data (e.g. a single-layer model has no attention shift) are
    reported as None.
    """
    if not evals:
        raise ValueError("quantile_table needs at least one evaluated scene")
    highest, relevant, shift = [], [], []
    for ev in evals:
        if not ev.scene.agents or ev.scores.degenerate():
            continue
        agg = ev.scores.aggregated[agg_mode]
        highest.append(max(agg.values()))
        relevant.append(sum(1 for v in agg.values() if v >= threshold))
        layers = ev.scores.normalized
        if len(layers) >= 2:
            first, last = layers[0], layers[-1]
            shift.append(max(abs(last[a] - first[a]) for a in first))
    angles = [r.angular_delta for r in records if r.k == 1 and r.angular_delta is not None]
    table = {}
    for name, vals in zip(QUANTITIES, (highest, relevant, shift, angles)):
        table[name] = {"n": len(vals), "quantiles": quantiles(vals) if vals else None}
    return table


# --------------------------------------------------------------------------
# spatial heatmap
# --------------------------------------------------------------------------

@dataclass
class Heatmap:
    x_edges: np.ndarray
    y_edges: np.ndarray
    mass: np.ndarray
    counts: np.ndarray
    num_scenes: int
    overflow_mass: float
    overflow_count: int
    overflow_front_mass: float = 0.0

    @property
    def total_mass(self) -> float:
        return float(self.mass.sum()) + self.overflow_mass

    @property
    def mean_per_cell(self) -> np.ndarray:
        """Average score of the agents that landed in each cell (0 where empty)."""
        return np.divide(self.mass, self.counts, out=np.zeros_like(self.mass), where=self.counts > 0)

    def front_fraction(self) -> float:
        """Share of all mass in the half-plane ahead of the ego (y >= 0), overflow included."""
        total = self.total_mass
        if total == 0.0:
            return 0.0
        ahead = self.y_edges[:-1] >= 0.0
        return (float(self.mass[ahead].sum()) + self.overflow_front_mass) / total


def attention_heatmap(params: ModelParams | None, scenes, cell: float = 4.0, extent: float = 60.0, agg_mode: str = "last", evals=None) -> Heatmap:
    """Deposit each agent's normalized score into the ego-frame cell it occupies.

    Cells are lower-inclusive/upper-exclusive; agents at or beyond ``+extent``
    or below ``-extent`` go to the overflow bucket. ``mass[iy, ix]`` indexes
    y (forward) then x (right).
    """
    if cell <= 0 or extent <= 0:
        raise ValueError("cell and extent must be positive")
    evals = evals if evals is not None else [evaluate_scene(params, s) for s in scenes]
    if not evals:
        raise ValueError("heatmap needs at least one scene")
    n = int(math.ceil(2.0 * extent / cell - 1e-9))
    edges = -extent + cell * np.arange(n + 1)
    mass = np.zeros((n, n))
    counts = np.zeros((n, n), dtype=np.int64)
    over_mass, over_front, over_count = 0.0, 0.0, 0
    for ev in sorted(evals, key=lambda e: e.scene.scene_id):
        scene = ev.scene
        agg = ev.scores.aggregated[agg_mode]
        frame = EgoFrame.from_track(scene.ego)
        for a in scene.agents:
            x, y = frame.to_frame(a.position)
            ix = math.floor((x + extent) / cell)
            iy = math.floor((y + extent) / cell)
            if 0 <= ix < n and 0 <= iy < n and x < edges[-1] and y < edges[-1]:
                mass[iy, ix] += agg[a.id]
                counts[iy, ix] += 1
            else:
                over_mass += agg[a.id]
                over_count += 1
                if y >= 0.0:
                    over_front += agg[a.id]
    return Heatmap(edges.copy(), edges.copy(), mass, counts, len(evals), over_mass, over_count, over_front)
