"""Agent importance scores from attention traces.

The raw score of agent a is the L2 norm of its contribution to the ego's
interaction output, ``||g(x_ego, x_a)|| / normalizer_ego``. Scores are then
rescaled per scene to sum to one over the non-ego agents and optionally
combined across layers.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from agentimp.errors import DataError
from agentimp.model.layers import AttentionTrace

log = logging.getLogger(__name__)

AGG_MODES = ("max", "mean", "last")


def raw_score(trace: AttentionTrace, layer: int, agent_id: int) -> float:
    ego = 0
    a = trace.index_of(agent_id)
    if a == ego:
        raise KeyError("the ego has no importance w.r.t. itself")
    if not 0 <= layer < trace.num_layers:
        raise KeyError(f"layer {layer} not in trace ({trace.num_layers} layers)")
    lt = trace.layers[layer]
    return float(np.linalg.norm(lt.g[ego, a] / lt.normalizer[ego]))


def raw_scores(trace: AttentionTrace, layer: int) -> dict[int, float]:
    return {aid: raw_score(trace, layer, aid) for aid in trace.agent_ids[1:]}


def normalize(raw: dict) -> dict:
    """Divide by the total; an all-zero map stays all zero."""
    for k, v in raw.items():
        if not v >= 0.0 or not math.isfinite(v):
            raise ValueError(f"importance of agent {k} must be finite and >= 0, got {v}")
    total = math.fsum(raw.values())
    if total == 0.0:
        return {k: 0.0 for k in raw}
    return {k: v / total for k, v in raw.items()}


def aggregate(per_layer: list, mode: str = "last", renormalize: bool = True) -> dict:
    """Combine per-layer score maps by elementwise max, mean, or the last layer."""
    if mode not in AGG_MODES:
        raise ValueError(f"unknown aggregation mode {mode!r}")
    if not per_layer:
        raise ValueError("aggregate needs at least one layer")
    keys = set(per_layer[0])
    for n, m in enumerate(per_layer[1:], 1):
        if set(m) != keys:
            raise DataError(f"layer {n} covers different agents than layer 0")
    if mode == "last":
        return dict(per_layer[-1])
    order = list(per_layer[0])
    if mode == "max":
        out = {k: max(m[k] for m in per_layer) for k in order}
    else:
        out = {k: math.fsum(m[k] for m in per_layer) / len(per_layer) for k in order}
    return normalize(out) if renormalize else out


def rank(scores: dict) -> list:
    """Agent ids by descending score, ties by ascending id."""
    return sorted(scores, key=lambda k: (-scores[k], k))


@dataclass
class ImportanceScores:
    scene_id: str
    raw: list
    normalized: list
    aggregated: dict = field(default_factory=dict)

    @property
    def agent_ids(self) -> list:
        return list(self.raw[0]) if self.raw else []

    def scores(self, mode: str = "last") -> dict:
        return self.aggregated[mode]

    def degenerate(self) -> bool:
        """True when no non-ego agent receives any attention."""
        return all(v == 0.0 for layer in self.raw for v in layer.values())


def score_trace(scene_id: str, trace: AttentionTrace, modes=AGG_MODES) -> ImportanceScores:
    raw = [raw_scores(trace, layer) for layer in range(trace.num_layers)]
    norm = [normalize(r) for r in raw]
    agg = {mode: aggregate(norm, mode) for mode in modes}
    return ImportanceScores(scene_id, raw, norm, agg)


CSV_COLUMNS = ("scene_id", "agent_id", "layer", "raw", "normalized", "aggregated_mode", "aggregated_value", "rank")


def write_importance_csv(path, results, modes=AGG_MODES) -> None:
    """One row per (scene, agent, layer, aggregation mode)."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_COLUMNS)
        for res in results:
            for mode in modes:
                agg = res.aggregated[mode]
                ranks = {aid: n + 1 for n, aid in enumerate(rank(agg))}
                for layer, (raw, norm) in enumerate(zip(res.raw, res.normalized)):
                    for aid in res.agent_ids:
                        w.writerow((res.scene_id, aid, layer, repr(raw[aid]), repr(norm[aid]), mode, repr(agg[aid]), ranks[aid]))
