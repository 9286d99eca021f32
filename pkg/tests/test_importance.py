import csv
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from agentimp.errors import DataError
from agentimp.importance import CSV_COLUMNS, aggregate, normalize, rank, raw_score, raw_scores, score_trace, write_importance_csv
from agentimp.model import AttentionTrace, LayerTrace, ModelConfig, forward, init_params, transformer_trace
from agentimp.scenegen import GenConfig, Scene, make_scene


def _trace(g_rows, normalizer=1.0, ids=(0, 1, 2)):
    """Single-layer trace whose ego row holds the given vectors."""
    n, f = len(ids), len(g_rows[0])
    g = np.zeros((n, n, f))
    for j, row in enumerate(g_rows):
        g[0, j] = row
    layer = LayerTrace("lanegcn", g, np.full(n, normalizer), np.zeros((n, f)))
    return AttentionTrace(list(ids), [layer])


def test_raw_score_zero_vector():
    assert raw_score(_trace([[0, 0], [0, 0], [1, 1]]), 0, 1) == 0.0


def test_raw_score_pythagorean():
    tr = _trace([[0, 0, 0, 0], [3, 4, 0, 0], [0, 0, 0, 0]])
    assert raw_score(tr, 0, 1) == 5.0


def test_raw_score_missing_pair():
    tr = _trace([[0, 0], [1, 0], [0, 1]])
    with pytest.raises(KeyError):
        raw_score(tr, 0, 7)
    with pytest.raises(KeyError):
        raw_score(tr, 1, 1)
    with pytest.raises(KeyError):
        raw_score(tr, 0, 0)


@pytest.mark.parametrize("seed", range(10))
def test_raw_score_transformer_oracle(seed):
    rng = np.random.default_rng(seed)
    x, q, k, v = rng.normal(size=(3, 6)), rng.normal(size=(6, 3)), rng.normal(size=(6, 3)), rng.normal(size=(6, 6))
    tr = AttentionTrace([0, 4, 9], [transformer_trace(x, q, k, v)])
    logits = np.array([(x[0] @ q) @ (x[j] @ k) / math.sqrt(3) for j in range(3)])
    w = np.exp(logits) / np.exp(logits).sum()
    for j, aid in ((1, 4), (2, 9)):
        assert raw_score(tr, 0, aid) == pytest.approx(w[j] * np.linalg.norm(x[j] @ v), rel=1e-12)


@pytest.mark.parametrize("seed", range(20))
def test_transformer_ranking_invariant_to_normalizer(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 9))
    x, q, k, v = rng.normal(size=(n, 5)), rng.normal(size=(5, 3)), rng.normal(size=(5, 3)), rng.normal(size=(5, 5))
    lt = transformer_trace(x, q, k, v)
    tr = AttentionTrace(list(range(n)), [lt])
    unnormalized = {j: float(np.linalg.norm(lt.g[0, j])) for j in range(1, n)}
    assert rank(unnormalized) == rank(raw_scores(tr, 0))


def test_normalize_examples():
    assert normalize({1: 2.0, 2: 2.0}) == {1: 0.5, 2: 0.5}
    assert normalize({1: 0.0, 2: 0.0}) == {1: 0.0, 2: 0.0}
    assert normalize({1: 1.0, 2: 3.0}) == {1: 0.25, 2: 0.75}


@pytest.mark.parametrize("bad", [-1.0, float("nan"), float("inf")])
def test_normalize_rejects_bad_input(bad):
    with pytest.raises(ValueError):
        normalize({1: 1.0, 2: bad})


@settings(max_examples=200, deadline=None)
@given(st.dictionaries(st.integers(1, 50), st.floats(0, 1e6), min_size=1, max_size=12))
def test_normalize_sums_to_one(raw):
    out = normalize(raw)
    if any(v > 0 for v in raw.values()):
        assert abs(sum(out.values()) - 1.0) < 1e-9
        assert all(0.0 <= v <= 1.0 for v in out.values())
    else:
        assert all(v == 0.0 for v in out.values())


def test_aggregate_single_layer_identity():
    m = {1: 0.3, 2: 0.7}
    for mode in ("max", "mean", "last"):
        assert aggregate([m], mode) == pytest.approx(m, abs=1e-15)


def test_aggregate_mean_example():
    assert aggregate([{1: 1.0, 2: 0.0}, {1: 0.0, 2: 1.0}], "mean") == {1: 0.5, 2: 0.5}


@pytest.mark.parametrize("seed", range(10))
def test_aggregate_max_oracle(seed):
    rng = np.random.default_rng(seed)
    ids = list(range(1, 8))
    layers = [normalize(dict(zip(ids, rng.random(7)))) for _ in range(2)]
    m = [max(a, b) for a, b in zip(layers[0].values(), layers[1].values())]
    ref = dict(zip(ids, np.array(m) / sum(m)))
    got = aggregate(layers, "max")
    assert all(abs(got[k] - ref[k]) < 1e-12 for k in ids)


def test_aggregate_last_exact():
    layers = [{1: 0.2, 2: 0.8}, {1: 0.6, 2: 0.4}]
    assert aggregate(layers, "last") == layers[-1]


def test_aggregate_agent_set_mismatch():
    with pytest.raises(DataError):
        aggregate([{1: 1.0}, {2: 1.0}], "mean")
    with pytest.raises(ValueError):
        aggregate([], "mean")
    with pytest.raises(ValueError):
        aggregate([{1: 1.0}], "median")


def test_rank_examples():
    assert rank({1: 0.7, 2: 0.3}) == [1, 2]
    assert rank({2: 0.5, 1: 0.5}) == [1, 2]


@settings(max_examples=100, deadline=None)
@given(st.dictionaries(st.integers(0, 1000), st.sampled_from([0.0, 0.1, 0.25, 0.5, 0.9]), min_size=10, max_size=10))
def test_rank_matches_sort_oracle(scores):
    ref = [k for _, k in sorted((-v, k) for k, v in scores.items())]
    assert rank(scores) == ref


def test_scores_invariant_under_agent_reordering():
    params = init_params(ModelConfig(), 4)
    s = make_scene(GenConfig(seed=6), 3)
    rev = Scene(s.scene_id, s.ego, tuple(reversed(s.agents)), s.scenario_kind)
    a = score_trace(s.scene_id, forward(params, s, trace=True).trace)
    b = score_trace(s.scene_id, forward(params, rev, trace=True).trace)
    for mode in ("max", "mean", "last"):
        for k in s.agent_ids:
            assert abs(a.aggregated[mode][k] - b.aggregated[mode][k]) < 1e-10


def test_all_zero_attention_is_degenerate():
    tr = _trace([[0, 0], [0, 0], [0, 0]])
    sc = score_trace("z", tr)
    assert sc.degenerate()
    assert all(v == 0.0 for v in sc.aggregated["mean"].values())


def test_importance_csv(tmp_path):
    params = init_params(ModelConfig(), 0)
    s = make_scene(GenConfig(seed=1), 0)
    sc = score_trace(s.scene_id, forward(params, s, trace=True).trace)
    path = tmp_path / "imp.csv"
    write_importance_csv(path, [sc])
    rows = list(csv.DictReader(open(path)))
    assert tuple(rows[0]) == CSV_COLUMNS
    assert len(rows) == 3 * 2 * len(s.agents)
    last = [r for r in rows if r["aggregated_mode"] == "last" and r["layer"] == "1"]
    assert sorted(int(r["rank"]) for r in last) == list(range(1, len(s.agents) + 1))
    assert all(float(r["normalized"]) == sc.normalized[1][int(r["agent_id"])] for r in last)
