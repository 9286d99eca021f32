"""Acceptance criteria, each at its stated tolerance.

Criteria 4-7 share one desk-scale run: 12000 training scenes, 60 epochs,
evaluated on 2000 held-out scenes drawn with a different seed.
"""

import math
import time

import numpy as np
import pytest

from agentimp.evalharness import (
    UndefinedStatistic,
    attention_heatmap,
    evaluate_scene,
    histogram,
    oracle_agreement,
    pearson,
    quantile_nearest_rank,
    quantiles,
    r_squared,
    remove_agent,
    run_removal_experiment,
)
from agentimp.evalharness.experiment import correlation_row
from agentimp.importance import score_trace
from agentimp.model import ModelConfig, TrainConfig, forward, init_params, train, transformer_layer, transformer_trace
from agentimp.scenegen import GenConfig, generate
from helpers import full_model_grad_error
from helpers import scene as mk_scene

TRAIN_SCENES, TRAIN_SEED = 12000, 1
EVAL_SCENES, EVAL_SEED = 2000, 2
EPOCHS, MODEL_SEED = 60, 0


# ---------------------------------------------------------------- 1

@pytest.mark.criterion(1)
def test_criterion_1_softmax_decomposition(detail):
    rng = np.random.default_rng(20240601)
    worst = 0.0
    for _ in range(1000):
        n, f = int(rng.integers(1, 9)), int(rng.integers(1, 33))
        d = int(rng.integers(1, f + 1))
        x = rng.normal(scale=2.0, size=(n, f))
        q, k, v = rng.normal(size=(f, d)), rng.normal(size=(f, d)), rng.normal(size=(f, f))
        worst = max(worst, float(np.max(np.abs(transformer_trace(x, q, k, v).reconstruct() - transformer_layer(x, q, k, v)))))
    detail(f"max abs diff {worst:.2e}")
    assert worst < 1e-9


# ---------------------------------------------------------------- 2

@pytest.mark.criterion(2)
@pytest.mark.parametrize("kind", ["lanegcn", "transformer"])
def test_criterion_2_full_model_gradients(kind, detail):
    errs = [full_model_grad_error(kind, seed) for seed in range(20)]
    detail(f"worst rel. err {max(errs):.2e} ({kind})")
    assert max(errs) < 1e-3


# ---------------------------------------------------------------- 3

def _ref_pearson(x, y):
    n = len(x)
    mx, my = math.fsum(x) / n, math.fsum(y) / n
    sxy = math.fsum((a - mx) * (b - my) for a, b in zip(x, y))
    sxx = math.fsum((a - mx) ** 2 for a in x)
    syy = math.fsum((b - my) ** 2 for b in y)
    return sxy / math.sqrt(sxx * syy)


def _ref_r2(x, y):
    # explicit least-squares line, then 1 - SS_res / SS_tot
    n = len(x)
    mx, my = math.fsum(x) / n, math.fsum(y) / n
    slope = math.fsum((a - mx) * (b - my) for a, b in zip(x, y)) / math.fsum((a - mx) ** 2 for a in x)
    icpt = my - slope * mx
    ss_res = math.fsum((b - (slope * a + icpt)) ** 2 for a, b in zip(x, y))
    ss_tot = math.fsum((b - my) ** 2 for b in y)
    return 1.0 - ss_res / ss_tot


def _ref_quantile(values, q):
    s = sorted(values)
    rank = max(1, math.ceil(q * len(s) / 100))
    return s[rank - 1]


def _ref_hist(values, bins, lo, hi):
    edges = [lo + (hi - lo) * i / bins for i in range(bins + 1)]
    counts, under, over = [0] * bins, 0, 0
    for v in values:
        if v < lo:
            under += 1
        elif v > hi:
            over += 1
        else:
            for i in range(bins):
                if edges[i] <= v < edges[i + 1] or (i == bins - 1 and v == hi):
                    counts[i] += 1
                    break
    return counts, under, over


@pytest.mark.criterion(3)
def test_criterion_3_statistic_oracles(detail):
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(100):
        n = int(rng.integers(3, 200))
        x = rng.normal(size=n) * rng.uniform(0.1, 10)
        y = 0.7 * x + rng.normal(size=n) * rng.uniform(0.1, 10)
        xs, ys = x.tolist(), y.tolist()
        r = pearson(xs, ys)
        worst = max(worst, abs(r - _ref_pearson(xs, ys)), abs(r_squared(xs, ys) - _ref_r2(xs, ys)), abs(r_squared(xs, ys) - r * r))
        for q in (0, 30, 50, 80, 90, 100):
            assert quantile_nearest_rank(xs, q) == _ref_quantile(xs, q)
        assert quantiles(xs) == [_ref_quantile(xs, q) for q in (0, 30, 50, 80, 90, 100)]
        bins = int(rng.integers(1, 25))
        lo, hi = sorted(rng.normal(size=2).tolist())
        h = histogram(xs, bins, (lo, hi))
        counts, under, over = _ref_hist(xs, bins, lo, hi)
        assert h["counts"].tolist() == counts and h["underflow"] == under and h["overflow"] == over
    detail(f"max abs diff {worst:.1e}")
    assert worst < 1e-12


# ---------------------------------------------------------------- 4-7

@pytest.fixture(scope="module")
def desk():
    t0 = time.time()
    train_set = generate(GenConfig(num_scenes=TRAIN_SCENES, seed=TRAIN_SEED))
    eval_set = generate(GenConfig(num_scenes=EVAL_SCENES, seed=EVAL_SEED))
    params = train(train_set, TrainConfig(epochs=EPOCHS, seed=MODEL_SEED), ModelConfig()).params
    evals = [evaluate_scene(params, s) for s in eval_set]
    removal = {mode: run_removal_experiment(params, eval_set, ks=(1, 2, 3), agg_mode=mode, evals=evals) for mode in ("max", "mean", "last")}
    out = {
        "params": params,
        "scenes": eval_set,
        "evals": evals,
        "removal": removal,
        "heatmap": attention_heatmap(params, eval_set, evals=evals),
        "oracle": oracle_agreement(evals, "last"),
    }
    out["seconds"] = time.time() - t0
    return out


@pytest.mark.criterion(4)
def test_criterion_4_removal_trend(desk, detail):
    rows = desk["removal"]["last"].rows
    r = [row.traj_pearson for row in rows]
    n = [row.n for row in rows]
    detail(f"k=1/2/3 Pearson {r[0]:.3f}/{r[1]:.3f}/{r[2]:.3f} on n={n[0]}/{n[1]}/{n[2]}, {desk['seconds']:.0f}s")
    assert min(n) >= 500
    assert r[0] >= 0.3
    assert r[0] > r[1] > r[2]
    assert desk["seconds"] < 15 * 60


@pytest.mark.criterion(5)
def test_criterion_5_aggregation_robustness(desk, detail):
    r = {mode: res.row(1).traj_pearson for mode, res in desk["removal"].items()}
    spread = max(r.values()) - min(r.values())
    detail(" ".join(f"{m} {v:.3f}" for m, v in r.items()) + f", spread {spread:.3f}")
    assert spread <= 0.1


@pytest.mark.criterion(6)
def test_criterion_6_attention_in_front(desk, detail):
    hm = desk["heatmap"]
    frac = hm.front_fraction()
    detail(f"front fraction {frac:.3f}, overflow mass {hm.overflow_mass / hm.total_mass:.3f} of total")
    assert frac >= 0.7


@pytest.mark.criterion(7)
def test_criterion_7_oracle_agreement(desk, detail):
    ag = desk["oracle"]
    detail(f"mean Spearman {ag.mean_spearman:.3f} over {len(ag.per_scene)} scenes ({len(ag.skipped)} without oracle signal)")
    assert ag.mean_spearman >= 0.5


# ---------------------------------------------------------------- 8

@pytest.mark.criterion(8)
def test_criterion_8_determinism(tmp_path, detail):
    from agentimp.cli import main

    def pipeline(root):
        root.mkdir()
        assert main(["gen", "--num-scenes", "60", "--seed", "5", "--out", str(root / "scenes.jsonl")]) == 0
        assert main(["train", "--data", str(root / "scenes.jsonl"), "--epochs", "3", "--seed", "2", "--out", str(root / "w.json")]) == 0
        assert main(["eval", "--model", str(root / "w.json"), "--data", str(root / "scenes.jsonl"), "--report-dir", str(root / "rep")]) == 0
        assert main(["heatmap", "--model", str(root / "w.json"), "--data", str(root / "scenes.jsonl"), "--out", str(root / "hm.csv")]) == 0
        return {p.relative_to(root): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}

    a, b = pipeline(tmp_path / "a"), pipeline(tmp_path / "b")
    detail(f"{len(a)} files compared")
    assert set(a) == set(b)
    for name in a:
        if name.name.endswith("config.json"):
            continue  # records absolute paths
        assert a[name] == b[name], name


# ---------------------------------------------------------------- 9

@pytest.mark.criterion(9)
def test_criterion_9_degenerate_inputs(detail):
    params = init_params(ModelConfig(), 0)

    # ego-only scene: predicts, has no scores, contributes no rows and no heatmap mass
    only = remove_agent(mk_scene([(0, 0, 10, 0), (20, 0, 8, 0)], scene_id="solo"), 1)
    res = forward(params, only, trace=True)
    assert np.all(np.isfinite(res.trajectories))
    scores = score_trace("solo", res.trace)
    assert scores.aggregated["last"] == {}
    rem = run_removal_experiment(params, [only], ks=(1, "all"))
    assert rem.records == [] and all(r.n == 0 and r.traj_pearson is None for r in rem.rows)
    hm = attention_heatmap(params, [only])
    assert hm.total_mass == 0.0 and hm.front_fraction() == 0.0

    # all-zero attention: scores are zero, scenes excluded with a warning
    zero = init_params(ModelConfig(), 0)
    for n in range(zero.config.num_layers):
        zero.tensors[f"layer{n}.W2"][:] = 0.0
    scenes = generate(GenConfig(num_scenes=4, seed=3))
    ev = evaluate_scene(zero, scenes[0])
    assert ev.scores.degenerate()
    assert all(v == 0.0 for m in ev.scores.aggregated.values() for v in m.values())
    rem = run_removal_experiment(zero, scenes, ks=(1,))
    assert len(rem.excluded) == 4 and rem.warnings

    # constant correlation inputs: an error from the statistic, None in the table
    with pytest.raises(UndefinedStatistic):
        pearson([1.0, 1.0, 1.0], [0.0, 1.0, 2.0])
    with pytest.raises(UndefinedStatistic):
        r_squared([0.0, 1.0, 2.0], [5.0, 5.0, 5.0])
    from agentimp.evalharness import RemovalRecord

    recs = [RemovalRecord("s", 1, (1,), 0.5, float(i), 0.0, 0.0) for i in range(3)]
    row = correlation_row(1, recs)
    assert row.traj_pearson is None and row.traj_r2 is None

    # agents exactly on cell edges go to the lower-inclusive cell; the far edge overflows
    edge = mk_scene([(0, 0, 10, 0), (8.0, -4.0, 5, 0), (-60.0, 60.0, 5, 0), (60.0, 0.0, 5, 0)], scene_id="edge")
    hm = attention_heatmap(params, [edge])
    assert hm.counts[17, 16] == 1 and hm.counts[0, 0] == 1 and hm.overflow_count == 1
    assert np.all(np.isfinite(hm.mass)) and np.all(np.isfinite(hm.mean_per_cell))
    detail("ego-only, zero attention, constant inputs, grid edges")
