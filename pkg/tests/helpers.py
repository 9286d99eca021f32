"""Small scene builders shared by the tests."""

import numpy as np

from agentimp.scenegen import AgentTrack, Scene


def track(agent_id, state, behavior=None, kind=None, history_len=21, future_len=8):
    """Track whose whole history sits at ``state`` (x, y, vx, vy), advanced at constant velocity."""
    x, y, vx, vy = state
    t = np.arange(-(history_len - 1), 1) * 0.1
    hist = np.column_stack([x + vx * t, y + vy * t, np.full_like(t, vx), np.full_like(t, vy)])
    tf = np.arange(1, future_len + 1, dtype=float)
    fut = np.column_stack([x + vx * tf, y + vy * tf])
    return AgentTrack(
        id=agent_id,
        kind=kind or ("ego" if agent_id == 0 else "vehicle"),
        history=hist,
        future=fut,
        behavior=behavior or {"type": "constant"},
    )


def scene(states, behaviors=None, scene_id="t", kind="mixed", ego_vdes=12.0):
    """``states[0]`` is the ego (IDM driver); the rest are agents with ids 1..n."""
    behaviors = behaviors or [None] * len(states)
    ego = track(0, states[0], {"type": "idm", "v_des": ego_vdes})
    agents = [track(n, s, b) for n, (s, b) in enumerate(zip(states[1:], behaviors[1:]), 1)]
    return Scene(scene_id, ego, tuple(agents), kind)


def tiny_config(kind, width=8):
    from agentimp.model import ModelConfig

    return ModelConfig(layer_kind=kind, width=width, pair_hidden=width, key_dim=4, encoder_hidden=width, decoder_hidden=width)


def full_model_grad_error(kind, seed, n_agents=3):
    """Relative error of tape gradients vs central differences on one random scene."""
    from agentimp.model import ModelParams, init_params, make_batch, scene_tensors
    from agentimp.model.net import batch_loss, batch_loss_value
    from agentimp.numcore import numeric_grad, relative_error

    rng = np.random.default_rng(seed)
    states = [(0.0, 0.0, rng.uniform(5, 15), 0.0)]
    for _ in range(n_agents - 1):
        states.append((rng.uniform(-30, 40), rng.choice([-3.5, 0.0, 3.5]), rng.uniform(0, 15), rng.uniform(-1, 1)))
    s = scene(states)
    cfg = tiny_config(kind)
    params = init_params(cfg, seed)
    # perturb biases away from zero so every parameter is exercised
    for name, arr in params.tensors.items():
        arr += 0.05 * rng.normal(size=arr.shape)
    batch = make_batch([scene_tensors(s, cfg)], cfg)
    _, grads = batch_loss(params, batch)
    numeric = numeric_grad(lambda t: batch_loss_value(ModelParams(cfg, {k: v.copy() for k, v in t.items()}), batch), params.tensors)
    return relative_error(grads, numeric)
