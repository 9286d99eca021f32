"""Encoder -> interaction stack -> decoder, on the gradient tape."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from agentimp.model.features import Batch, EgoFrame, SceneTensors, agent_input, make_batch, scene_tensors
from agentimp.model.layers import AttentionTrace, lanegcn_trace, transformer_trace
from agentimp.model.params import ModelParams
from agentimp.numcore.tape import GradTape, Node
from agentimp.numcore.tensor import check_finite, mlp_forward
from agentimp.scenegen.scene import AgentTrack, Scene


def _dense(tape: GradTape, x: Node, w: Node, b: Node, activate: bool = True) -> Node:
    h = tape.add_row(tape.matmul(x, w), b)
    return tape.relu(h) if activate else h


def build_graph(tape: GradTape, params: ModelParams, batch: Batch, want_layer_inputs: bool = False):
    """Register every parameter on ``tape`` and run the batched network.

    Returns ``(pred, layer_inputs)`` where ``pred`` holds ego-frame future
    displacements (rows x0, y0, x1, y1, ...) and ``layer_inputs`` the value
    entering each interaction layer when requested.
    """
    cfg = params.config
    p = {name: tape.param(name, value) for name, value in params.tensors.items()}
    x = tape.const(batch.inputs)
    x = _dense(tape, x, p["enc.w0"], p["enc.b0"])
    x = _dense(tape, x, p["enc.w1"], p["enc.b1"])
    layer_inputs = []
    f = cfg.width
    for n in range(cfg.num_layers):
        if want_layer_inputs:
            layer_inputs.append(x.value)
        if cfg.layer_kind == "lanegcn":
            w1 = p[f"layer{n}.W1"]
            a = tape.matmul(x, tape.row_slice(w1, 0, f))
            c = tape.matmul(x, tape.row_slice(w1, f + 2, 2 * f + 2))
            s = tape.pair_relu_sum(a, c, tape.row_slice(w1, f, f + 2), batch.deltas, batch.tgt, batch.src)
            y = tape.add(tape.matmul(x, p[f"layer{n}.W0"]), tape.matmul(s, p[f"layer{n}.W2"]))
            x = tape.relu(y)
        else:
            q = tape.matmul(x, p[f"layer{n}.Q"])
            k = tape.matmul(x, p[f"layer{n}.K"])
            v = tape.matmul(x, p[f"layer{n}.V"])
            y = tape.segment_attention(q, k, v, batch.seg, 1.0 / math.sqrt(cfg.key_dim))
            x = tape.relu(tape.add(x, y))
    h = _dense(tape, x, p["dec.w0"], p["dec.b0"])
    out = _dense(tape, h, p["dec.w1"], p["dec.b1"], activate=False)
    pred = tape.add(tape.const(batch.anchor), tape.scale(out, cfg.out_scale))
    return pred, layer_inputs


def batch_loss(params: ModelParams, batch: Batch):
    """Mean pointwise L2 (m) over every agent and waypoint; returns (loss, grads)."""
    tape = GradTape()
    pred, _ = build_graph(tape, params, batch)
    loss = tape.mean(tape.pointwise_l2(pred, tape.const(batch.target)))
    return float(loss.value[0, 0]), tape.backward(loss)


def batch_loss_value(params: ModelParams, batch: Batch) -> float:
    tape = GradTape()
    pred, _ = build_graph(tape, params, batch)
    return float(tape.mean(tape.pointwise_l2(pred, tape.const(batch.target))).value[0, 0])


def encode_agent(params: ModelParams, track: AgentTrack, frame: EgoFrame) -> np.ndarray:
    """Encoder feature x (width F) of one track in the given ego frame."""
    v = agent_input(track, frame, params.config)
    layers = [(params["enc.w0"], params["enc.b0"]), (params["enc.w1"], params["enc.b1"])]
    return mlp_forward(layers, v)


@dataclass
class ForwardResult:
    agent_ids: list
    trajectories: np.ndarray
    trace: AttentionTrace | None = None

    def trajectory(self, agent_id: int) -> np.ndarray:
        return self.trajectories[self.agent_ids.index(agent_id)]

    @property
    def ego(self) -> np.ndarray:
        return self.trajectories[0]


def _trace_layers(params: ModelParams, st: SceneTensors, layer_inputs) -> list:
    cfg = params.config
    deltas = (st.positions[None, :, :] - st.positions[:, None, :]) / cfg.delta_scale
    out = []
    for n, x in enumerate(layer_inputs):
        if cfg.layer_kind == "lanegcn":
            out.append(lanegcn_trace(x, deltas, params[f"layer{n}.W0"], params[f"layer{n}.W1"], params[f"layer{n}.W2"]))
        else:
            out.append(transformer_trace(x, params[f"layer{n}.Q"], params[f"layer{n}.K"], params[f"layer{n}.V"]))
    return out


def predict_tensors(params: ModelParams, st: SceneTensors, trace: bool = False) -> ForwardResult:
    batch = make_batch([st], params.config)
    tape = GradTape()
    pred, layer_inputs = build_graph(tape, params, batch, want_layer_inputs=trace)
    disp = pred.value.reshape(st.n, params.config.future_len, 2)
    world = check_finite(st.frame.vec_to_world(disp) + st.world_now[:, None, :], "trajectories")
    tr = AttentionTrace(list(st.agent_ids), _trace_layers(params, st, layer_inputs)) if trace else None
    return ForwardResult(list(st.agent_ids), world, tr)


def forward(params: ModelParams, scene: Scene, trace: bool = False) -> ForwardResult:
    """Predict world-frame futures (N, T, 2) for ego and agents; row 0 is the ego."""
    return predict_tensors(params, scene_tensors(scene, params.config), trace)
