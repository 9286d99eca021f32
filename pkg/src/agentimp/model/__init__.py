"""Toy trajectory predictor with interchangeable interaction-attention layers."""

from agentimp.model.features import EgoFrame, SceneTensors, make_batch, pair_index, scene_tensors
from agentimp.model.layers import (
    AttentionTrace,
    LayerTrace,
    lanegcn_layer,
    lanegcn_trace,
    transformer_layer,
    transformer_trace,
)
from agentimp.model.net import ForwardResult, batch_loss, encode_agent, forward, predict_tensors
from agentimp.model.params import ModelConfig, ModelParams, init_params, load_params, save_params
from agentimp.model.train import Adam, TrainConfig, TrainingError, TrainResult, train

__all__ = [
    "Adam",
    "AttentionTrace",
    "EgoFrame",
    "ForwardResult",
    "LayerTrace",
    "ModelConfig",
    "ModelParams",
    "SceneTensors",
    "TrainConfig",
    "TrainResult",
    "TrainingError",
    "batch_loss",
    "encode_agent",
    "forward",
    "init_params",
    "lanegcn_layer",
    "lanegcn_trace",
    "load_params",
    "make_batch",
    "pair_index",
    "predict_tensors",
    "save_params",
    "scene_tensors",
    "train",
    "transformer_layer",
    "transformer_trace",
]
