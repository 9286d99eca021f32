"""Synthetic driving scenes and a counterfactual causal-influence oracle."""

from agentimp.scenegen.generate import (
    DEFAULT_MIX,
    GenConfig,
    causal_influence,
    causal_influences,
    check_mix,
    generate,
    make_scene,
    parse_mix,
    rollout_ego,
)
from agentimp.scenegen.scene import (
    SCENARIO_KINDS,
    SCHEMA_VERSION,
    AgentTrack,
    Scene,
    dumps_scene,
    read_scenes,
    write_scenes,
)
from agentimp.scenegen.sim import SimConfig, simulate

__all__ = [
    "DEFAULT_MIX",
    "SCENARIO_KINDS",
    "SCHEMA_VERSION",
    "AgentTrack",
    "GenConfig",
    "Scene",
    "SimConfig",
    "causal_influence",
    "causal_influences",
    "check_mix",
    "dumps_scene",
    "generate",
    "make_scene",
    "parse_mix",
    "read_scenes",
    "rollout_ego",
    "simulate",
    "write_scenes",
]
