"""Model configuration, parameter container and the weight-file format."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np

from agentimp.errors import ConfigError, DataError

WEIGHTS_FORMAT = "agentimp-weights"
WEIGHTS_VERSION = 1
LAYER_KINDS = ("lanegcn", "transformer")


@dataclass(frozen=True)
class ModelConfig:
    layer_kind: str = "lanegcn"
    num_layers: int = 2
    width: int = 64
    pair_hidden: int = 64
    key_dim: int = 32
    encoder_hidden: int = 64
    decoder_hidden: int = 64
    history_len: int = 21
    future_len: int = 8
    future_dt: float = 1.0
    pos_scale: float = 20.0
    vel_scale: float = 10.0
    delta_scale: float = 20.0
    out_scale: float = 10.0

    def __post_init__(self):
        if self.layer_kind not in LAYER_KINDS:
            raise ConfigError(f"layer_kind must be one of {LAYER_KINDS}, got {self.layer_kind!r}")
        if self.num_layers < 1:
            raise ConfigError("num_layers must be >= 1")
        for name in ("width", "pair_hidden", "key_dim", "encoder_hidden", "decoder_hidden", "history_len", "future_len"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be positive")

    @property
    def input_width(self) -> int:
        return 4 * self.history_len

    def shapes(self) -> dict[str, tuple[int, int]]:
        f = self.width
        out = {
            "enc.w0": (self.input_width, self.encoder_hidden),
            "enc.b0": (1, self.encoder_hidden),
            "enc.w1": (self.encoder_hidden, f),
            "enc.b1": (1, f),
        }
        for n in range(self.num_layers):
            if self.layer_kind == "lanegcn":
                out[f"layer{n}.W0"] = (f, f)
                out[f"layer{n}.W1"] = (2 * f + 2, self.pair_hidden)
                out[f"layer{n}.W2"] = (self.pair_hidden, f)
            else:
                out[f"layer{n}.Q"] = (f, self.key_dim)
                out[f"layer{n}.K"] = (f, self.key_dim)
                out[f"layer{n}.V"] = (f, f)
        out["dec.w0"] = (f, self.decoder_hidden)
        out["dec.b0"] = (1, self.decoder_hidden)
        out["dec.w1"] = (self.decoder_hidden, 2 * self.future_len)
        out["dec.b1"] = (1, 2 * self.future_len)
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise DataError(f"unknown model config keys {sorted(unknown)}")
        return cls(**d)


@dataclass
class ModelParams:
    config: ModelConfig
    tensors: dict
    version: int = WEIGHTS_VERSION

    def __post_init__(self):
        expected = self.config.shapes()
        if set(expected) != set(self.tensors):
            missing = sorted(set(expected) - set(self.tensors))
            extra = sorted(set(self.tensors) - set(expected))
            raise DataError(f"parameter set mismatch (missing {missing}, unexpected {extra})")
        for name, shape in expected.items():
            arr = np.ascontiguousarray(self.tensors[name], dtype=np.float64)
            if arr.shape != shape:
                raise DataError(f"{name}: shape {arr.shape} does not match manifest {shape}")
            self.tensors[name] = arr

    def __getitem__(self, name: str) -> np.ndarray:
        return self.tensors[name]

    def copy(self) -> "ModelParams":
        return ModelParams(self.config, {k: v.copy() for k, v in self.tensors.items()}, self.version)

    def equal(self, other: "ModelParams") -> bool:
        """Bitwise equality of config and every tensor."""
        return (
            self.config == other.config
            and self.tensors.keys() == other.tensors.keys()
            and all(np.array_equal(self.tensors[k], other.tensors[k]) and self.tensors[k].tobytes() == other.tensors[k].tobytes() for k in self.tensors)
        )

    def to_dict(self) -> dict:
        return {
            "format": WEIGHTS_FORMAT,
            "version": self.version,
            "config": asdict(self.config),
            "manifest": {k: list(v.shape) for k, v in self.tensors.items()},
            "tensors": {k: v.ravel().tolist() for k, v in self.tensors.items()},
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ModelParams":
        if d.get("format") != WEIGHTS_FORMAT:
            raise DataError(f"not a weight file (format={d.get('format')!r})")
        if d.get("version") != WEIGHTS_VERSION:
            raise DataError(f"unsupported weight version {d.get('version')!r} (expected {WEIGHTS_VERSION})")
        config = ModelConfig.from_dict(d["config"])
        manifest = {k: tuple(v) for k, v in d["manifest"].items()}
        if manifest != config.shapes():
            raise DataError("weight manifest does not match model config")
        tensors = {}
        for name, shape in manifest.items():
            data = np.array(d["tensors"][name], dtype=np.float64)
            if data.size != shape[0] * shape[1]:
                raise DataError(f"{name}: {data.size} values for shape {shape}")
            tensors[name] = data.reshape(shape)
        return cls(config, tensors, d["version"])


def init_params(config: ModelConfig, seed: int = 0) -> ModelParams:
    rng = np.random.default_rng(seed)
    tensors = {}
    for name, shape in config.shapes().items():
        if ".b" in name:
            tensors[name] = np.zeros(shape)
            continue
        std = np.sqrt(2.0 / shape[0])
        if name.endswith(".W2") or name.endswith(".V"):
            std *= 0.5
        if name == "dec.w1":
            std *= 0.1
        tensors[name] = rng.normal(0.0, std, size=shape)
    return ModelParams(config, tensors)


def save_params(params: ModelParams, path) -> None:
    Path(path).write_text(json.dumps(params.to_dict(), separators=(",", ":"), allow_nan=False), encoding="utf-8")


def load_params(path) -> ModelParams:
    try:
        d = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: invalid weight file ({exc.msg})") from exc
    if not isinstance(d, dict):
        raise DataError(f"{path}: invalid weight file")
    try:
        return ModelParams.from_dict(d)
    except (KeyError, TypeError) as exc:
        raise DataError(f"{path}: malformed weight file ({exc})") from exc
