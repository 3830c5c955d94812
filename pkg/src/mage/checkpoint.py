"""One binary container for every trained model kind.

Layout: magic ``MAGC``, version u16, u32 JSON-header length, the UTF-8
JSON header, then raw little-endian float64 array bytes in the header's
manifest order. Arrays round-trip exactly (no dtype narrowing), so
save/load is an identity on model behaviour.
"""

from __future__ import annotations

import dataclasses
import json
import struct

import numpy as np

from .attention import MageParams
from .augment import (
    AutoencoderConfig,
    AutoencoderModel,
    VaeConfig,
    VaeModel,
    _autoencoder_specs,
    _vae_specs,
)
from .classifiers import LstmParams, SoftmaxModel
from .data import MinMaxScaler
from .errors import ParseError, UsageError
from .layers import Mlp

__all__ = ["save_model", "load_model"]

MAGIC = b"MAGC"
VERSION = 1


def _write_container(path, kind: str, meta: dict, arrays: dict) -> None:
    manifest = [(name, list(arr.shape)) for name, arr in arrays.items()]
    header = json.dumps({"kind": kind, "meta": meta, "arrays": manifest}).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<HI", VERSION, len(header)))
        fh.write(header)
        for name, _ in manifest:
            fh.write(np.ascontiguousarray(arrays[name], dtype="<f8").tobytes())


def _read_container(path):
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != MAGIC:
            raise ParseError(f"{path}: bad checkpoint magic {magic!r}")
        version, header_len = struct.unpack("<HI", fh.read(6))
        if version != VERSION:
            raise ParseError(f"{path}: unsupported checkpoint version {version}")
        header = json.loads(fh.read(header_len).decode("utf-8"))
        arrays = {}
        for name, shape in header["arrays"]:
            count = int(np.prod(shape)) if shape else 1
            buf = fh.read(8 * count)
            arrays[name] = np.frombuffer(buf, dtype="<f8").reshape(shape).copy()
    return header["kind"], header["meta"], arrays


def _scaler_arrays(scaler: MinMaxScaler, arrays: dict) -> None:
    arrays["scaler.min"] = scaler.minimum
    arrays["scaler.max"] = scaler.maximum


def _scaler_from(meta: dict, arrays: dict) -> MinMaxScaler:
    return MinMaxScaler(
        minimum=arrays["scaler.min"], maximum=arrays["scaler.max"], epsilon=meta["scaler_epsilon"]
    )


def _mlp_arrays(prefix: str, net: Mlp, arrays: dict) -> None:
    for name, arr in net.params.items():
        arrays[f"{prefix}.params.{name}"] = arr
    for name, arr in net.stats.items():
        arrays[f"{prefix}.stats.{name}"] = arr


def _mlp_from(prefix: str, specs, arrays: dict) -> Mlp:
    params = {
        name[len(prefix) + 8 :]: arr
        for name, arr in arrays.items()
        if name.startswith(f"{prefix}.params.")
    }
    stats = {
        name[len(prefix) + 7 :]: arr
        for name, arr in arrays.items()
        if name.startswith(f"{prefix}.stats.")
    }
    return Mlp(specs, params, stats)


def save_model(model, path) -> None:
    """Serialize any trained model (AE/DAE, VAE, attention, LSTM, softmax)."""
    arrays: dict[str, np.ndarray] = {}
    if isinstance(model, AutoencoderModel):
        meta = {
            "config": dataclasses.asdict(model.config),
            "scaler_epsilon": model.scaler.epsilon,
        }
        _mlp_arrays("net", model.net, arrays)
        _scaler_arrays(model.scaler, arrays)
        _write_container(path, "autoencoder", meta, arrays)
    elif isinstance(model, VaeModel):
        meta = {
            "config": dataclasses.asdict(model.config),
            "scaler_epsilon": model.scaler.epsilon,
        }
        for prefix, net in (
            ("trunk", model.trunk),
            ("mu", model.mu_head),
            ("lv", model.lv_head),
            ("decoder", model.decoder),
        ):
            _mlp_arrays(prefix, net, arrays)
        _scaler_arrays(model.scaler, arrays)
        _write_container(path, "vae", meta, arrays)
    elif isinstance(model, MageParams):
        meta = {
            "num_heads": model.num_heads,
            "model_dim": model.model_dim,
            "temperature": model.temperature,
        }
        arrays["w"] = model.w
        arrays["c"] = model.c
        _write_container(path, "attention", meta, arrays)
    elif isinstance(model, LstmParams):
        meta = {
            "input_dim": model.input_dim,
            "hidden_dim": model.hidden_dim,
            "num_classes": model.num_classes,
        }
        arrays.update(model.as_dict())
        _write_container(path, "lstm", meta, arrays)
    elif isinstance(model, SoftmaxModel):
        meta = {"l2": model.l2}
        arrays["weights"] = model.weights
        arrays["bias"] = model.bias
        _write_container(path, "softmax", meta, arrays)
    else:
        raise UsageError(f"don't know how to checkpoint a {type(model).__name__}")


def load_model(path):
    """Inverse of :func:`save_model`; the kind is read from the header."""
    kind, meta, arrays = _read_container(path)
    if kind == "autoencoder":
        config = AutoencoderConfig(
            **{**meta["config"], "hidden_dims": tuple(meta["config"]["hidden_dims"])}
        )
        return AutoencoderModel(
            config=config,
            net=_mlp_from("net", _autoencoder_specs(config), arrays),
            scaler=_scaler_from(meta, arrays),
        )
    if kind == "vae":
        config = VaeConfig(**meta["config"])
        specs = _vae_specs(config)
        return VaeModel(
            config=config,
            trunk=_mlp_from("trunk", specs["trunk"], arrays),
            mu_head=_mlp_from("mu", specs["mu"], arrays),
            lv_head=_mlp_from("lv", specs["lv"], arrays),
            decoder=_mlp_from("decoder", specs["decoder"], arrays),
            scaler=_scaler_from(meta, arrays),
        )
    if kind == "attention":
        return MageParams(
            num_heads=meta["num_heads"],
            model_dim=meta["model_dim"],
            w=arrays["w"],
            c=arrays["c"],
            temperature=meta["temperature"],
        )
    if kind == "lstm":
        return LstmParams(
            input_dim=meta["input_dim"],
            hidden_dim=meta["hidden_dim"],
            num_classes=meta["num_classes"],
            wx=arrays["wx"],
            wh=arrays["wh"],
            b=arrays["b"],
            why=arrays["why"],
            by=arrays["by"],
        )
    if kind == "softmax":
        return SoftmaxModel(weights=arrays["weights"], bias=arrays["bias"], l2=meta["l2"])
    raise ParseError(f"{path}: unknown model kind {kind!r}")
