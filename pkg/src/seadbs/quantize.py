"""Checkpoint container and FP16 post-training quantization.

File layout (all integers little-endian)::

    offset 0   8 bytes   magic  b"SEADBSCK"
    offset 8   u32       format version
    offset 12  u32       header length H in bytes
    offset 16  H bytes   UTF-8 JSON header
    16 + H     ...       parameter payload, tensors back to back

The header lists every tensor with its name, shape, dtype (``<f4`` or
``<f2``), byte offset into the payload and byte length, plus the payload
size and its CRC-32.  See docs/format.md for a worked hexdump.
"""
from __future__ import annotations

import json
import struct
import zlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from .agent.ddpg import AgentNetworks
from .nn import Dense, Mlp

MAGIC = b"SEADBSCK"
FORMAT_VERSION = 1
FP16_MAX = 65504.0
DTYPES = {"fp32": "<f4", "fp16": "<f2"}


class CheckpointError(ValueError):
    pass


@dataclass
class ModelCheckpoint:
    precision: str
    tensors: dict[str, np.ndarray]
    architecture: dict[str, list[str]]  # network name -> activations per layer
    config: dict[str, Any] = field(default_factory=dict)
    seed: int | None = None
    meta: dict[str, Any] = field(default_factory=dict)
    format_version: int = FORMAT_VERSION

    def payload_nbytes(self) -> int:
        return sum(t.nbytes for t in self.tensors.values())

    def agent_kwargs(self) -> dict[str, float]:
        return {k: self.meta[k] for k in ("gamma", "rho", "beta_threshold", "tau_min") if k in self.meta}


def checkpoint_from_agent(nets: AgentNetworks, config: dict | None = None, seed: int | None = None,
                          meta: dict | None = None) -> ModelCheckpoint:
    """fp32 checkpoint of every network held by ``nets``."""
    tensors = {}
    arch = {}
    for net_name, net in nets.named_networks().items():
        arch[net_name] = [layer.activation for layer in net.layers]
        for pname, p in net.named_params():
            tensors[f"{net_name}.{pname}"] = np.ascontiguousarray(p, dtype=DTYPES["fp32"])
    info = {"gamma": nets.gamma, "rho": nets.rho, "beta_threshold": nets.beta_threshold,
            "tau_min": nets.tau_min}
    info.update(meta or {})
    return ModelCheckpoint("fp32", tensors, arch, dict(config or {}), seed, info)


def to_fp16(x: np.ndarray) -> np.ndarray:
    """Round to binary16 (nearest-even), saturating at the largest finite value."""
    x = np.asarray(x)
    if np.isnan(x).any():
        raise CheckpointError("cannot quantize NaN parameters")
    return np.clip(x, -FP16_MAX, FP16_MAX).astype(DTYPES["fp16"])


def quantize_fp16(ckpt: ModelCheckpoint) -> ModelCheckpoint:
    if ckpt.precision != "fp32":
        raise CheckpointError(f"expected an fp32 checkpoint, got {ckpt.precision}")
    tensors = {k: to_fp16(v) for k, v in ckpt.tensors.items()}
    return ModelCheckpoint("fp16", tensors, dict(ckpt.architecture), dict(ckpt.config), ckpt.seed,
                           dict(ckpt.meta), ckpt.format_version)


def to_bytes(ckpt: ModelCheckpoint) -> bytes:
    dtype = DTYPES[ckpt.precision]
    entries = []
    blobs = []
    offset = 0
    for name in sorted(ckpt.tensors):
        t = np.ascontiguousarray(ckpt.tensors[name], dtype=dtype)
        raw = t.tobytes()
        entries.append({"name": name, "shape": list(t.shape), "dtype": dtype,
                        "offset": offset, "nbytes": len(raw)})
        blobs.append(raw)
        offset += len(raw)
    payload = b"".join(blobs)
    header = {
        "precision": ckpt.precision,
        "tensors": entries,
        "architecture": ckpt.architecture,
        "payload_nbytes": len(payload),
        "payload_crc32": zlib.crc32(payload),
        "config": ckpt.config,
        "seed": ckpt.seed,
        "meta": ckpt.meta,
    }
    hbytes = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    return MAGIC + struct.pack("<II", ckpt.format_version, len(hbytes)) + hbytes + payload


def from_bytes(data: bytes) -> ModelCheckpoint:
    if len(data) < 16 or data[:8] != MAGIC:
        raise CheckpointError("not a checkpoint file (bad magic)")
    version, hlen = struct.unpack("<II", data[8:16])
    if version != FORMAT_VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    if len(data) < 16 + hlen:
        raise CheckpointError("truncated checkpoint header")
    try:
        header = json.loads(data[16 : 16 + hlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"corrupt checkpoint header: {exc}") from None
    payload = data[16 + hlen :]
    if len(payload) != header["payload_nbytes"]:
        raise CheckpointError(
            f"truncated checkpoint payload: {len(payload)} of {header['payload_nbytes']} bytes"
        )
    if zlib.crc32(payload) != header["payload_crc32"]:
        raise CheckpointError("checkpoint payload checksum mismatch")
    tensors = {}
    for e in header["tensors"]:
        raw = payload[e["offset"] : e["offset"] + e["nbytes"]]
        tensors[e["name"]] = np.frombuffer(raw, dtype=e["dtype"]).reshape(e["shape"]).copy()
    return ModelCheckpoint(header["precision"], tensors, header["architecture"], header["config"],
                           header["seed"], header["meta"], version)


def save_checkpoint(ckpt: ModelCheckpoint, path: str | Path) -> int:
    data = to_bytes(ckpt)
    Path(path).write_bytes(data)
    return len(data)


def read_checkpoint(path: str | Path) -> ModelCheckpoint:
    return from_bytes(Path(path).read_bytes())


def _rebuild(ckpt: ModelCheckpoint, net_name: str) -> Mlp:
    layers = []
    for i, act in enumerate(ckpt.architecture[net_name]):
        w = ckpt.tensors[f"{net_name}.layers.{i}.weight"].astype(np.float64)
        b = ckpt.tensors[f"{net_name}.layers.{i}.bias"].astype(np.float64)
        layers.append(Dense(w, b, act))
    net = Mlp(layers, precision=ckpt.precision)
    net.check()
    return net


def load_for_inference(ckpt: ModelCheckpoint | str | Path) -> AgentNetworks:
    """Networks with stored parameters widened to float64 for computation."""
    if not isinstance(ckpt, ModelCheckpoint):
        ckpt = read_checkpoint(ckpt)
    nets = {name: _rebuild(ckpt, name) for name in ckpt.architecture}
    return AgentNetworks(**nets, **ckpt.agent_kwargs())


def quantize_file(src: str | Path, dst: str | Path) -> tuple[int, int]:
    """Quantize a checkpoint file; returns (fp32, fp16) payload sizes in bytes."""
    ckpt = read_checkpoint(src)
    q = quantize_fp16(ckpt)
    save_checkpoint(q, dst)
    return ckpt.payload_nbytes(), q.payload_nbytes()
