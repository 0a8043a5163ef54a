"""Versioned checkpoint container: JSON header + flat float64 weight blob."""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass

import numpy as np

from draggen.diffusion.codec import LatentCodec
from draggen.diffusion.model import Denoiser, DenoiserConfig
from draggen.diffusion.schedule import NoiseSchedule
from draggen.errors import ConfigError
from draggen.hashing import sha256_hex

MAGIC = b"DRGN"
FORMAT_VERSION = 1


@dataclass
class Checkpoint:
    model: Denoiser
    codec: LatentCodec
    schedule: NoiseSchedule
    metadata: dict
    hash: str = ""

    @property
    def config(self) -> DenoiserConfig:
        return self.model.config


def save_checkpoint(path, model: Denoiser, codec: LatentCodec,
                    schedule: NoiseSchedule, metadata: dict | None = None) -> str:
    """Serialize and return the container's content hash."""
    entries = []
    chunks = []
    offset = 0
    weights = dict(model.state_dict())
    weights["codec.basis"] = codec.basis
    weights["codec.scale"] = codec.scale
    for name in sorted(weights):
        arr = np.ascontiguousarray(weights[name], dtype=np.float64)
        entries.append({"name": name, "offset": offset, "shape": list(arr.shape)})
        chunks.append(arr.tobytes())
        offset += arr.size

    header = {
        "format_version": FORMAT_VERSION,
        "config": model.config.to_json(),
        "schedule": schedule.to_json(),
        "codec": {"factor": codec.factor, "channels": codec.channels},
        "metadata": metadata or {},
        "weights": entries,
    }
    header_bytes = json.dumps(header, sort_keys=True).encode("utf-8")
    blob = b"".join(chunks)
    payload = MAGIC + struct.pack("<Q", len(header_bytes)) + header_bytes + blob
    with open(path, "wb") as f:
        f.write(payload)
    return sha256_hex(payload)


def load_checkpoint(path) -> Checkpoint:
    with open(path, "rb") as f:
        payload = f.read()
    if payload[:4] != MAGIC:
        raise ConfigError(f"{path}: not a checkpoint file")
    (header_len,) = struct.unpack("<Q", payload[4:12])
    header = json.loads(payload[12 : 12 + header_len].decode("utf-8"))
    if header["format_version"] != FORMAT_VERSION:
        raise ConfigError(f"unsupported checkpoint version {header['format_version']}")
    blob = np.frombuffer(payload[12 + header_len :], dtype=np.float64)

    arrays = {}
    for ent in header["weights"]:
        size = int(np.prod(ent["shape"])) if ent["shape"] else 1
        arrays[ent["name"]] = (
            blob[ent["offset"] : ent["offset"] + size].reshape(ent["shape"]).copy()
        )

    config = DenoiserConfig.from_json(header["config"])
    model = Denoiser(config, seed=0)
    model.load_state_dict(
        {k: v for k, v in arrays.items() if not k.startswith("codec.")}
    )
    codec = LatentCodec(
        basis=arrays["codec.basis"],
        scale=arrays["codec.scale"],
        factor=header["codec"]["factor"],
        channels=header["codec"]["channels"],
    )
    schedule = NoiseSchedule.from_json(header["schedule"])
    return Checkpoint(
        model=model, codec=codec, schedule=schedule,
        metadata=header["metadata"], hash=sha256_hex(payload),
    )
