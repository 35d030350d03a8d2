"""Deterministic binary checkpoint container.

Layout (all integers little-endian):

    bytes 0..3    magic b"GFCK"
    bytes 4..7    uint32 container version
    bytes 8..15   uint64 header length in bytes
    header        UTF-8 JSON, sorted keys, no whitespace
    payload       raw blob bytes, concatenated in header order

The header lists every blob (name, dtype string, shape) plus the model and
trainer configuration needed to rebuild the objects.  Writing the same state
twice yields byte-identical files: JSON keys are sorted, blob order follows
the state-dict iteration order, and no timestamps or paths are embedded
(np.savez zip members carry timestamps, which is why it is not used here).
"""

from __future__ import annotations

import dataclasses
import json
import struct
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

import numpy as np
import torch

from ..versions import CHECKPOINT_FORMAT_VERSION as CHECKPOINT_VERSION
from .discriminator import Discriminator, DiscriminatorConfig
from .generator import Generator, GeneratorConfig
from .training import TrainConfig, Trainer

MAGIC = b"GFCK"


class CheckpointError(ValueError):
    """Malformed or incompatible checkpoint file."""


@dataclasses.dataclass
class CheckpointBundle:
    generator: Generator
    discriminator: Optional[Discriminator]
    trainer: Optional[Trainer]
    extra: Dict[str, object]


def _config_to_json(cfg) -> Dict[str, object]:
    out = {}
    for field in dataclasses.fields(cfg):
        value = getattr(cfg, field.name)
        if isinstance(value, tuple):
            value = list(value)
        out[field.name] = value
    return out


def generator_config_from_dict(data: Dict[str, object]) -> GeneratorConfig:
    data = dict(data)
    for key in ("stage_widths", "stage_depths"):
        if key in data:
            data[key] = tuple(data[key])
    return GeneratorConfig(**data)


def discriminator_config_from_dict(data: Dict[str, object]) -> DiscriminatorConfig:
    return DiscriminatorConfig(**data)


def train_config_from_dict(data: Dict[str, object]) -> TrainConfig:
    return TrainConfig(**dict(data))


def _tensor_blob(tensor: torch.Tensor) -> np.ndarray:
    arr = tensor.detach().cpu().numpy()
    if arr.dtype.byteorder == ">":
        arr = arr.astype(arr.dtype.newbyteorder("<"))
    # ascontiguousarray promotes 0-dim to (1,); Adam's step counters are
    # 0-dim and must round-trip with their shape intact
    return np.ascontiguousarray(arr).reshape(arr.shape)


def _optimizer_blobs(prefix: str, opt: torch.optim.Optimizer,
                     blobs: Dict[str, np.ndarray]) -> None:
    for idx, state in opt.state_dict()["state"].items():
        for key, value in state.items():
            blobs[f"{prefix}/{idx}/{key}"] = _tensor_blob(
                value if isinstance(value, torch.Tensor)
                else torch.tensor(value))


def _restore_optimizer(prefix: str, opt: torch.optim.Optimizer,
                       blobs: Dict[str, np.ndarray]) -> None:
    state: Dict[int, Dict[str, torch.Tensor]] = {}
    marker = prefix + "/"
    for name, arr in blobs.items():
        if not name.startswith(marker):
            continue
        _, idx_str, key = name.split("/", 2)
        state.setdefault(int(idx_str), {})[key] = torch.as_tensor(arr)
    if not state:
        return
    base = opt.state_dict()
    base["state"] = state
    opt.load_state_dict(base)


def save_checkpoint(path: Union[str, Path], generator: Generator,
                    discriminator: Optional[Discriminator] = None,
                    trainer: Optional[Trainer] = None,
                    extra: Optional[Dict[str, object]] = None) -> None:
    """Write models (and, if a trainer is given, optimizer state) to path."""
    if trainer is not None:
        generator = trainer.generator
        discriminator = trainer.discriminator

    blobs: Dict[str, np.ndarray] = {}
    for key, value in generator.state_dict().items():
        blobs[f"generator/{key}"] = _tensor_blob(value)
    header: Dict[str, object] = {
        "generator_config": _config_to_json(generator.config),
        "discriminator_config": None,
        "train_config": None,
        "step_count": None,
        "seed": None,
        "extra": extra or {},
    }
    if discriminator is not None:
        for key, value in discriminator.state_dict().items():
            blobs[f"discriminator/{key}"] = _tensor_blob(value)
        header["discriminator_config"] = _config_to_json(discriminator.config)
    if trainer is not None:
        header["train_config"] = _config_to_json(trainer.config)
        header["step_count"] = trainer.step_count
        header["seed"] = trainer.seed
        _optimizer_blobs("opt_g", trainer.opt_g, blobs)
        _optimizer_blobs("opt_d", trainer.opt_d, blobs)

    header["blobs"] = [
        {"name": name, "dtype": arr.dtype.str, "shape": list(arr.shape)}
        for name, arr in blobs.items()
    ]
    header_bytes = json.dumps(header, sort_keys=True,
                              separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", CHECKPOINT_VERSION))
        fh.write(struct.pack("<Q", len(header_bytes)))
        fh.write(header_bytes)
        for name in blobs:
            fh.write(blobs[name].tobytes())


def _read_container(path: Union[str, Path]
                    ) -> Tuple[Dict[str, object], Dict[str, np.ndarray]]:
    raw = Path(path).read_bytes()
    if len(raw) < 16 or raw[:4] != MAGIC:
        raise CheckpointError(f"{path}: not a checkpoint file")
    version = struct.unpack("<I", raw[4:8])[0]
    if version != CHECKPOINT_VERSION:
        raise CheckpointError(f"{path}: unsupported checkpoint version "
                              f"{version}")
    header_len = struct.unpack("<Q", raw[8:16])[0]
    if 16 + header_len > len(raw):
        raise CheckpointError(f"{path}: truncated header")
    header = json.loads(raw[16:16 + header_len].decode("utf-8"))
    blobs: Dict[str, np.ndarray] = {}
    offset = 16 + header_len
    for spec in header["blobs"]:
        dtype = np.dtype(spec["dtype"])
        shape = tuple(spec["shape"])
        count = int(np.prod(shape, dtype=np.int64)) if shape else 1
        nbytes = count * dtype.itemsize
        if offset + nbytes > len(raw):
            raise CheckpointError(f"{path}: truncated blob {spec['name']}")
        blobs[spec["name"]] = np.frombuffer(
            raw, dtype=dtype, count=count, offset=offset).reshape(shape).copy()
        offset += nbytes
    return header, blobs


def _load_module_state(module: torch.nn.Module, prefix: str,
                       blobs: Dict[str, np.ndarray]) -> None:
    marker = prefix + "/"
    state = {}
    for name, arr in blobs.items():
        if name.startswith(marker):
            state[name[len(marker):]] = torch.as_tensor(arr)
    float_dtypes = {t.dtype for t in state.values() if t.is_floating_point()}
    if torch.float64 in float_dtypes:
        module.double()
    module.load_state_dict(state)


def load_checkpoint(path: Union[str, Path]) -> CheckpointBundle:
    """Rebuild models (and trainer, when present) from a checkpoint file."""
    header, blobs = _read_container(path)

    generator = Generator(generator_config_from_dict(header["generator_config"]))
    _load_module_state(generator, "generator", blobs)

    discriminator = None
    if header.get("discriminator_config") is not None:
        discriminator = Discriminator(
            discriminator_config_from_dict(header["discriminator_config"]))
        _load_module_state(discriminator, "discriminator", blobs)

    trainer = None
    if header.get("train_config") is not None:
        if discriminator is None:
            raise CheckpointError(f"{path}: trainer state without a "
                                  f"discriminator")
        trainer = Trainer(generator, discriminator,
                          train_config_from_dict(header["train_config"]),
                          seed=int(header.get("seed") or 0))
        trainer.step_count = int(header.get("step_count") or 0)
        _restore_optimizer("opt_g", trainer.opt_g, blobs)
        _restore_optimizer("opt_d", trainer.opt_d, blobs)

    return CheckpointBundle(generator=generator, discriminator=discriminator,
                            trainer=trainer, extra=header.get("extra", {}))
