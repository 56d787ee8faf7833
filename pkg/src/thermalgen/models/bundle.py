"""Single-file model container: JSON header plus named float32 tensor blobs.

Layout: 8-byte magic ``TGBUNDL1``, little-endian uint32 header length, UTF-8
JSON header, then the raw little-endian float32 tensor data concatenated in
sorted-name order. The header carries the architecture config, a format
version, tensor shapes/offsets and free-form metadata, so a save -> load ->
save round trip is byte-identical and a bundle is self-describing.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Optional

import numpy as np
import torch

from ..config import ModelConfig
from ..errors import BundleError
from .networks import Discriminator, Generator, InversionEncoder

MAGIC = b"TGBUNDL1"
BUNDLE_VERSION = 1

# Tensor name prefixes for the stored parameter groups.
GROUP_G = "g"
GROUP_D = "d"
GROUP_I = "i"
GROUP_G_EMA = "g_ema"
GROUP_I_EMA = "i_ema"


@dataclass
class ModelBundle:
    """Named float32 tensors plus the architecture config that shaped them."""

    model_config: ModelConfig
    tensors: Dict[str, np.ndarray] = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    # -- tensor group helpers -------------------------------------------------

    def put_state_dict(self, prefix: str, state: Dict[str, torch.Tensor]) -> None:
        for name, tensor in state.items():
            self.tensors[f"{prefix}/{name}"] = (
                tensor.detach().cpu().numpy().astype(np.float32)
            )

    def get_state_dict(self, prefix: str) -> Dict[str, torch.Tensor]:
        head = prefix + "/"
        state = {
            name[len(head):]: torch.from_numpy(arr.copy())
            for name, arr in self.tensors.items()
            if name.startswith(head)
        }
        if not state:
            raise BundleError(f"bundle has no tensor group {prefix!r}")
        return state

    def has_group(self, prefix: str) -> bool:
        head = prefix + "/"
        return any(name.startswith(head) for name in self.tensors)

    def load_into(self, prefix: str, module: torch.nn.Module) -> None:
        state = self.get_state_dict(prefix)
        try:
            module.load_state_dict(state, strict=True)
        except RuntimeError as exc:
            raise BundleError(f"tensor group {prefix!r} does not fit the module: {exc}")

    # -- network reconstruction ----------------------------------------------

    def build_generator(self, ema: bool = True) -> Generator:
        net = Generator(self.model_config)
        group = GROUP_G_EMA if ema and self.has_group(GROUP_G_EMA) else GROUP_G
        self.load_into(group, net)
        net.eval()
        return net

    def build_discriminator(self) -> Discriminator:
        net = Discriminator(self.model_config)
        self.load_into(GROUP_D, net)
        return net

    def build_inversion(self, ema: bool = True) -> InversionEncoder:
        net = InversionEncoder(self.model_config)
        group = GROUP_I_EMA if ema and self.has_group(GROUP_I_EMA) else GROUP_I
        self.load_into(group, net)
        net.eval()
        return net


def save_bundle(path, bundle: ModelBundle) -> None:
    names = sorted(bundle.tensors)
    blobs = []
    offset = 0
    tensor_index = []
    for name in names:
        arr = np.ascontiguousarray(bundle.tensors[name], dtype="<f4")
        raw = arr.tobytes()
        tensor_index.append(
            {"name": name, "shape": list(arr.shape), "offset": offset, "nbytes": len(raw)}
        )
        blobs.append(raw)
        offset += len(raw)
    header = {
        "format_version": BUNDLE_VERSION,
        "model_config": bundle.model_config.to_dict(),
        "tensors": tensor_index,
        "meta": bundle.meta,
    }
    header_bytes = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", len(header_bytes)))
        fh.write(header_bytes)
        for raw in blobs:
            fh.write(raw)


def load_bundle(path, expect_model_config: Optional[ModelConfig] = None) -> ModelBundle:
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise BundleError(f"cannot read bundle {path}: {exc}")
    if len(data) < len(MAGIC) + 4 or data[: len(MAGIC)] != MAGIC:
        raise BundleError(f"{path} is not a model bundle (bad magic)")
    (header_len,) = struct.unpack_from("<I", data, len(MAGIC))
    header_start = len(MAGIC) + 4
    try:
        header = json.loads(data[header_start : header_start + header_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise BundleError(f"bundle header of {path} is corrupt: {exc}")
    if header.get("format_version") != BUNDLE_VERSION:
        raise BundleError(
            f"unsupported bundle format_version {header.get('format_version')!r}"
        )
    model_config = ModelConfig.from_dict(header["model_config"])
    if expect_model_config is not None and model_config != expect_model_config:
        raise BundleError(
            "bundle architecture config does not match the expected config: "
            f"bundle={model_config.to_dict()} expected={expect_model_config.to_dict()}"
        )
    blob_start = header_start + header_len
    tensors = {}
    for item in header["tensors"]:
        start = blob_start + item["offset"]
        end = start + item["nbytes"]
        if end > len(data):
            raise BundleError(f"bundle {path} truncated at tensor {item['name']!r}")
        arr = np.frombuffer(data[start:end], dtype="<f4").reshape(item["shape"]).copy()
        tensors[item["name"]] = arr
    return ModelBundle(model_config=model_config, tensors=tensors, meta=header["meta"])
