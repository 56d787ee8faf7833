"""Binary wire format for streamed video frames.

Each WebSocket binary message is a fixed 16-byte little-endian header followed
by the encoded image payload:

    offset  size  field       meaning
    0       8     seq         strictly increasing frame number (u64)
    8       4     code_index  index of the appearance code in GET /codes (u32)
    12      4     ts_ms       session-relative timestamp in ms (u32)

The index (not the string id) travels on the wire to keep the header fixed
size; clients resolve it against the code list fetched over HTTP.
"""

from __future__ import annotations

import io
import struct
from dataclasses import dataclass

import numpy as np
from PIL import Image

from ..errors import ConfigError, ServiceError

HEADER_FORMAT = "<QII"
HEADER_SIZE = struct.calcsize(HEADER_FORMAT)  # 16 bytes

_U32_MAX = 2**32 - 1
ENCODINGS = ("png", "jpeg")


@dataclass(frozen=True)
class FrameHeader:
    seq: int
    code_index: int
    ts_ms: int

    def __post_init__(self) -> None:
        if self.seq < 0 or self.seq > 2**64 - 1:
            raise ServiceError(f"seq {self.seq} out of u64 range")
        if not (0 <= self.code_index <= _U32_MAX):
            raise ServiceError(f"code_index {self.code_index} out of u32 range")
        if not (0 <= self.ts_ms <= _U32_MAX):
            raise ServiceError(f"ts_ms {self.ts_ms} out of u32 range")


def pack_header(header: FrameHeader) -> bytes:
    return struct.pack(HEADER_FORMAT, header.seq, header.code_index, header.ts_ms)


def unpack_header(data: bytes) -> FrameHeader:
    if len(data) < HEADER_SIZE:
        raise ServiceError(f"frame message too short: {len(data)} < {HEADER_SIZE} bytes")
    seq, code_index, ts_ms = struct.unpack_from(HEADER_FORMAT, data)
    return FrameHeader(seq=seq, code_index=code_index, ts_ms=ts_ms)


def pack_frame(header: FrameHeader, payload: bytes) -> bytes:
    return pack_header(header) + payload


def unpack_frame(data: bytes) -> tuple:
    """Split a binary message into (FrameHeader, payload bytes)."""
    return unpack_header(data), data[HEADER_SIZE:]


def encode_image(image: np.ndarray, encoding: str = "png", quality: int = 90) -> bytes:
    """Encode a [-1, 1] float RGB image to PNG (lossless) or JPEG bytes."""
    if encoding not in ENCODINGS:
        raise ConfigError(f"unknown frame encoding: {encoding!r}")
    arr = np.clip((np.asarray(image, dtype=np.float32) + 1.0) / 2.0, 0.0, 1.0)
    u8 = (arr * 255.0 + 0.5).astype(np.uint8)
    buf = io.BytesIO()
    if encoding == "png":
        Image.fromarray(u8).save(buf, format="PNG")
    else:
        Image.fromarray(u8).save(buf, format="JPEG", quality=quality)
    return buf.getvalue()


def decode_image(payload: bytes) -> np.ndarray:
    """Decode frame payload bytes back to a uint8 (H, W, 3) array."""
    with Image.open(io.BytesIO(payload)) as img:
        return np.asarray(img.convert("RGB"), dtype=np.uint8)
