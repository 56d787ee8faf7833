"""Streaming conference service: synthesis loop, wire protocol, web app."""

from .app import build_app, build_replay_session, run_service
from .protocol import (
    ENCODINGS,
    HEADER_SIZE,
    FrameHeader,
    decode_image,
    encode_image,
    pack_frame,
    pack_header,
    unpack_frame,
    unpack_header,
)
from .session import (
    Frame,
    FrameSource,
    LiveSource,
    ReplaySource,
    Subscriber,
    SynthesisSession,
)

__all__ = [
    "build_app",
    "build_replay_session",
    "run_service",
    "ENCODINGS",
    "HEADER_SIZE",
    "FrameHeader",
    "decode_image",
    "encode_image",
    "pack_frame",
    "pack_header",
    "unpack_frame",
    "unpack_header",
    "Frame",
    "FrameSource",
    "LiveSource",
    "ReplaySource",
    "Subscriber",
    "SynthesisSession",
]
