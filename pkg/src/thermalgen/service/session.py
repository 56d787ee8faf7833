"""Synthesis session: one loop turning thermal frames into an encoded stream.

A session owns the EMA generator exclusively.  Control handlers (code
selection, stats, subscription management) run on other threads and touch
shared state only under short-lived locks, so they never stall the loop for
more than a frame interval.  Appearance codes swap atomically at frame
boundaries: every emitted frame is attributable to exactly one code via its
header.

Subscribers get latest-value delivery — a one-slot mailbox where a new frame
displaces an unconsumed older one — because a live feed must prioritize
freshness over completeness.
"""

from __future__ import annotations

import queue
import threading
import time
from collections import deque
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Iterator, List, Optional

import numpy as np

from ..config import ServiceConfig
from ..data.dataset import load_raw_thermal
from ..data.io import DatasetManifest, sample_noise_seed
from ..data.preprocess import preprocess_thermal
from ..errors import ServiceError
from ..models.bundle import ModelBundle
from ..training.latents import LatentCodeSet
from .protocol import FrameHeader, encode_image, pack_frame

_TS_MASK = 2**32 - 1
_FPS_WINDOW = 32


class FrameSource:
    """Interface: an iterator of preprocessed (H, W, 1) heatmaps in [-1, 1]."""

    def frames(self) -> Iterator[np.ndarray]:
        raise NotImplementedError

    def reference_heatmap(self) -> Optional[np.ndarray]:
        """A representative heatmap for thumbnails; None if unknown."""
        return None


class ReplaySource(FrameSource):
    """Replays the thermal channel of a recorded dataset in manifest order.

    Preprocessing matches the dataset loader bit-for-bit (same per-sample
    noise seeds), so a replayed frame equals the heatmap a trainer would see
    for that sample.  With ``loop`` the sequence repeats indefinitely.
    """

    def __init__(self, manifest_root: Path, loop: bool = False):
        self.manifest = DatasetManifest.load(manifest_root)
        self.loop = loop
        cfg = self.manifest.config
        self.heatmaps: List[np.ndarray] = []
        for entry in self.manifest.entries:
            raw = load_raw_thermal(self.manifest, entry)
            rng = np.random.default_rng(sample_noise_seed(cfg.noise_seed, entry.sample_id))
            self.heatmaps.append(
                preprocess_thermal(
                    raw,
                    blur_kernel=cfg.blur_kernel,
                    noise_sigma=cfg.noise_sigma,
                    target_hw=(cfg.heatmap_height, cfg.heatmap_width),
                    norm_range=(cfg.temp_min, cfg.temp_max),
                    rng=rng,
                )
            )
        if not self.heatmaps:
            raise ServiceError("replay manifest has no frames")

    def __len__(self) -> int:
        return len(self.heatmaps)

    def frames(self) -> Iterator[np.ndarray]:
        while True:
            yield from self.heatmaps
            if not self.loop:
                return

    def reference_heatmap(self) -> Optional[np.ndarray]:
        return self.heatmaps[0]


class LiveSource(FrameSource):
    """Stub for a physical sensor: a driver callback pushes raw frames in.

    Raw degree-Celsius frames are preprocessed like dataset frames but with
    additive noise disabled — real sensor data carries its own noise.  A
    bounded buffer drops the oldest pending frame under backpressure.
    """

    def __init__(self, data_config, max_pending: int = 4):
        self.data_config = data_config
        self._queue: "queue.Queue" = queue.Queue(maxsize=max_pending)
        self._closed = threading.Event()

    def push(self, raw_thermal: np.ndarray) -> None:
        if self._closed.is_set():
            raise ServiceError("live source is closed")
        cfg = self.data_config
        heatmap = preprocess_thermal(
            np.asarray(raw_thermal, dtype=np.float32),
            blur_kernel=cfg.blur_kernel,
            noise_sigma=0.0,
            target_hw=(cfg.heatmap_height, cfg.heatmap_width),
            norm_range=(cfg.temp_min, cfg.temp_max),
            rng=np.random.default_rng(0),
        )
        while True:
            try:
                self._queue.put_nowait(heatmap)
                return
            except queue.Full:
                try:
                    self._queue.get_nowait()
                except queue.Empty:
                    pass

    def close(self) -> None:
        self._closed.set()

    def frames(self) -> Iterator[np.ndarray]:
        while True:
            try:
                yield self._queue.get(timeout=0.1)
            except queue.Empty:
                if self._closed.is_set():
                    return


@dataclass(frozen=True)
class Frame:
    """One synthesized, encoded frame plus its header fields."""

    seq: int
    code_id: str
    code_index: int
    ts_ms: int
    payload: bytes

    def message(self) -> bytes:
        return pack_frame(
            FrameHeader(seq=self.seq, code_index=self.code_index, ts_ms=self.ts_ms),
            self.payload,
        )


class Subscriber:
    """Latest-value mailbox: holds at most one frame, newest wins."""

    def __init__(self) -> None:
        self._slot: "queue.Queue" = queue.Queue(maxsize=1)

    def offer(self, frame: Optional[Frame]) -> None:
        while True:
            try:
                self._slot.put_nowait(frame)
                return
            except queue.Full:
                try:
                    self._slot.get_nowait()
                except queue.Empty:
                    pass

    def next(self, timeout: Optional[float] = None) -> Optional[Frame]:
        """Block for the next frame; None signals end of stream."""
        try:
            return self._slot.get(timeout=timeout)
        except queue.Empty:
            raise TimeoutError("no frame within timeout") from None


class SynthesisSession:
    """Drives the generator over a frame source and fans frames out."""

    def __init__(
        self,
        bundle: ModelBundle,
        latent_set: LatentCodeSet,
        source: FrameSource,
        config: ServiceConfig,
    ):
        if len(latent_set) == 0:
            raise ServiceError("latent code set is empty")
        self.generator = bundle.build_generator(ema=True)
        if latent_set.latent_dim != self.generator.config.latent_dim:
            raise ServiceError(
                f"latent set dim {latent_set.latent_dim} != model dim "
                f"{self.generator.config.latent_dim}"
            )
        self.latent_set = latent_set
        self.source = source
        self.config = config

        self._lock = threading.Lock()
        self._active_index = 0
        self._pending_index: Optional[int] = None
        self._subscribers: List[Subscriber] = []
        self._frames_out = 0
        self._last_seq = -1
        self._last_latency_ms = 0.0
        self._emit_times: deque = deque(maxlen=_FPS_WINDOW)
        self._stop = threading.Event()
        self._finished = threading.Event()
        self._thread: Optional[threading.Thread] = None
        self._thumbnails: Dict[str, bytes] = {}

    # -- control surface ---------------------------------------------------

    def select_code(self, code_id: str) -> dict:
        """Request a code switch; takes effect at the next frame boundary."""
        try:
            index = self.latent_set.index_of(code_id)
        except KeyError:
            raise ServiceError(f"unknown code_id: {code_id!r}") from None
        with self._lock:
            self._pending_index = index
            as_of = self._last_seq
        return {"ok": True, "code_id": code_id, "code_index": index, "as_of_seq": as_of}

    def active_code_id(self) -> str:
        with self._lock:
            index = (
                self._pending_index
                if self._pending_index is not None
                else self._active_index
            )
        return self.latent_set.codes[index].code_id

    def codes_listing(self) -> dict:
        return {
            "codes": [
                {"code_id": c.code_id, "index": i, "meta": c.meta}
                for i, c in enumerate(self.latent_set.codes)
            ],
            "active": self.active_code_id(),
        }

    def stats(self) -> dict:
        with self._lock:
            times = list(self._emit_times)
            stats = {
                "frames_out": self._frames_out,
                "last_seq": self._last_seq,
                "current_fps": 0.0,
                "last_latency_ms": self._last_latency_ms,
                "active_code_id": self.latent_set.codes[self._active_index].code_id,
                "subscribers": len(self._subscribers),
                "running": self._thread is not None and self._thread.is_alive(),
                "finished": self._finished.is_set(),
                "target_fps": self.config.fps,
                "encoding": self.config.encode,
            }
        if len(times) >= 2:
            span = times[-1] - times[0]
            if span > 0:
                stats["current_fps"] = (len(times) - 1) / span
        return stats

    def subscribe(self) -> Subscriber:
        sub = Subscriber()
        with self._lock:
            self._subscribers.append(sub)
        if self._finished.is_set():
            sub.offer(None)
        return sub

    def unsubscribe(self, sub: Subscriber) -> None:
        with self._lock:
            if sub in self._subscribers:
                self._subscribers.remove(sub)

    def thumbnail_png(self, code_id: str) -> bytes:
        """A small PNG preview of a code applied to a reference heatmap."""
        with self._lock:
            cached = self._thumbnails.get(code_id)
        if cached is not None:
            return cached
        code = self.latent_set.by_id(code_id)  # KeyError for unknown ids
        heatmap = self.source.reference_heatmap()
        if heatmap is None:
            cfg = self.generator.config
            heatmap = np.full(
                (cfg.heatmap_height, cfg.heatmap_width, 1), -0.6, dtype=np.float32
            )
        image = self.generator.synthesize(code.values, heatmap)
        payload = encode_image(image, "png")
        with self._lock:
            self._thumbnails[code_id] = payload
        return payload

    # -- lifecycle ---------------------------------------------------------

    def start(self) -> "SynthesisSession":
        if self._thread is not None:
            raise ServiceError("session already started")
        self._thread = threading.Thread(target=self._run, name="synthesis", daemon=True)
        self._thread.start()
        return self

    def stop(self, timeout: float = 10.0) -> None:
        self._stop.set()
        if self._thread is not None:
            self._thread.join(timeout=timeout)

    def join(self, timeout: Optional[float] = None) -> bool:
        """Wait for the source to run dry; True if the session finished."""
        return self._finished.wait(timeout=timeout)

    # -- synthesis loop ----------------------------------------------------

    def _run(self) -> None:
        fps = self.config.fps
        interval = 1.0 / fps if fps > 0 else 0.0
        start = time.perf_counter()
        seq = 0
        try:
            for heatmap in self.source.frames():
                if self._stop.is_set():
                    break
                with self._lock:
                    if self._pending_index is not None:
                        self._active_index = self._pending_index
                        self._pending_index = None
                    index = self._active_index
                code = self.latent_set.codes[index]

                t0 = time.perf_counter()
                image = self.generator.synthesize(code.values, heatmap)
                payload = encode_image(image, self.config.encode)
                latency_ms = (time.perf_counter() - t0) * 1000.0

                frame = Frame(
                    seq=seq,
                    code_id=code.code_id,
                    code_index=index,
                    ts_ms=int((time.perf_counter() - start) * 1000.0) & _TS_MASK,
                    payload=payload,
                )
                with self._lock:
                    subscribers = list(self._subscribers)
                    self._frames_out += 1
                    self._last_seq = seq
                    self._last_latency_ms = latency_ms
                    self._emit_times.append(time.perf_counter())
                for sub in subscribers:
                    sub.offer(frame)
                seq += 1

                if interval > 0.0:
                    next_deadline = start + seq * interval
                    delay = next_deadline - time.perf_counter()
                    if delay > 0:
                        if self._stop.wait(timeout=delay):
                            break
        finally:
            self._finished.set()
            with self._lock:
                subscribers = list(self._subscribers)
            for sub in subscribers:
                sub.offer(None)
