"""Privacy-vs-resolution harness: how detectable are people in thermal frames?

Detection accuracy on person-present frames is the privacy proxy: the easier
people are to detect in a thermal image, the more that image can leak, so high
accuracy means a LOW privacy-protection degree and vice versa.  The harness
block-averages native-resolution thermal frames down to each requested
resolution, runs a detector, and emits a three-column report
(resolution, accuracy, degree).

The bundled baseline detector is a threshold + connected-components blob
finder that needs no training.  An external-command backend lets a real
person-detection model participate through a JSON subprocess contract.
"""

from __future__ import annotations

import csv
import json
import shutil
import subprocess
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy import ndimage

from ..data.preprocess import block_average
from ..errors import DetectorUnavailableError, DimensionError

# Reference measurements on the real sensor rig (width x height naming):
# detection accuracy collapses once a person spans less than one cell.
REFERENCE_ROWS: Tuple[Tuple[str, float, str], ...] = (
    ("160x120", 0.807, "Low"),
    ("16x12", 0.0, "High"),
    ("8x5", 0.0, "High"),
)

# Accuracy at or above this fraction marks privacy protection as "Low".
DEGREE_THRESHOLD = 0.5


@dataclass
class Detection:
    """One detected person: inclusive-exclusive box in (row, col) pixels."""

    y0: int
    x0: int
    y1: int
    x1: int
    confidence: float


class DetectorInterface:
    """Interface: find people in a single-channel thermal image (degrees C).

    Implementations must be deterministic for fixed parameters/weights and
    raise :class:`DetectorUnavailableError` when their backend cannot run.
    """

    name: str = "detector"

    def detect(self, thermal: np.ndarray) -> List[Detection]:
        raise NotImplementedError


class BlobDetector(DetectorInterface):
    """Threshold + connected-components baseline detector.

    A person reads several degrees warmer than ambient, so cells above
    ``threshold_c`` are foreground; 8-connected components with at least
    ``min_cells`` cells become detections.  Confidence is how far the blob's
    mean temperature sits above the threshold, scaled by ``span_c``.
    """

    name = "blob"

    def __init__(self, threshold_c: float = 28.0, min_cells: int = 1, span_c: float = 10.0):
        self.threshold_c = float(threshold_c)
        self.min_cells = int(min_cells)
        self.span_c = float(span_c)
        self._structure = np.ones((3, 3), dtype=bool)

    def detect(self, thermal: np.ndarray) -> List[Detection]:
        arr = np.asarray(thermal, dtype=np.float64)
        if arr.ndim == 3 and arr.shape[2] == 1:
            arr = arr[:, :, 0]
        if arr.ndim != 2:
            raise DimensionError(f"expected a (H, W) thermal image, got {arr.shape}")
        mask = arr > self.threshold_c
        labels, n_blobs = ndimage.label(mask, structure=self._structure)
        detections: List[Detection] = []
        for blob_id in range(1, n_blobs + 1):
            ys, xs = np.nonzero(labels == blob_id)
            if ys.size < self.min_cells:
                continue
            mean_t = float(arr[ys, xs].mean())
            conf = float(np.clip((mean_t - self.threshold_c) / self.span_c, 0.0, 1.0))
            detections.append(
                Detection(
                    y0=int(ys.min()),
                    x0=int(xs.min()),
                    y1=int(ys.max()) + 1,
                    x1=int(xs.max()) + 1,
                    confidence=conf,
                )
            )
        detections.sort(key=lambda d: (-d.confidence, d.y0, d.x0))
        return detections


class ExternalCommandDetector(DetectorInterface):
    """Adapter for an external person-detection command (e.g. a YOLO runner).

    The command receives ``{"height", "width", "values"}`` JSON on stdin and
    must print ``{"detections": [{"y0", "x0", "y1", "x1", "confidence"}]}``.
    Missing executables surface as :class:`DetectorUnavailableError`, which
    the harness converts into skipped report rows.
    """

    name = "external"

    def __init__(self, command: Sequence[str], timeout: float = 60.0):
        if not command:
            raise DetectorUnavailableError("empty detector command")
        self.command = list(command)
        self.timeout = timeout

    def detect(self, thermal: np.ndarray) -> List[Detection]:
        arr = np.asarray(thermal, dtype=np.float64)
        if arr.ndim == 3 and arr.shape[2] == 1:
            arr = arr[:, :, 0]
        if shutil.which(self.command[0]) is None:
            raise DetectorUnavailableError(
                f"detector command not found: {self.command[0]!r}"
            )
        payload = json.dumps(
            {
                "height": arr.shape[0],
                "width": arr.shape[1],
                "values": arr.tolist(),
            }
        )
        try:
            proc = subprocess.run(
                self.command,
                input=payload,
                capture_output=True,
                text=True,
                timeout=self.timeout,
                check=True,
            )
        except (subprocess.SubprocessError, OSError) as exc:
            raise DetectorUnavailableError(f"detector command failed: {exc}") from exc
        try:
            parsed = json.loads(proc.stdout)
            return [
                Detection(
                    y0=int(d["y0"]),
                    x0=int(d["x0"]),
                    y1=int(d["y1"]),
                    x1=int(d["x1"]),
                    confidence=float(d.get("confidence", 1.0)),
                )
                for d in parsed["detections"]
            ]
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise DetectorUnavailableError(
                f"detector command produced malformed output: {exc}"
            ) from exc


@dataclass
class PrivacyRow:
    """One report line: detection accuracy and privacy degree at a resolution."""

    resolution: str  # "WIDTHxHEIGHT", matching sensor-spec naming
    height: int
    width: int
    accuracy: Optional[float]  # None when the detector was unavailable
    degree: str  # "Low" | "High" | "skipped"
    n_frames: int = 0

    @property
    def accuracy_display(self) -> str:
        if self.accuracy is None:
            return "skipped"
        return f"{self.accuracy * 100.0:.1f}%"


@dataclass
class PrivacyReport:
    rows: List[PrivacyRow] = field(default_factory=list)
    detector_name: str = ""

    def save_csv(self, path: Path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["resolution", "accuracy", "degree"])
            for row in self.rows:
                writer.writerow([row.resolution, row.accuracy_display, row.degree])

    def to_dict(self) -> dict:
        return {
            "detector": self.detector_name,
            "rows": [
                {
                    "resolution": r.resolution,
                    "height": r.height,
                    "width": r.width,
                    "accuracy": r.accuracy,
                    "degree": r.degree,
                    "n_frames": r.n_frames,
                }
                for r in self.rows
            ],
            "reference": [
                {"resolution": res, "accuracy": acc, "degree": deg}
                for res, acc, deg in REFERENCE_ROWS
            ],
        }


def degree_for_accuracy(accuracy: float) -> str:
    """Privacy-protection degree implied by a detection accuracy."""
    return "Low" if accuracy >= DEGREE_THRESHOLD else "High"


def privacy_harness(
    thermal_frames: Sequence[np.ndarray],
    person_present: Sequence[bool],
    resolutions: Sequence[Tuple[int, int]],
    detector: DetectorInterface,
) -> PrivacyReport:
    """Measure detection accuracy at each (height, width) resolution.

    ``thermal_frames`` are native-resolution degree-Celsius images paired with
    ground-truth presence labels.  Each frame is block-averaged down to the
    requested resolution (which must divide the native shape evenly), and
    accuracy is the fraction of person-present frames on which the detector
    fires at least once.  An unavailable detector yields "skipped" rows
    instead of raising.
    """
    if len(thermal_frames) != len(person_present):
        raise DimensionError(
            f"{len(thermal_frames)} frames but {len(person_present)} presence labels"
        )
    present_indices = [i for i, p in enumerate(person_present) if p]
    if not present_indices:
        raise DimensionError("no person-present frames; accuracy is undefined")

    report = PrivacyReport(detector_name=detector.name)
    for height, width in resolutions:
        label = f"{width}x{height}"
        hits = 0
        skipped = False
        for i in present_indices:
            frame = np.asarray(thermal_frames[i], dtype=np.float64)
            if frame.ndim == 3 and frame.shape[2] == 1:
                frame = frame[:, :, 0]
            reduced = (
                frame
                if frame.shape == (height, width)
                else block_average(frame, (height, width))
            )
            try:
                detections = detector.detect(reduced)
            except DetectorUnavailableError:
                skipped = True
                break
            if detections:
                hits += 1
        if skipped:
            report.rows.append(
                PrivacyRow(
                    resolution=label,
                    height=height,
                    width=width,
                    accuracy=None,
                    degree="skipped",
                    n_frames=len(present_indices),
                )
            )
            continue
        accuracy = hits / len(present_indices)
        report.rows.append(
            PrivacyRow(
                resolution=label,
                height=height,
                width=width,
                accuracy=accuracy,
                degree=degree_for_accuracy(accuracy),
                n_frames=len(present_indices),
            )
        )
    return report
