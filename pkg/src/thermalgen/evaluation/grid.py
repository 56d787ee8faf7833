"""Disentanglement grids and centroid probes.

A grid crosses k appearance codes with n heatmaps: cell (i, j) is the
generator output for code i under heatmap j.  Rows should share appearance and
background (the code), columns should share pose and position (the heatmap).
The centroid probes quantify this: the silhouette centroid of a generated
image should track the heatmap's hot-spot centroid, while background color
should track the code.
"""

from __future__ import annotations

from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import numpy as np
from PIL import Image

from ..config import RGB_TO_HEATMAP_SCALE
from ..errors import DimensionError

_BORDER = 2
_HEADER_GAP = 4
_BG_GRAY = 0.25


def _to_uint8(image: np.ndarray) -> np.ndarray:
    """Map a [-1, 1] float image to uint8 [0, 255]."""
    arr = np.clip((np.asarray(image, dtype=np.float32) + 1.0) / 2.0, 0.0, 1.0)
    return (arr * 255.0 + 0.5).astype(np.uint8)


def render_heatmap(heatmap: np.ndarray, scale: int = RGB_TO_HEATMAP_SCALE) -> np.ndarray:
    """Upsample a (H, W, 1) heatmap in [-1, 1] to an RGB visualization.

    Nearest-neighbor upsampling by ``scale`` so each sensor cell stays a crisp
    block; rendered as a warm monochrome ramp.
    """
    arr = np.asarray(heatmap, dtype=np.float32)
    if arr.ndim == 3 and arr.shape[2] == 1:
        arr = arr[:, :, 0]
    if arr.ndim != 2:
        raise DimensionError(f"expected (H, W) or (H, W, 1) heatmap, got {arr.shape}")
    unit = np.clip((arr + 1.0) / 2.0, 0.0, 1.0)
    big = np.kron(unit, np.ones((scale, scale), dtype=np.float32))
    rgb = np.stack([big, big * 0.55 + 0.08, big * 0.25], axis=-1)
    return np.clip(rgb * 2.0 - 1.0, -1.0, 1.0).astype(np.float32)


def disentanglement_grid(
    generator,
    codes: Sequence[np.ndarray],
    heatmaps: Sequence[np.ndarray],
    header_images: Optional[Sequence[np.ndarray]] = None,
    out_path: Optional[Path] = None,
) -> np.ndarray:
    """Compose a (k+1) x (n+1) image grid of generator outputs.

    Row 0 holds the rendered heatmap headers, column 0 the per-code reference
    photos (``header_images``, optional).  Cell (i, j) of the interior is the
    generator run on (codes[i], heatmaps[j]) — each cell is produced by its
    own isolated forward call, so any cell is bit-identical to calling the
    generator directly with that pair.

    Returns the composited uint8 RGB canvas; also writes a PNG when
    ``out_path`` is given.
    """
    if len(codes) < 1 or len(heatmaps) < 1:
        raise DimensionError("need at least one code and one heatmap")
    if header_images is not None and len(header_images) != len(codes):
        raise DimensionError(
            f"got {len(header_images)} header images for {len(codes)} codes"
        )

    cells: List[List[np.ndarray]] = []
    for code in codes:
        row = [generator.synthesize(code, heatmap) for heatmap in heatmaps]
        cells.append(row)

    cell_h, cell_w = cells[0][0].shape[:2]
    k, n = len(codes), len(heatmaps)
    canvas_h = _HEADER_GAP + (k + 1) * (cell_h + _BORDER) + _BORDER
    canvas_w = _HEADER_GAP + (n + 1) * (cell_w + _BORDER) + _BORDER
    canvas = np.full((canvas_h, canvas_w, 3), int(_BG_GRAY * 255), dtype=np.uint8)

    def paste(row_idx: int, col_idx: int, image_u8: np.ndarray) -> None:
        y = _BORDER + row_idx * (cell_h + _BORDER)
        x = _BORDER + col_idx * (cell_w + _BORDER)
        if row_idx > 0:
            y += _HEADER_GAP
        if col_idx > 0:
            x += _HEADER_GAP
        canvas[y : y + cell_h, x : x + cell_w] = image_u8

    for j, heatmap in enumerate(heatmaps):
        rendered = render_heatmap(heatmap)
        if rendered.shape[:2] != (cell_h, cell_w):
            rendered = np.asarray(
                Image.fromarray(_to_uint8(rendered)).resize(
                    (cell_w, cell_h), Image.NEAREST
                ),
                dtype=np.uint8,
            )
            paste(0, j + 1, rendered)
        else:
            paste(0, j + 1, _to_uint8(rendered))
    if header_images is not None:
        for i, ref in enumerate(header_images):
            paste(i + 1, 0, _to_uint8(ref))
    for i in range(k):
        for j in range(n):
            paste(i + 1, j + 1, _to_uint8(cells[i][j]))

    if out_path is not None:
        out_path = Path(out_path)
        out_path.parent.mkdir(parents=True, exist_ok=True)
        Image.fromarray(canvas).save(out_path, format="PNG")
    return canvas


def heatmap_centroid(heatmap: np.ndarray) -> Tuple[float, float]:
    """Hot-spot centroid of a heatmap in normalized (y, x) in [0, 1]^2.

    Weights are the values above the median, which suppresses ambient
    background and sensor noise; a flat heatmap falls back to the geometric
    center.
    """
    arr = np.asarray(heatmap, dtype=np.float64)
    if arr.ndim == 3 and arr.shape[2] == 1:
        arr = arr[:, :, 0]
    if arr.ndim != 2:
        raise DimensionError(f"expected (H, W) or (H, W, 1) heatmap, got {arr.shape}")
    weights = np.clip(arr - np.median(arr), 0.0, None)
    return _weighted_centroid(weights)


def silhouette_centroid(image: np.ndarray) -> Tuple[float, float]:
    """Foreground centroid of an RGB image in normalized (y, x) in [0, 1]^2.

    Foreground weight per pixel is the total absolute deviation from the
    per-channel median color, so a person against a near-uniform background
    dominates the centroid regardless of the specific colors involved.
    """
    arr = np.asarray(image, dtype=np.float64)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise DimensionError(f"expected an (H, W, 3) image, got {arr.shape}")
    median = np.median(arr.reshape(-1, 3), axis=0)
    weights = np.abs(arr - median).sum(axis=2)
    cutoff = np.percentile(weights, 75)
    weights = np.clip(weights - cutoff, 0.0, None)
    return _weighted_centroid(weights)


def _weighted_centroid(weights: np.ndarray) -> Tuple[float, float]:
    h, w = weights.shape
    total = weights.sum()
    if total <= 0.0:
        return 0.5, 0.5
    ys, xs = np.mgrid[0:h, 0:w]
    cy = float((ys * weights).sum() / total)
    cx = float((xs * weights).sum() / total)
    return (cy + 0.5) / h, (cx + 0.5) / w


def centroid_agreement(
    generator,
    code: np.ndarray,
    heatmap_pairs: Sequence[Tuple[np.ndarray, np.ndarray]],
) -> List[bool]:
    """Check, per heatmap pair, whether image motion follows heatmap motion.

    For each (heatmap_a, heatmap_b) pair the silhouette centroid displacement
    of the generated images is compared with the hot-spot centroid
    displacement of the heatmaps; agreement means a positive dot product
    (movement in the same half-plane).
    """
    results = []
    for heat_a, heat_b in heatmap_pairs:
        img_a = generator.synthesize(code, heat_a)
        img_b = generator.synthesize(code, heat_b)
        d_img = np.subtract(silhouette_centroid(img_b), silhouette_centroid(img_a))
        d_heat = np.subtract(heatmap_centroid(heat_b), heatmap_centroid(heat_a))
        results.append(bool(np.dot(d_img, d_heat) > 0.0))
    return results


def background_variation(
    generator,
    codes: Sequence[np.ndarray],
    heatmaps: Sequence[np.ndarray],
    margin: int = 4,
) -> Tuple[float, float]:
    """Compare background variability across heatmaps vs across codes.

    Background is proxied by the image corners (a ``margin``-pixel frame is
    too aggressive at desk resolutions, so the four margin x margin corner
    patches are used).  Returns (std across heatmaps at fixed code, std
    across codes at fixed heatmap): a disentangled model keeps the first low —
    background belongs to the code — while the second stays comparatively
    high.
    """

    def corner_color(image: np.ndarray) -> np.ndarray:
        m = margin
        corners = np.concatenate(
            [
                image[:m, :m].reshape(-1, 3),
                image[:m, -m:].reshape(-1, 3),
                image[-m:, :m].reshape(-1, 3),
                image[-m:, -m:].reshape(-1, 3),
            ]
        )
        return corners.mean(axis=0)

    across_heatmaps = []
    for code in codes:
        colors = np.stack(
            [corner_color(generator.synthesize(code, h)) for h in heatmaps]
        )
        across_heatmaps.append(colors.std(axis=0).mean())

    across_codes = []
    for heatmap in heatmaps:
        colors = np.stack(
            [corner_color(generator.synthesize(c, heatmap)) for c in codes]
        )
        across_codes.append(colors.std(axis=0).mean())

    return float(np.mean(across_heatmaps)), float(np.mean(across_codes))
