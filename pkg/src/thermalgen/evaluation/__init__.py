"""Evaluation: distribution distance, disentanglement grids, privacy, speed."""

from .bench import BenchReport, BenchRow, throughput_bench
from .features import FeatureExtractor, InceptionFeatures, RandomConvFeatures, make_extractor
from .fid import GaussianStats, dataset_fid, fid
from .grid import (
    background_variation,
    centroid_agreement,
    disentanglement_grid,
    heatmap_centroid,
    render_heatmap,
    silhouette_centroid,
)
from .privacy import (
    BlobDetector,
    Detection,
    DetectorInterface,
    ExternalCommandDetector,
    PrivacyReport,
    PrivacyRow,
    degree_for_accuracy,
    privacy_harness,
)

__all__ = [
    "BenchReport",
    "BenchRow",
    "throughput_bench",
    "FeatureExtractor",
    "InceptionFeatures",
    "RandomConvFeatures",
    "make_extractor",
    "GaussianStats",
    "dataset_fid",
    "fid",
    "background_variation",
    "centroid_agreement",
    "disentanglement_grid",
    "heatmap_centroid",
    "render_heatmap",
    "silhouette_centroid",
    "BlobDetector",
    "Detection",
    "DetectorInterface",
    "ExternalCommandDetector",
    "PrivacyReport",
    "PrivacyRow",
    "degree_for_accuracy",
    "privacy_harness",
]
