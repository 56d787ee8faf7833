from .dataset import Batch, PairedDataset, PairedSample, load_sample, train_test_split
from .io import DatasetManifest, ManifestEntry, read_f32, write_f32
from .preprocess import (
    block_average,
    denormalize_from_unit,
    gaussian_blur,
    normalize_to_unit,
    preprocess_rgb,
    preprocess_thermal,
    resize_mask,
)
from .synthetic import SynthOptions, generate_synthetic_dataset

__all__ = [
    "Batch",
    "DatasetManifest",
    "ManifestEntry",
    "PairedDataset",
    "PairedSample",
    "SynthOptions",
    "block_average",
    "denormalize_from_unit",
    "gaussian_blur",
    "generate_synthetic_dataset",
    "load_sample",
    "normalize_to_unit",
    "preprocess_rgb",
    "preprocess_thermal",
    "read_f32",
    "resize_mask",
    "train_test_split",
    "write_f32",
]
