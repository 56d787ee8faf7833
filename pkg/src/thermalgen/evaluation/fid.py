"""Fréchet distance between Gaussian fits of feature distributions.

The score between two feature sets with statistics (mu1, cov1), (mu2, cov2) is

    ||mu1 - mu2||^2 + Tr(cov1 + cov2 - 2 (cov1 cov2)^{1/2})

The matrix square root of the (generally non-symmetric) product cov1·cov2 is
computed through the symmetrized product cov2^{1/2} cov1 cov2^{1/2}, whose
eigendecomposition is numerically stable for positive semidefinite inputs.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from ..errors import DimensionError, NumericalError
from .features import FeatureExtractor

# Eigenvalues above this (negative) floor are treated as rounding noise and
# clamped to zero; anything more negative means the input was not PSD.
_EIG_CLAMP = -1e-6


@dataclass
class GaussianStats:
    """Mean and covariance of a feature distribution."""

    mu: np.ndarray
    cov: np.ndarray

    def __post_init__(self) -> None:
        self.mu = np.asarray(self.mu, dtype=np.float64).reshape(-1)
        self.cov = np.asarray(self.cov, dtype=np.float64)
        d = self.mu.shape[0]
        if self.cov.shape != (d, d):
            raise DimensionError(
                f"covariance shape {self.cov.shape} does not match mean dim {d}"
            )
        asym = np.abs(self.cov - self.cov.T).max() if d else 0.0
        if asym > 1e-8:
            raise NumericalError(f"covariance is not symmetric (max asymmetry {asym:g})")
        # remove the sub-1e-8 asymmetry entirely
        self.cov = (self.cov + self.cov.T) / 2.0

    @property
    def dim(self) -> int:
        return self.mu.shape[0]

    @classmethod
    def from_features(cls, features: np.ndarray) -> "GaussianStats":
        feats = np.asarray(features, dtype=np.float64)
        if feats.ndim != 2 or feats.shape[0] < 1:
            raise DimensionError(
                f"expected a nonempty (N, d) feature matrix, got shape {feats.shape}"
            )
        n, d = feats.shape
        if n <= d:
            warnings.warn(
                f"covariance of {n} samples in {d} dims is rank-deficient; "
                "the score is still defined but noisier",
                RuntimeWarning,
                stacklevel=2,
            )
        mu = feats.mean(axis=0)
        centered = feats - mu
        denom = max(n - 1, 1)
        cov = centered.T @ centered / denom
        return cls(mu=mu, cov=cov)


def _psd_sqrt(mat: np.ndarray, what: str) -> np.ndarray:
    """Symmetric PSD square root via eigendecomposition."""
    try:
        eigvals, eigvecs = np.linalg.eigh(mat)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"eigendecomposition failed for {what}") from exc
    if eigvals.min(initial=0.0) < _EIG_CLAMP:
        raise NumericalError(
            f"{what} has significantly negative eigenvalue {eigvals.min():g}"
        )
    eigvals = np.clip(eigvals, 0.0, None)
    return (eigvecs * np.sqrt(eigvals)) @ eigvecs.T


def fid(stats1: GaussianStats, stats2: GaussianStats) -> float:
    """Fréchet distance between two Gaussian fits (lower is closer)."""
    if stats1.dim != stats2.dim:
        raise DimensionError(
            f"dimension mismatch: {stats1.dim} vs {stats2.dim}"
        )
    diff = stats1.mu - stats2.mu
    sqrt2 = _psd_sqrt(stats2.cov, "covariance 2")
    inner = sqrt2 @ stats1.cov @ sqrt2
    inner = (inner + inner.T) / 2.0
    try:
        eigvals = np.linalg.eigvalsh(inner)
    except np.linalg.LinAlgError as exc:
        raise NumericalError("eigendecomposition failed for product term") from exc
    if eigvals.min(initial=0.0) < _EIG_CLAMP:
        raise NumericalError(
            f"product term has significantly negative eigenvalue {eigvals.min():g}"
        )
    trace_sqrt = np.sqrt(np.clip(eigvals, 0.0, None)).sum()
    value = float(diff @ diff + np.trace(stats1.cov) + np.trace(stats2.cov) - 2.0 * trace_sqrt)
    if value < _EIG_CLAMP:
        raise NumericalError(f"distance evaluated to {value:g}, below tolerance")
    return max(value, 0.0)


def dataset_fid(
    real_images: np.ndarray,
    generated_images: np.ndarray,
    extractor: FeatureExtractor,
) -> float:
    """Fréchet distance between two image sets under ``extractor`` features."""
    real = np.asarray(real_images)
    gen = np.asarray(generated_images)
    if real.shape[0] < 1 or gen.shape[0] < 1:
        raise DimensionError("both image sets must be nonempty")
    stats_real = GaussianStats.from_features(extractor.embed(real))
    stats_gen = GaussianStats.from_features(extractor.embed(gen))
    return fid(stats_real, stats_gen)
