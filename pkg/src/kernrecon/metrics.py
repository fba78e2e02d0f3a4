"""Reconstruction quality: DSSIM, L2, and mutual-nearest-neighbor recovery.

DSSIM is (1 - SSIM) / 2 with SSIM computed over an 11x11 Gaussian window
(sigma 1.5, shrunk for small images), stabilizers C1 = (0.01 L)^2 and
C2 = (0.03 L)^2, and per-channel scores averaged.  L defaults to the
observed dynamic range across the compared pair.  Vectors without an image
shape fall back to plain L2 throughout.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.spatial.distance import cdist

__all__ = [
    "ImageShape",
    "ReconReport",
    "dssim",
    "l2",
    "mutual_nn_recovery",
    "report",
]

_WINDOW_SIZE = 11
_WINDOW_SIGMA = 1.5
_K1, _K2 = 0.01, 0.03
HIGH_QUALITY_DSSIM = 0.3


@dataclass(frozen=True)
class ImageShape:
    """Spatial layout (height, width, channels) of a flattened image vector."""

    height: int
    width: int
    channels: int = 1

    def __post_init__(self):
        if min(self.height, self.width, self.channels) < 1:
            raise ValueError("image dimensions must be positive")

    @property
    def size(self) -> int:
        return self.height * self.width * self.channels

    def to_image(self, vector) -> np.ndarray:
        vector = np.asarray(vector, dtype=float).ravel()
        if vector.size != self.size:
            raise ValueError(
                f"vector of length {vector.size} does not fit shape "
                f"{self.height}x{self.width}x{self.channels}")
        return vector.reshape(self.height, self.width, self.channels)


def _gaussian_window(size, sigma):
    offsets = np.arange(size) - (size - 1) / 2.0
    g = np.exp(-(offsets ** 2) / (2.0 * sigma ** 2))
    window = np.outer(g, g)
    return window / window.sum()


def _window_means(img, window):
    patches = sliding_window_view(img, window.shape)
    return np.tensordot(patches, window, axes=([2, 3], [0, 1]))


def _ssim_single(a, b, data_range):
    size = min(_WINDOW_SIZE, a.shape[0], a.shape[1])
    if size % 2 == 0:
        size -= 1
    window = _gaussian_window(size, _WINDOW_SIGMA)
    mu_a = _window_means(a, window)
    mu_b = _window_means(b, window)
    var_a = _window_means(a * a, window) - mu_a * mu_a
    var_b = _window_means(b * b, window) - mu_b * mu_b
    cov = _window_means(a * b, window) - mu_a * mu_b
    c1 = (_K1 * data_range) ** 2
    c2 = (_K2 * data_range) ** 2
    num = (2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2)
    den = (mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2)
    return float(np.mean(num / den))


def dssim(x, y, shape: ImageShape, data_range=None) -> float:
    """Structural dissimilarity in [0, 1]; zero means identical images."""
    a = shape.to_image(x)
    b = shape.to_image(y)
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
        raise ValueError("images must be finite")
    if data_range is None:
        data_range = float(max(a.max(), b.max()) - min(a.min(), b.min()))
    if data_range == 0.0:
        # both images are one shared constant
        return 0.0
    ssim = np.mean([_ssim_single(a[:, :, c], b[:, :, c], data_range)
                    for c in range(shape.channels)])
    return float(min(max((1.0 - ssim) / 2.0, 0.0), 1.0))


def l2(x, y) -> float:
    """Euclidean distance between two equal-length vectors."""
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    if x.shape != y.shape:
        raise ValueError(f"dimension mismatch: {x.shape} vs {y.shape}")
    return float(np.linalg.norm(x - y))


def _distance_matrix(train, recons, distance, shape, data_range=None):
    train = np.atleast_2d(np.asarray(train, dtype=float))
    recons = np.atleast_2d(np.asarray(recons, dtype=float))
    if distance == "l2":
        return cdist(train, recons)
    if distance == "dssim":
        if shape is None:
            raise ValueError("DSSIM needs an image shape")
        out = np.empty((train.shape[0], recons.shape[0]))
        for i in range(train.shape[0]):
            for j in range(recons.shape[0]):
                out[i, j] = dssim(train[i], recons[j], shape, data_range)
        return out
    raise ValueError(f"unknown distance kind: {distance!r}")


def mutual_nn_recovery(recons, train, distance="l2", shape=None):
    """Percentage of training points in a mutual nearest-neighbor pair.

    A pair (i, j) counts when reconstruction j is the nearest reconstruction
    to training point i and i is the nearest training point to j, ties going
    to the lowest index.  Returns (percentage, pair list).
    """
    D = _distance_matrix(train, recons, distance, shape)
    nearest_recon = np.argmin(D, axis=1)
    nearest_train = np.argmin(D, axis=0)
    pairs = [(int(i), int(j)) for i, j in enumerate(nearest_recon)
             if nearest_train[j] == i]
    return 100.0 * len(pairs) / D.shape[0], pairs


def _percentiles(values):
    return tuple(float(np.percentile(values, q)) for q in (25, 50, 75))


@dataclass
class ReconReport:
    """Distance summaries and recovery percentages for one reconstruction set."""

    nearest_l2: np.ndarray
    l2_percentiles: tuple[float, float, float]
    recovery_total_pct: float
    pairs: list[tuple[int, int]]
    nearest_dssim: np.ndarray | None = None
    dssim_percentiles: tuple[float, float, float] | None = None
    recovery_high_quality_pct: float | None = None

    def to_record(self) -> dict:
        rec = {
            "l2_p25": self.l2_percentiles[0],
            "l2_p50": self.l2_percentiles[1],
            "l2_p75": self.l2_percentiles[2],
            "recovery_total_pct": self.recovery_total_pct,
        }
        if self.dssim_percentiles is not None:
            rec.update({
                "dssim_p25": self.dssim_percentiles[0],
                "dssim_p50": self.dssim_percentiles[1],
                "dssim_p75": self.dssim_percentiles[2],
            })
        if self.recovery_high_quality_pct is not None:
            rec["recovery_high_quality_pct"] = self.recovery_high_quality_pct
        return rec


def report(recons, train, shape: ImageShape | None = None,
           l2_threshold=None, data_range=None) -> ReconReport:
    """Assemble nearest-distance percentiles and recovery percentages.

    With an image shape, mutual-nearest-neighbor recovery runs on DSSIM and
    the restricted recovery keeps pairs under the 0.3 high-quality mark;
    without one, recovery runs on L2 and the restriction (when requested)
    uses `l2_threshold`.
    """
    train = np.atleast_2d(np.asarray(train, dtype=float))
    recons = np.atleast_2d(np.asarray(recons, dtype=float))
    if recons.shape[0] < 1 or train.shape[0] < 1:
        raise ValueError("both point sets must be nonempty")

    D_l2 = _distance_matrix(train, recons, "l2", None)
    nearest_l2 = D_l2.min(axis=1)
    if shape is not None:
        D_ds = _distance_matrix(train, recons, "dssim", shape, data_range)
        nearest_dssim = D_ds.min(axis=1)
        D = D_ds
        restricted_below = HIGH_QUALITY_DSSIM
    else:
        nearest_dssim = None
        D = D_l2
        restricted_below = l2_threshold

    nearest_recon = np.argmin(D, axis=1)
    nearest_train = np.argmin(D, axis=0)
    pairs = [(int(i), int(j)) for i, j in enumerate(nearest_recon)
             if nearest_train[j] == i]
    N = train.shape[0]
    total = 100.0 * len(pairs) / N
    restricted = None
    if restricted_below is not None:
        good = sum(1 for i, j in pairs if D[i, j] < restricted_below)
        restricted = 100.0 * good / N

    return ReconReport(
        nearest_l2=nearest_l2,
        l2_percentiles=_percentiles(nearest_l2),
        recovery_total_pct=total,
        pairs=pairs,
        nearest_dssim=nearest_dssim,
        dssim_percentiles=None if nearest_dssim is None
        else _percentiles(nearest_dssim),
        recovery_high_quality_pct=restricted,
    )
