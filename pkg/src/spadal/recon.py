"""Depth reconstruction from sparse photon events and image-quality metrics.

Per-pixel Poisson matched-filter MLE: correlate the bin histogram with the
unit-area Gaussian impulse response and take the arg-max bin, which is the
maximum-likelihood signal bin for a single-return, known-background model.
Empty pixels are infilled by iterated 3x3 medians of valid neighbors.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .photon_sim import PhotonEvents, SceneTruth, SimulationCondition, bin_to_depth, gaussian_irf


class EmptyMeasurementError(ValueError):
    """No pixel received a photon; nothing to infill from."""


@dataclass(frozen=True)
class DepthImage:
    depth_m: np.ndarray        # (height, width) meters
    valid_mask: np.ndarray     # False where no photons arrived before infilling

    def __post_init__(self):
        d = np.asarray(self.depth_m, dtype=np.float64)
        m = np.asarray(self.valid_mask, dtype=bool)
        if d.ndim != 2 or d.shape != m.shape:
            raise ValueError("depth and mask must share a 2-D shape")
        object.__setattr__(self, "depth_m", d)
        object.__setattr__(self, "valid_mask", m)

    @property
    def height(self) -> int:
        return self.depth_m.shape[0]

    @property
    def width(self) -> int:
        return self.depth_m.shape[1]


@dataclass(frozen=True)
class ImageQuality:
    rmse: float
    ssim: float

    def to_dict(self) -> dict:
        return {"rmse": self.rmse, "ssim": self.ssim}


def matched_filter_bins(events: PhotonEvents, cond: SimulationCondition):
    """Arg-max correlation bin per pixel (ties toward the lowest bin).

    Returns (bins int64 raster, valid bool raster); bins are meaningless
    where valid is False.
    """
    h, w = events.height, events.width
    n_bins = cond.n_bins
    offsets, weights = gaussian_irf(cond.sigma_bins, 0.0)
    # score(p, t) = sum_k h(b_k - t): scatter each event's kernel onto the
    # candidate bins t = b_k - offset.
    pix = events.y.astype(np.int64) * w + events.x.astype(np.int64)
    ev_bins = events.bin.astype(np.int64)
    cand = ev_bins[:, None] - offsets[None, :]
    wgt = np.broadcast_to(weights[None, :], cand.shape)
    pix_rep = np.broadcast_to(pix[:, None], cand.shape)
    ok = (cand >= 0) & (cand < n_bins)
    scores = np.zeros((h * w, n_bins))
    np.add.at(scores, (pix_rep[ok], cand[ok]), wgt[ok])
    best = scores.argmax(axis=1)  # first max = lowest bin on ties
    valid = np.zeros(h * w, dtype=bool)
    valid[np.unique(pix)] = True
    return best.reshape(h, w), valid.reshape(h, w)


def _neighbor_median_fill(depth: np.ndarray, valid: np.ndarray) -> np.ndarray:
    """Iterated 3x3 median of valid neighbors until every pixel is filled."""
    depth = depth.copy()
    valid = valid.copy()
    h, w = depth.shape
    while not valid.all():
        new_vals = {}
        for i, j in zip(*np.nonzero(~valid)):
            i0, i1 = max(0, i - 1), min(h, i + 2)
            j0, j1 = max(0, j - 1), min(w, j + 2)
            nb_valid = valid[i0:i1, j0:j1]
            if nb_valid.any():
                new_vals[(i, j)] = float(np.median(depth[i0:i1, j0:j1][nb_valid]))
        if not new_vals:  # cannot happen when at least one pixel is valid
            break
        for (i, j), v in new_vals.items():
            depth[i, j] = v
            valid[i, j] = True
    return depth


def _median3(img: np.ndarray) -> np.ndarray:
    """3x3 median over the in-bounds window (no padding values invented)."""
    h, w = img.shape
    out = np.empty_like(img)
    for i in range(h):
        for j in range(w):
            out[i, j] = np.median(img[max(0, i - 1):i + 2, max(0, j - 1):j + 2])
    return out


def reconstruct(events: PhotonEvents, cond: SimulationCondition) -> DepthImage:
    """Matched-filter MLE depth image with median infilling of empty pixels."""
    bins, valid = matched_filter_bins(events, cond)
    if not valid.any():
        raise EmptyMeasurementError("all pixels are empty")
    depth = np.asarray(bin_to_depth(bins, cond), dtype=np.float64)
    depth[~valid] = np.nan
    depth = _neighbor_median_fill(depth, valid)
    depth = _median3(depth)
    assert np.isfinite(depth).all()
    return DepthImage(depth_m=depth, valid_mask=valid)


def _truth_raster(truth) -> np.ndarray:
    if isinstance(truth, SceneTruth) or isinstance(truth, DepthImage):
        return truth.depth_m
    return np.asarray(truth, dtype=np.float64)


def rmse(pred: DepthImage, truth) -> float:
    """Root mean square depth error in meters."""
    t = _truth_raster(truth)
    p = _truth_raster(pred)
    if p.shape != t.shape:
        raise ValueError("dimension mismatch")
    return float(np.sqrt(np.mean((p - t) ** 2)))


def ssim(pred: DepthImage, truth) -> float:
    """Global-statistics structural similarity on whole-image moments.

    Dynamic range L is shared by both images (range of their union), so the
    metric is exactly symmetric; c1 = (0.01 L)^2, c2 = (0.03 L)^2.
    """
    x = _truth_raster(pred).ravel()
    y = _truth_raster(truth).ravel()
    if x.shape != y.shape:
        raise ValueError("dimension mismatch")
    L = float(max(x.max(), y.max()) - min(x.min(), y.min()))
    if L == 0:
        raise ValueError("degenerate dynamic range")
    c1 = (0.01 * L) ** 2
    c2 = (0.03 * L) ** 2
    mx, my = x.mean(), y.mean()
    vx, vy = x.var(), y.var()
    cxy = float(np.mean((x - mx) * (y - my)))
    return ((2 * mx * my + c1) * (2 * cxy + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2))


def quality(pred: DepthImage, truth) -> ImageQuality:
    return ImageQuality(rmse=rmse(pred, truth), ssim=ssim(pred, truth))
