"""Detection and enhancement scores.

Detection compares boolean masks (IoU, Dice). Enhancement compares a
predicted image with the clean reference (SSIM, PSNR, Pearson correlation,
SNR). PSNR and SSIM take their dynamic range from the reference image.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
from skimage.metrics import structural_similarity

__all__ = ["SegScores", "EnhScores", "seg_scores", "enh_scores", "DB_CAP", "aggregate"]

DB_CAP = 120.0


@dataclass(frozen=True)
class SegScores:
    iou: float
    dice: float

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class EnhScores:
    """Enhancement scores; ``corr`` is NaN when the reference is constant."""

    ssim: float
    psnr: float
    corr: float
    snr: float

    def to_dict(self):
        # NaN is not valid JSON; report an undefined correlation as null
        return {k: (None if isinstance(v, float) and math.isnan(v) else v)
                for k, v in asdict(self).items()}


def _vals(x):
    return np.asarray(getattr(x, "values", x))


def _shapes(a, b):
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: prediction {a.shape} vs truth {b.shape}")


def seg_scores(pred, truth):
    """IoU and Dice of two masks; both are 1 when both masks are empty."""
    p = _vals(pred).astype(bool)
    t = _vals(truth).astype(bool)
    _shapes(p, t)
    inter = int(np.count_nonzero(p & t))
    union = int(np.count_nonzero(p | t))
    total = int(np.count_nonzero(p)) + int(np.count_nonzero(t))
    if union == 0:
        return SegScores(1.0, 1.0)
    return SegScores(inter / union, 2.0 * inter / total)


def _db(num, den):
    if den == 0:
        return DB_CAP
    if num == 0:
        return -DB_CAP
    return min(10.0 * math.log10(num / den), DB_CAP)


def _ssim(t, p, rng):
    """Mean SSIM (border-cropped, as usual) and the full local map.

    The Gaussian window (sigma 1.5, cut at 3.5 sigma, so 11 x 11) narrows
    to fit images with a side shorter than 11 pixels.
    """
    radius = min(5, (min(t.shape) - 1) // 2)
    if radius < 1:
        raise ValueError(f"SSIM needs images of at least 3x3 pixels, got {t.shape}")
    mssim, smap = structural_similarity(
        t, p, data_range=rng, gaussian_weights=True, sigma=1.5 if radius == 5 else radius / 3.5,
        use_sample_covariance=False, full=True)
    return float(mssim), smap


def enh_scores(pred, truth, mask=None):
    """SSIM, PSNR, correlation and SNR of ``pred`` against ``truth``.

    SSIM is the mean local SSIM away from the image border (half a window
    is cropped). With ``mask`` the pointwise scores (PSNR, SNR,
    correlation) use only the masked pixels and SSIM averages the local
    SSIM map over them.
    """
    p = _vals(pred).astype(np.float64)
    t = _vals(truth).astype(np.float64)
    _shapes(p, t)
    rng = float(t.max() - t.min())
    if rng > 0:
        ssim, smap = _ssim(t, p, rng)
    else:
        smap = np.where(p == t, 1.0, 0.0)
        ssim = float(np.mean(smap))
    if mask is not None:
        m = _vals(mask).astype(bool)
        _shapes(m, t)
        if not m.any():
            raise ValueError("mask-restricted scores need a nonempty mask")
        p, t, smap = p[m], t[m], smap[m]
        ssim = float(np.mean(smap))
        rng = float(t.max() - t.min())
    err = t - p
    mse = float(np.mean(err * err))
    psnr = _db(rng * rng, mse) if rng > 0 else (DB_CAP if mse == 0 else -DB_CAP)
    snr = _db(float(np.sum(t * t)), float(np.sum(err * err)))
    tc, pc = t - t.mean(), p - p.mean()
    den = math.sqrt(float(np.sum(tc * tc)) * float(np.sum(pc * pc)))
    if float(np.sum(tc * tc)) == 0:
        corr = math.nan
    elif den == 0:
        corr = 0.0
    else:
        corr = float(np.clip(np.sum(tc * pc) / den, -1.0, 1.0))
    return EnhScores(ssim, psnr, corr, snr)


def aggregate(rows):
    """Mean and median of each score over a list of score dicts, ignoring nulls."""
    out = {}
    keys = sorted({k for r in rows for k in r})
    for k in keys:
        v = np.array([r[k] for r in rows if r.get(k) is not None], dtype=np.float64)
        out[k] = ({"mean": float(v.mean()), "median": float(np.median(v)), "n": int(v.size)}
                  if v.size else {"mean": None, "median": None, "n": 0})
    return out
