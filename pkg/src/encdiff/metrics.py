"""Similarity and leakage metrics over equal-shape real tensors.

All five indicators work directly on latents; the structural similarity
here is the latent-space analogue of the usual pixel-space measure and is
labeled as such in reports.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import gaussian_filter, uniform_filter

KL_BINS = 256
KL_SMOOTHING = 1e-10
SSIM_K1 = 0.01
SSIM_K2 = 0.03
SSIM_WINDOW = 7

PSNR_SENTINEL = math.inf


@dataclass(frozen=True)
class MetricReport:
    cosine: float
    mse: float
    psnr_db: float
    ssim: float
    kl: float

    CSV_HEADER = "cosine,mse,psnr_db,ssim,kl"

    def as_csv_row(self) -> str:
        return f"{self.cosine:.6f},{self.mse:.6e},{self.psnr_db:.4f},{self.ssim:.6f},{self.kl:.6e}"

    def as_text(self) -> str:
        return (
            f"cosine  {self.cosine: .6f}\n"
            f"mse     {self.mse: .6e}\n"
            f"psnr_db {self.psnr_db: .4f}\n"
            f"ssim    {self.ssim: .6f}\n"
            f"kl      {self.kl: .6e}"
        )


def _pair(a, b) -> tuple[np.ndarray, np.ndarray]:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    return a, b


def cosine(a, b) -> float:
    """Cosine over flattened tensors; a lone zero vector counts as orthogonal."""
    a, b = _pair(a, b)
    fa, fb = a.ravel(), b.ravel()
    peak_a, peak_b = np.max(np.abs(fa)), np.max(np.abs(fb))
    if peak_a == 0.0 and peak_b == 0.0:
        raise ValueError("cosine undefined for two zero tensors")
    if peak_a == 0.0 or peak_b == 0.0:
        return 0.0
    # pre-scale so squaring cannot underflow for tiny-magnitude tensors
    ua, ub = fa / peak_a, fb / peak_b
    return float(np.dot(ua, ub) / (np.linalg.norm(ua) * np.linalg.norm(ub)))


def mse(a, b) -> float:
    a, b = _pair(a, b)
    return float(np.mean((a - b) ** 2))


def psnr(a, b, data_range: float | None = None) -> float:
    a, b = _pair(a, b)
    data_range = _default_range(a) if data_range is None else float(data_range)
    if data_range <= 0:
        raise ValueError("data_range must be positive")
    err = mse(a, b)
    if err == 0.0:
        return PSNR_SENTINEL
    return 10.0 * math.log10(data_range**2 / err)


def _default_range(ref: np.ndarray) -> float:
    spread = float(ref.max() - ref.min())
    return spread if spread > 0 else 1.0


def ssim(a, b, data_range: float | None = None, *, gaussian: bool = False) -> float:
    """Mean structural similarity, uniform 7x7 window (optionally Gaussian).

    Computed per channel on (C,H,W) tensors, then averaged.
    """
    a, b = _pair(a, b)
    if a.ndim == 2:
        a, b = a[None], b[None]
    if a.ndim != 3:
        raise ValueError(f"expected (H,W) or (C,H,W), got shape {a.shape}")
    win = 11 if gaussian else SSIM_WINDOW
    if min(a.shape[1], a.shape[2]) < win:
        raise ValueError(f"window {win} larger than image {a.shape[1:]}")
    data_range = _default_range(a) if data_range is None else float(data_range)
    if data_range <= 0:
        raise ValueError("data_range must be positive")
    c1 = (SSIM_K1 * data_range) ** 2
    c2 = (SSIM_K2 * data_range) ** 2

    if gaussian:
        smooth = lambda p: gaussian_filter(p, sigma=1.5, mode="reflect")
    else:
        smooth = lambda p: uniform_filter(p, size=win, mode="reflect")

    scores = []
    for pa, pb in zip(a, b):
        mu_a, mu_b = smooth(pa), smooth(pb)
        var_a = smooth(pa * pa) - mu_a * mu_a
        var_b = smooth(pb * pb) - mu_b * mu_b
        cov = smooth(pa * pb) - mu_a * mu_b
        num = (2 * mu_a * mu_b + c1) * (2 * cov + c2)
        den = (mu_a**2 + mu_b**2 + c1) * (var_a + var_b + c2)
        scores.append(np.mean(num / den))
    return float(np.mean(scores))


def kl_divergence(a, b) -> float:
    """KL(P_a || P_b) between 256-bin histograms over the joint value range."""
    a, b = _pair(a, b)
    lo = min(float(a.min()), float(b.min()))
    hi = max(float(a.max()), float(b.max()))
    if lo == hi:
        hi = lo + 1.0  # both constant: identical histograms either way
    bins = np.linspace(lo, hi, KL_BINS + 1)
    pa, _ = np.histogram(a, bins=bins)
    pb, _ = np.histogram(b, bins=bins)
    p = pa.astype(np.float64) + KL_SMOOTHING
    q = pb.astype(np.float64) + KL_SMOOTHING
    p /= p.sum()
    q /= q.sum()
    return float(np.sum(p * np.log(p / q)))


def metric_report(a, b, data_range: float | None = None) -> MetricReport:
    return MetricReport(
        cosine=cosine(a, b),
        mse=mse(a, b),
        psnr_db=psnr(a, b, data_range),
        ssim=ssim(a, b, data_range),
        kl=kl_divergence(a, b),
    )
