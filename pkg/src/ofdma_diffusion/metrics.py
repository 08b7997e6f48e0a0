"""Image quality metrics: MSE, PSNR, SSIM, and the Gaussian Frechet distance.

SSIM here is the uniform-window flavor with fixed defaults (8x8 sliding
window, stabilizers c1 = (0.01 * peak)^2 and c2 = (0.03 * peak)^2,
population moments), chosen once so numbers are reproducible across
implementations.  The Frechet distance operates on pluggable feature
statistics rather than any pretrained embedding; reports should name the
feature map used.
"""

from __future__ import annotations

import math

import numpy as np


def mse(x: np.ndarray, y: np.ndarray) -> float:
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise ValueError(f"shape mismatch: {x.shape} vs {y.shape}")
    return float(np.mean((x - y) ** 2))


def psnr(x: np.ndarray, y: np.ndarray, peak: float = 2.0) -> float:
    """10 log10(peak^2 / mse); identical inputs return math.inf."""
    if peak <= 0:
        raise ValueError("peak must be positive")
    err = mse(x, y)
    if err == 0.0:
        return math.inf
    return float(10.0 * np.log10(peak * peak / err))


def ssim(x: np.ndarray, y: np.ndarray, window: int = 8, peak: float = 2.0) -> float:
    """Mean local structural similarity over all sliding windows.

    Grayscale images of equal shape, at least ``window`` on each side.
    Uniform window weighting, population (ddof=0) moments.  Symmetric in
    its arguments; ssim(x, x) == 1.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise ValueError(f"shape mismatch: {x.shape} vs {y.shape}")
    if x.ndim != 2:
        raise ValueError("ssim expects 2-D grayscale images")
    if min(x.shape) < window:
        raise ValueError(f"image {x.shape} smaller than {window}x{window} window")

    c1 = (0.01 * peak) ** 2
    c2 = (0.03 * peak) ** 2
    wx = np.lib.stride_tricks.sliding_window_view(x, (window, window))
    wy = np.lib.stride_tricks.sliding_window_view(y, (window, window))
    ux = wx.mean(axis=(-2, -1))
    uy = wy.mean(axis=(-2, -1))
    vx = (wx * wx).mean(axis=(-2, -1)) - ux * ux
    vy = (wy * wy).mean(axis=(-2, -1)) - uy * uy
    cov = (wx * wy).mean(axis=(-2, -1)) - ux * uy
    score = ((2 * ux * uy + c1) * (2 * cov + c2)
             / ((ux * ux + uy * uy + c1) * (vx + vy + c2)))
    return float(score.mean())


def _sqrtm_psd(a: np.ndarray) -> np.ndarray:
    # Symmetric square root with negative eigenvalues clipped to zero.
    w, v = np.linalg.eigh(a)
    return (v * np.sqrt(np.clip(w, 0.0, None))) @ v.T


def frechet_gaussian(mu_r: np.ndarray, cov_r: np.ndarray,
                     mu_g: np.ndarray, cov_g: np.ndarray) -> float:
    """|mu_r - mu_g|^2 + Tr(cov_r + cov_g - 2 (cov_r cov_g)^{1/2}).

    The product square root is evaluated as sqrt(S cov_g S) with
    S = cov_r^{1/2}, which is symmetric PSD, via eigendecomposition with
    negative eigenvalues clipped at zero.  Always >= 0.
    """
    mu_r = np.asarray(mu_r, dtype=np.float64).ravel()
    mu_g = np.asarray(mu_g, dtype=np.float64).ravel()
    cov_r = np.atleast_2d(np.asarray(cov_r, dtype=np.float64))
    cov_g = np.atleast_2d(np.asarray(cov_g, dtype=np.float64))
    if mu_r.size != mu_g.size or cov_r.shape != cov_g.shape:
        raise ValueError("mean/covariance dimensions disagree")
    if cov_r.shape != (mu_r.size, mu_r.size):
        raise ValueError("covariance shape does not match the mean")
    for c in (cov_r, cov_g):
        if np.max(np.abs(c - c.T)) > 1e-8:
            raise ValueError("covariance matrix is not symmetric")

    s = _sqrtm_psd(cov_r)
    inner = s @ cov_g @ s
    w = np.linalg.eigvalsh((inner + inner.T) / 2.0)
    tr_sqrt = float(np.sum(np.sqrt(np.clip(w, 0.0, None))))
    diff = mu_r - mu_g
    value = float(diff @ diff + np.trace(cov_r) + np.trace(cov_g) - 2.0 * tr_sqrt)
    return max(value, 0.0)


def feature_stats(samples, feature_map=None):
    """Sample mean and unbiased covariance of mapped features.

    ``samples`` is a sequence of arrays; ``feature_map`` maps one sample to
    a flat feature vector (default: flatten).  Needs at least 2 samples.
    """
    if feature_map is None:
        feature_map = lambda s: np.asarray(s, dtype=np.float64).ravel()
    feats = np.stack([np.asarray(feature_map(s), dtype=np.float64).ravel()
                      for s in samples])
    if feats.shape[0] < 2:
        raise ValueError("need at least 2 samples for covariance")
    mu = feats.mean(axis=0)
    cov = np.atleast_2d(np.cov(feats, rowvar=False, ddof=1))
    return mu, cov


def patch_mean_features(patch: int = 4):
    """Feature map: mean of each patch x patch tile of a square image."""
    def fmap(image):
        img = np.asarray(image, dtype=np.float64)
        if img.ndim == 1:
            side = int(round(math.sqrt(img.size)))
            img = img.reshape(side, side)
        h, w = img.shape
        if h % patch or w % patch:
            raise ValueError(f"{patch}x{patch} tiles do not cover {img.shape}")
        return img.reshape(h // patch, patch, w // patch, patch).mean(axis=(1, 3)).ravel()
    return fmap
