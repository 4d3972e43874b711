"""Reconstruction quality: relative l2 error and structural similarity."""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from fdlcp.errors import ConfigError, MetricError

K1, K2 = 0.01, 0.03


def rlne(xhat, x) -> float:
    """Relative l2 norm error ``||xhat - x|| / ||x||`` on complex data."""
    xhat, x = np.asarray(xhat), np.asarray(x)
    if xhat.shape != x.shape:
        raise ConfigError(f"shape mismatch {xhat.shape} vs {x.shape}")
    nx = np.linalg.norm(x)
    if nx == 0:
        raise MetricError("RLNE undefined for an all-zero ground truth")
    return float(np.linalg.norm(xhat - x) / nx)


def _ssim_stats(mu_a, mu_b, var_a, var_b, cov, L):
    c1, c2 = (K1 * L) ** 2, (K2 * L) ** 2
    return ((2 * mu_a * mu_b + c1) * (2 * cov + c2)) / ((mu_a**2 + mu_b**2 + c1) * (var_a + var_b + c2))


def ssim(xhat, x, mode: str = "windowed", L: float | None = None, win: int = 8) -> float:
    """SSIM between magnitude images.

    ``mode="global"`` applies the SSIM formula once with whole-image
    statistics; ``mode="windowed"`` averages it over all ``win x win`` windows
    (stride 1, uniform weights). The dynamic range ``L`` defaults to the peak
    magnitude of the ground truth ``x``. Variances use the ``1/N`` convention.
    """
    a = np.abs(np.asarray(xhat)).astype(float)
    b = np.abs(np.asarray(x)).astype(float)
    if a.shape != b.shape:
        raise ConfigError(f"shape mismatch {a.shape} vs {b.shape}")
    if L is None:
        L = float(b.max()) if b.max() > 0 else 1.0
    if mode == "global":
        mu_a, mu_b = a.mean(), b.mean()
        var_a = ((a - mu_a) ** 2).mean()
        var_b = ((b - mu_b) ** 2).mean()
        cov = ((a - mu_a) * (b - mu_b)).mean()
        return float(_ssim_stats(mu_a, mu_b, var_a, var_b, cov, L))
    if mode != "windowed":
        raise ConfigError(f"unknown SSIM mode {mode!r}")
    w = min(win, *a.shape)
    A = sliding_window_view(a, (w, w))
    B = sliding_window_view(b, (w, w))
    mu_a, mu_b = A.mean(axis=(-2, -1)), B.mean(axis=(-2, -1))
    da, db = A - mu_a[..., None, None], B - mu_b[..., None, None]
    var_a = (da**2).mean(axis=(-2, -1))
    var_b = (db**2).mean(axis=(-2, -1))
    cov = (da * db).mean(axis=(-2, -1))
    return float(_ssim_stats(mu_a, mu_b, var_a, var_b, cov, L).mean())
