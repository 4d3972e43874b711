"""Undersampling masks and the undersampled Fourier encoding operator.

Masks and k-space arrays are stored DC-centred (DC at ``(N1 // 2, N2 // 2)``);
the operators shift explicitly around a unitary FFT.
"""

from __future__ import annotations

import math

import numpy as np

from fdlcp.errors import ConfigError, InputError
from fdlcp.image import as_image


def _check_rate(rate: float) -> None:
    if not (0.0 < rate <= 1.0):
        raise ConfigError(f"sampling rate must lie in (0, 1], got {rate}")


def _weighted_pick(weights: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """Indices of ``k`` items drawn without replacement, probability ~ weight.

    Uses exponential keys (Efraimidis-Spirakis); ties in the key sort are
    broken by index so the result is a pure function of the generator state.
    """
    if k <= 0:
        return np.zeros(0, dtype=int)
    keys = np.log(rng.random(weights.size)) / weights
    order = np.argsort(-keys, kind="stable")
    return np.sort(order[:k])


def density_weight(dist: np.ndarray, power: float = 2.0) -> np.ndarray:
    """Variable-density weight ``(1 + d / d_max) ** -power``."""
    dmax = dist.max() if dist.size and dist.max() > 0 else 1.0
    return (1.0 + dist / dmax) ** (-power)


def mask_rate(mask) -> float:
    m = np.asarray(mask, dtype=bool)
    return float(m.sum()) / m.size


def make_cartesian_mask(N1: int, N2: int, rate: float, center_fraction: float = 0.04,
                        seed: int = 0, density_power: float = 2.0) -> np.ndarray:
    """Random phase-encode lines (full rows) with a fully sampled centre block."""
    _check_rate(rate)
    if not (0.0 <= center_fraction < rate) and rate < 1.0:
        raise ConfigError(f"center_fraction must lie in [0, rate), got {center_fraction}")
    mask = np.zeros((N1, N2), dtype=bool)
    if rate >= 1.0:
        mask[:] = True
        return mask
    n_center = math.ceil(center_fraction * N1)
    n_rows = max(int(round(rate * N1)), n_center, 1)
    c = N1 // 2
    start = c - n_center // 2
    center = np.arange(start, start + n_center)
    rest = np.setdiff1d(np.arange(N1), center)
    rng = np.random.default_rng(seed)
    w = density_weight(np.abs(rest - c).astype(float), density_power)
    picked = rest[_weighted_pick(w, n_rows - n_center, rng)]
    mask[center, :] = True
    mask[picked, :] = True
    return mask


def make_random2d_mask(N1: int, N2: int, rate: float, seed: int = 0,
                       density_power: float = 2.0) -> np.ndarray:
    """Individually drawn k-space points, radially decaying density; DC kept."""
    _check_rate(rate)
    mask = np.zeros((N1, N2), dtype=bool)
    if rate >= 1.0:
        mask[:] = True
        return mask
    k = max(int(round(rate * N1 * N2)), 1)
    rr, cc = np.mgrid[0:N1, 0:N2]
    dist = np.hypot(rr - N1 // 2, cc - N2 // 2).ravel()
    dc = (N1 // 2) * N2 + N2 // 2
    others = np.delete(np.arange(N1 * N2), dc)
    rng = np.random.default_rng(seed)
    picked = others[_weighted_pick(density_weight(dist[others], density_power), k - 1, rng)]
    flat = mask.ravel()
    flat[dc] = True
    flat[picked] = True
    return mask


def radial_spoke(N1: int, N2: int, theta: float) -> np.ndarray:
    """Grid points nearest to the line through the k-space centre at ``theta``.

    ``theta = 0`` is the centre row; angles run counter-clockwise with the
    row axis pointing down. One point per column (or row, for steep lines).
    """
    c0, c1 = N1 // 2, N2 // 2
    spoke = np.zeros((N1, N2), dtype=bool)
    s, co = math.sin(theta), math.cos(theta)
    if abs(co) >= abs(s):
        dc = np.arange(-c1, N2 - c1)
        dr = np.rint(-dc * (s / co)).astype(int)
    else:
        dr = np.arange(-c0, N1 - c0)
        dc = np.rint(-dr * (co / s)).astype(int)
    r, c = dr + c0, dc + c1
    ok = (r >= 0) & (r < N1) & (c >= 0) & (c < N2)
    spoke[r[ok], c[ok]] = True
    return spoke


def make_radial_mask(N1: int, N2: int, rate: float | None = None, spokes: int | None = None,
                     seed: int = 0) -> np.ndarray:
    """Pseudo-radial mask: spokes at uniformly spaced angles in ``[0, pi)``.

    Give either ``spokes`` or a target ``rate``; with a rate, the spoke count
    grows until the achieved rate reaches the target. ``seed`` rotates the
    spoke set by a random offset within one angular step (0 disables it).
    """
    if (rate is None) == (spokes is None):
        raise ConfigError("give exactly one of rate or spokes")
    if spokes is not None and spokes < 1:
        raise ConfigError(f"spoke count must be >= 1, got {spokes}")
    if rate is not None:
        _check_rate(rate)
    offset = 0.0 if not seed else float(np.random.default_rng(seed).random())

    def build(count: int) -> np.ndarray:
        m = np.zeros((N1, N2), dtype=bool)
        for k in range(count):
            m |= radial_spoke(N1, N2, (k + offset) * math.pi / count)
        return m

    if spokes is not None:
        return build(spokes)
    count = 1
    while True:
        m = build(count)
        if mask_rate(m) >= rate or m.all():
            return m
        count += 1


def _check_shapes(a: np.ndarray, mask: np.ndarray) -> None:
    if a.shape != mask.shape:
        raise ConfigError(f"image shape {a.shape} does not match mask shape {mask.shape}")


def fft2c(x: np.ndarray) -> np.ndarray:
    """Unitary 2D DFT, DC-centred output."""
    return np.fft.fftshift(np.fft.fft2(x, norm="ortho"))


def ifft2c(k: np.ndarray) -> np.ndarray:
    """Inverse of :func:`fft2c`."""
    return np.fft.ifft2(np.fft.ifftshift(k), norm="ortho")


def encode(x, mask) -> np.ndarray:
    """Undersampled k-space ``y = U F x`` (zero where the mask is false)."""
    img = as_image(x)
    m = np.asarray(mask, dtype=bool)
    _check_shapes(img, m)
    return np.where(m, fft2c(img), 0)


def adjoint(y) -> np.ndarray:
    """Zero-filling reconstruction ``F^H y`` of zero-embedded k-space."""
    k = np.asarray(y, dtype=np.complex128)
    if k.ndim != 2:
        raise InputError(f"k-space must be 2D, got shape {k.shape}")
    return ifft2c(k)
