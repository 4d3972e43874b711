"""Shift-invariant (undecimated) 2D Daubechies wavelet frame.

Filters are applied by circular convolution in the Fourier domain, upsampled
by ``2**j`` at level ``j``. Each 1D filter is scaled by ``1/sqrt(2)`` so that
``|H0|^2 + |H1|^2 = 1``; the resulting 2D filter bank is a Parseval frame.
"""

from __future__ import annotations

import math

import numpy as np

from fdlcp.errors import ConfigError, InputError
from fdlcp.image import as_image

_S3 = math.sqrt(3.0)
# 4-tap Daubechies scaling filter
DB4_LOWPASS = np.array([1 + _S3, 3 + _S3, 3 - _S3, 1 - _S3]) / (4 * math.sqrt(2.0))


def quadrature_mirror(h: np.ndarray) -> np.ndarray:
    L = len(h)
    return np.array([(-1) ** k * h[L - 1 - k] for k in range(L)])


def _response(h: np.ndarray, N: int, step: int) -> np.ndarray:
    taps = np.zeros(N)
    for k, v in enumerate(h):
        taps[(k * step) % N] += v
    return np.fft.fft(taps)


class SIDWT:
    """Undecimated 2D wavelet analysis with ``levels`` levels.

    Coefficients have shape ``(3 * levels + 1, N1, N2)``: three detail bands
    per level (finest first) followed by the final approximation band.
    """

    def __init__(self, shape: tuple[int, int], levels: int = 3, lowpass: np.ndarray = DB4_LOWPASS):
        if levels < 1:
            raise ConfigError(f"levels must be >= 1, got {levels}")
        self.shape = (int(shape[0]), int(shape[1]))
        self.levels = levels
        h0 = np.asarray(lowpass, dtype=float) / math.sqrt(2.0)
        h1 = quadrature_mirror(h0)
        bands = []
        lo = [np.ones(self.shape[0], complex), np.ones(self.shape[1], complex)]
        for j in range(levels):
            step = 2**j
            L = [_response(h0, N, step) for N in self.shape]
            H = [_response(h1, N, step) for N in self.shape]
            r_lo, c_lo = lo[0] * L[0], lo[1] * L[1]
            r_hi, c_hi = lo[0] * H[0], lo[1] * H[1]
            bands.append(np.outer(r_lo, c_hi))
            bands.append(np.outer(r_hi, c_lo))
            bands.append(np.outer(r_hi, c_hi))
            lo = [r_lo, c_lo]
        bands.append(np.outer(lo[0], lo[1]))
        self.filters = np.stack(bands)

    @property
    def coef_shape(self) -> tuple[int, ...]:
        return self.filters.shape

    def analyze(self, x) -> np.ndarray:
        img = as_image(x)
        if img.shape != self.shape:
            raise ConfigError(f"image shape {img.shape} != operator shape {self.shape}")
        return np.fft.ifft2(np.fft.fft2(img)[None] * self.filters)

    def synthesize(self, a) -> np.ndarray:
        a = np.asarray(a)
        if a.shape != self.filters.shape:
            raise InputError(f"coefficient shape {a.shape} != {self.filters.shape}")
        return np.fft.ifft2((np.fft.fft2(a) * self.filters.conj()).sum(axis=0))
