"""Complex images, overlapping periodic patches and synthetic phantoms.

Images are plain 2D ``complex128`` numpy arrays. Patches are handled as a
matrix with one row per patch (``J x n*n``), each row holding the ``n x n``
block in row-major order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from fdlcp.errors import ConfigError, InputError


def as_image(x) -> np.ndarray:
    """Return ``x`` as a finite 2D complex128 array."""
    img = np.asarray(x, dtype=np.complex128)
    if img.ndim != 2 or img.size == 0:
        raise InputError(f"image must be a non-empty 2D array, got shape {img.shape}")
    if not np.all(np.isfinite(img)):
        raise InputError("image contains NaN or Inf samples")
    return img


@dataclass(frozen=True)
class PatchConfig:
    """Patch geometry. Boundary handling is always periodic wrap."""

    n: int = 8
    stride: int = 1

    def __post_init__(self):
        if self.n < 1 or self.stride < 1:
            raise ConfigError(f"patch size and stride must be positive (n={self.n}, stride={self.stride})")

    def check(self, shape: tuple[int, int]) -> None:
        if self.n > min(shape):
            raise ConfigError(f"patch size {self.n} exceeds image side {min(shape)}")

    @property
    def overlap(self) -> int:
        """Number of patches covering each pixel (stride 1 only)."""
        return self.n * self.n


def patch_origins(shape: tuple[int, int], cfg: PatchConfig) -> np.ndarray:
    """Top-left corners of all patches, row-major order, shape ``(J, 2)``."""
    cfg.check(shape)
    rows = np.arange(0, shape[0], cfg.stride)
    cols = np.arange(0, shape[1], cfg.stride)
    rr, cc = np.meshgrid(rows, cols, indexing="ij")
    return np.stack([rr.ravel(), cc.ravel()], axis=1)


def patch_index(shape: tuple[int, int], cfg: PatchConfig) -> np.ndarray:
    """Flat pixel index of every patch sample, shape ``(J, n*n)``.

    Row ``j`` lists the (wrapped) raveled pixel positions read by patch ``j``.
    """
    origins = patch_origins(shape, cfg)
    dr, dc = np.divmod(np.arange(cfg.n * cfg.n), cfg.n)
    r = (origins[:, :1] + dr[None, :]) % shape[0]
    c = (origins[:, 1:] + dc[None, :]) % shape[1]
    return r * shape[1] + c


def extract_patches(image, cfg: PatchConfig = PatchConfig()) -> np.ndarray:
    """All overlapping patches of ``image`` as rows of a ``(J, n*n)`` matrix."""
    img = as_image(image)
    return img.ravel()[patch_index(img.shape, cfg)]


def assemble_adjoint(patches, shape: tuple[int, int], cfg: PatchConfig = PatchConfig()) -> np.ndarray:
    """Adjoint of :func:`extract_patches`: add every patch back at its pixels.

    For stride 1, ``assemble_adjoint(extract_patches(x)) == n**2 * x``.
    """
    shape = (int(shape[0]), int(shape[1]))
    idx = patch_index(shape, cfg)
    p = np.asarray(patches)
    if p.shape != idx.shape:
        raise InputError(f"expected patch matrix of shape {idx.shape}, got {p.shape}")
    npix = shape[0] * shape[1]
    flat = idx.ravel()
    re = np.bincount(flat, weights=p.real.ravel(), minlength=npix)
    im = np.bincount(flat, weights=p.imag.ravel(), minlength=npix)
    return (re + 1j * im).reshape(shape)


# Modified Shepp-Logan (Toft): intensity, semi-axes a b, centre x0 y0, angle (deg)
_SHEPP_LOGAN = np.array([
    [1.0, 0.69, 0.92, 0.0, 0.0, 0.0],
    [-0.8, 0.6624, 0.874, 0.0, -0.0184, 0.0],
    [-0.2, 0.11, 0.31, 0.22, 0.0, -18.0],
    [-0.2, 0.16, 0.41, -0.22, 0.0, 18.0],
    [0.1, 0.21, 0.25, 0.0, 0.35, 0.0],
    [0.1, 0.046, 0.046, 0.0, 0.1, 0.0],
    [0.1, 0.046, 0.046, 0.0, -0.1, 0.0],
    [0.1, 0.046, 0.023, -0.08, -0.605, 0.0],
    [0.1, 0.023, 0.023, 0.0, -0.606, 0.0],
    [0.1, 0.023, 0.046, 0.06, -0.605, 0.0],
])

DIRECTIONAL_ANGLES = (0.0, 22.5, 45.0, 67.5, 90.0, 112.5, 135.0, 157.5)


def _shepp_logan(N: int) -> np.ndarray:
    # pixel centres on [-1, 1], y pointing up
    coords = (np.arange(N) - (N - 1) / 2) / (N / 2)
    x = coords[None, :]
    y = -coords[:, None]
    img = np.zeros((N, N))
    for rho, a, b, x0, y0, deg in _SHEPP_LOGAN:
        t = np.deg2rad(deg)
        xr = (x - x0) * np.cos(t) + (y - y0) * np.sin(t)
        yr = -(x - x0) * np.sin(t) + (y - y0) * np.cos(t)
        img[(xr / a) ** 2 + (yr / b) ** 2 <= 1.0] += rho
    return img


def _directional_grid(N: int, period: float = 8.0) -> np.ndarray:
    """Tiles of sinusoidal stripes, one stripe angle per tile (cycling through
    :data:`DIRECTIONAL_ANGLES`, row-major over a 4x4 tile grid).

    Smooth profiles avoid the staircase artefacts of binary stripes at
    oblique angles, which make many orderings compress equally well.
    """
    tiles = 4
    img = np.zeros((N, N))
    edges = np.linspace(0, N, tiles + 1).round().astype(int)
    rr, cc = np.mgrid[0:N, 0:N].astype(float)
    for k in range(tiles * tiles):
        ti, tj = divmod(k, tiles)
        deg = DIRECTIONAL_ANGLES[k % len(DIRECTIONAL_ANGLES)]
        t = np.deg2rad(deg)
        # stripes run along angle t (counter-clockwise, y up): distance across them
        dist = rr * np.cos(t) + cc * np.sin(t)
        stripes = 0.5 + 0.5 * np.cos(2 * np.pi * dist / period)
        sl = np.s_[edges[ti]:edges[ti + 1], edges[tj]:edges[tj + 1]]
        img[sl] = 0.25 + 0.75 * stripes[sl]
    return img


def make_phantom(N: int, kind: str = "shepp_logan") -> np.ndarray:
    """Deterministic real-valued ``N x N`` phantom with peak magnitude 1.

    ``kind`` is ``"shepp_logan"`` (modified 10-ellipse head phantom) or
    ``"directional_grid"`` (stripe tiles at several angles).
    """
    if N < 32:
        raise ConfigError(f"phantom size must be at least 32, got {N}")
    if kind == "shepp_logan":
        img = _shepp_logan(N)
    elif kind == "directional_grid":
        img = _directional_grid(N)
    else:
        raise ConfigError(f"unknown phantom kind {kind!r}")
    img = img / np.abs(img).max()
    return img.astype(np.complex128)


def directional_tile(N: int, angle_deg: float) -> tuple[slice, slice]:
    """Pixel slices of the first directional-grid tile holding stripes at ``angle_deg``."""
    k = DIRECTIONAL_ANGLES.index(angle_deg)
    edges = np.linspace(0, N, 5).round().astype(int)
    ti, tj = divmod(k, 4)
    return slice(edges[ti], edges[ti + 1]), slice(edges[tj], edges[tj + 1])
