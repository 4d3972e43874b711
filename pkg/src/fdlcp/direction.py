"""Geometric direction candidates and per-patch direction estimation.

A candidate direction is a line through the patch centre. Pixels are
projected onto the orthogonal line and read out in order of the projected
coordinate, turning the patch into a 1D signal. The direction whose signal
is best compressed by a 1D Haar transform (smallest energy outside the
largest quarter of coefficients) is the patch's direction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from fdlcp.errors import ConfigError
from fdlcp.image import PatchConfig, as_image, extract_patches


def projection_order(n: int, theta: float) -> np.ndarray:
    """Pixel read-out order for a direction line at angle ``theta``.

    ``theta`` is measured counter-clockwise from the horizontal with the
    image y-axis pointing up. Pixels are sorted by ``r cos(theta) + c
    sin(theta)`` (their coordinate across the line), ties by row-major index,
    so ``theta = 0`` reads the patch row by row and ``theta = pi/2`` column
    by column.
    """
    r, c = np.divmod(np.arange(n * n), n)
    proj = (r - (n - 1) / 2) * math.cos(theta) + (c - (n - 1) / 2) * math.sin(theta)
    return np.lexsort((np.arange(n * n), proj))


def critical_angles(n: int) -> np.ndarray:
    """Sorted angles in ``[0, pi)`` where the projection order of an ``n x n``
    patch changes: the directions of all pixel-centre difference vectors."""
    dirs = set()
    for dr in range(0, n):
        for dc in range(-(n - 1), n):
            if (dr, dc) == (0, 0) or math.gcd(dr, abs(dc)) != 1:
                continue
            if dr == 0 and dc < 0:
                continue
            # difference (dr down, dc right) seen with y up: angle of (dc, -dr)
            dirs.add(math.atan2(-dr, dc) % math.pi)
    return np.array(sorted(dirs))


@dataclass(frozen=True)
class DirectionSet:
    """Candidate reorderings for ``n x n`` patches.

    ``perms[q]`` is the read-out order of candidate ``q``; ``angles[q]`` is a
    representative angle strictly between two consecutive critical angles.
    """

    n: int
    angles: np.ndarray
    perms: np.ndarray = field(repr=False)

    @property
    def Q(self) -> int:
        return len(self.angles)


def build_direction_set(n: int = 8) -> DirectionSet:
    """All distinct projection orders between consecutive critical angles.

    The open intervals between sorted critical angles on ``[0, pi)`` each
    yield one ordering; for ``n = 8`` there are 71. Candidate 0 (just above
    the horizontal) is the row-major identity order.
    """
    if n < 2:
        raise ConfigError(f"direction set needs n >= 2, got {n}")
    crit = critical_angles(n)
    mids = 0.5 * (crit[:-1] + crit[1:])
    perms = np.stack([projection_order(n, t) for t in mids])
    return DirectionSet(n=n, angles=mids, perms=perms)


def reorder(patch, q: int, ds: DirectionSet) -> np.ndarray:
    """Apply candidate ``q``'s permutation to a patch vector (or rows of a matrix)."""
    if not 0 <= q < ds.Q:
        raise ConfigError(f"direction index {q} out of range [0, {ds.Q})")
    return np.asarray(patch)[..., ds.perms[q]]


def haar_1d(v: np.ndarray) -> np.ndarray:
    """Full-depth orthonormal 1D Haar transform along the last axis.

    The length must be a power of two. Output is ``[approx, coarsest detail,
    ..., finest details]``.
    """
    v = np.asarray(v)
    m = v.shape[-1]
    if m & (m - 1):
        raise ConfigError(f"Haar length must be a power of two, got {m}")
    out = np.empty(v.shape, dtype=np.result_type(v, np.float64))
    s = 1.0 / math.sqrt(2.0)
    a = v
    end = m
    while a.shape[-1] > 1:
        even, odd = a[..., 0::2], a[..., 1::2]
        half = a.shape[-1] // 2
        out[..., end - half:end] = (even - odd) * s
        a = (even + odd) * s
        end -= half
    out[..., 0] = a[..., 0]
    return out


def retained_count(n: int, keep: float = 0.25) -> int:
    return math.ceil(keep * n * n)


def direction_residuals(patches, ds: DirectionSet, keep: float = 0.25) -> np.ndarray:
    """Compression residual of every patch (rows) under every candidate.

    Returns an array of shape ``(J, Q)``: the energy of the Haar coefficients
    left out when only the ``ceil(keep * n*n)`` largest are retained.
    """
    P = np.atleast_2d(np.asarray(patches))
    nn = ds.n * ds.n
    if P.shape[-1] != nn:
        raise ConfigError(f"patch length {P.shape[-1]} does not match direction set n={ds.n}")
    drop = nn - retained_count(ds.n, keep)
    res = np.empty((P.shape[0], ds.Q))
    for q in range(ds.Q):
        energy = np.abs(haar_1d(P[:, ds.perms[q]])) ** 2
        # sorted energies are order-independent, so tied candidates tie exactly
        res[:, q] = np.sort(energy, axis=1)[:, :drop].sum(axis=1)
    return res


def estimate_direction(patch, ds: DirectionSet, keep: float = 0.25) -> int:
    """Index of the best-compressing candidate; ties go to the lowest index."""
    return int(np.argmin(direction_residuals(np.ravel(patch)[None, :], ds, keep)[0]))


@dataclass(frozen=True)
class ClassMap:
    """Direction class of every patch, in patch order."""

    labels: np.ndarray
    Q: int

    def members(self, q: int) -> np.ndarray:
        return np.flatnonzero(self.labels == q)

    def groups(self) -> dict[int, np.ndarray]:
        """Patch indices for every populated class, keyed by class."""
        order = np.argsort(self.labels, kind="stable")
        classes, starts = np.unique(self.labels[order], return_index=True)
        bounds = list(starts[1:]) + [len(order)]
        return {int(c): order[s:e] for c, s, e in zip(classes, starts, bounds)}

    @property
    def J(self) -> int:
        return len(self.labels)


def classify_patches(image, cfg: PatchConfig, ds: DirectionSet, magnitude: bool = False,
                     chunk: int = 4096) -> ClassMap:
    """Estimate the direction of every patch of ``image``.

    With ``magnitude=True`` directions are estimated on ``|image|`` instead of
    the complex values.
    """
    img = as_image(image)
    if cfg.n != ds.n:
        raise ConfigError(f"patch size {cfg.n} does not match direction set n={ds.n}")
    if magnitude:
        img = np.abs(img).astype(np.complex128)
    P = extract_patches(img, cfg)
    labels = np.empty(P.shape[0], dtype=np.int64)
    for s in range(0, P.shape[0], chunk):
        labels[s:s + chunk] = np.argmin(direction_residuals(P[s:s + chunk], ds), axis=1)
    return ClassMap(labels=labels, Q=ds.Q)
