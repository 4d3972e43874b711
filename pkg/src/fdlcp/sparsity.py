"""Sparse-approximation decay of patch transforms.

Every patch is analysed with its class dictionary, the largest-magnitude
coefficients over the whole coefficient set are kept, and the image is
resynthesised through the tight frame. Fixed transforms (2D Haar, 2D DCT) use
one dictionary for all patches; ``fdl`` learns a single dictionary from all
patches, ``fdlcp`` one dictionary per direction class.
"""

from __future__ import annotations

import math

import numpy as np

from fdlcp.dictionary import (
    DictionaryBank,
    TrainConfig,
    dct2d_dictionary,
    haar2d_dictionary,
    single_class_map,
    train_bank,
)
from fdlcp.direction import build_direction_set, classify_patches
from fdlcp.errors import ConfigError
from fdlcp.frame import AnalysisOperator
from fdlcp.image import PatchConfig, as_image
from fdlcp.metrics import rlne

TRANSFORMS = ("haar2d", "dct2d", "fdl", "fdlcp")


def transform_operator(image, name: str, pcfg: PatchConfig = PatchConfig(),
                       tcfg: TrainConfig = TrainConfig(), workers: int = 1) -> AnalysisOperator:
    img = as_image(image)
    J = img.shape[0] * img.shape[1]
    if name in ("haar2d", "dct2d"):
        bank = DictionaryBank(n=pcfg.n, Q=1, eta=tcfg.eta)
        bank.dictionaries[0] = haar2d_dictionary(pcfg.n) if name == "haar2d" else dct2d_dictionary(pcfg.n)
        cmap = single_class_map(J)
    elif name == "fdl":
        cmap = single_class_map(J)
        bank = train_bank(img, cmap, pcfg, tcfg, workers=workers)
    elif name == "fdlcp":
        cmap = classify_patches(img, pcfg, build_direction_set(pcfg.n))
        bank = train_bank(img, cmap, pcfg, tcfg, workers=workers)
    else:
        raise ConfigError(f"unknown transform {name!r}; choose from {', '.join(TRANSFORMS)}")
    return AnalysisOperator(bank, cmap, img.shape, pcfg)


def keep_largest(coefs: np.ndarray, fraction: float) -> np.ndarray:
    """Zero all but the ``ceil(fraction * size)`` largest-magnitude entries.

    Ties at the cut are resolved by lower flat index.
    """
    if not 0 < fraction <= 1:
        raise ConfigError(f"fraction must lie in (0, 1], got {fraction}")
    flat = coefs.ravel()
    k = min(flat.size, math.ceil(fraction * flat.size - 1e-9))
    order = np.argsort(-np.abs(flat), kind="stable")
    out = np.zeros_like(flat)
    out[order[:k]] = flat[order[:k]]
    return out.reshape(coefs.shape)


def sparsity_curve(image, op: AnalysisOperator, fractions) -> list[float]:
    img = as_image(image)
    a = op.analyze(img)
    return [rlne(op.synthesize(keep_largest(a, f)), img) for f in fractions]


def sweep(image, transforms=TRANSFORMS, fractions=(0.01, 0.02, 0.05, 0.1, 0.2, 0.5, 1.0),
          pcfg: PatchConfig = PatchConfig(), tcfg: TrainConfig = TrainConfig(),
          workers: int = 1) -> list[tuple[str, float, float]]:
    """Rows ``(transform, fraction, rlne)`` in the given transform/fraction order."""
    rows = []
    for name in transforms:
        op = transform_operator(image, name, pcfg, tcfg, workers)
        for f, e in zip(fractions, sparsity_curve(image, op, fractions)):
            rows.append((name, float(f), e))
    return rows
