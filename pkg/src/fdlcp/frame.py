"""Tight frame built from overlapping patches and per-class dictionaries.

Block ``j`` of the coefficients is ``D_{w_j}^H R_j x / sqrt(c)`` with
``c = n*n``; because every ``D`` is unitary and the periodic stride-1 patches
cover each pixel ``c`` times, ``synthesize(analyze(x)) == x``.
"""

from __future__ import annotations

import math

import numpy as np

from fdlcp.dictionary import DictionaryBank
from fdlcp.direction import ClassMap
from fdlcp.errors import ConfigError, InputError
from fdlcp.image import PatchConfig, assemble_adjoint, as_image, patch_index


class AnalysisOperator:
    """Matrix-free analysis/synthesis pair for the patch tight frame.

    Coefficients are a ``(J, n*n)`` array, one row per patch in patch order.
    """

    def __init__(self, bank: DictionaryBank, class_map: ClassMap, shape: tuple[int, int],
                 pcfg: PatchConfig = PatchConfig()):
        if pcfg.stride != 1:
            raise ConfigError("the tight-frame identity needs stride 1")
        if bank.n != pcfg.n:
            raise ConfigError(f"bank patch size {bank.n} != patch config {pcfg.n}")
        self.shape = (int(shape[0]), int(shape[1]))
        self.pcfg = pcfg
        self.index = patch_index(self.shape, pcfg)
        if class_map.J != len(self.index):
            raise ConfigError(f"class map has {class_map.J} patches, expected {len(self.index)}")
        self.bank = bank
        self.class_map = class_map
        self.groups = class_map.groups()
        self.scale = 1.0 / math.sqrt(pcfg.overlap)

    @property
    def coef_shape(self) -> tuple[int, int]:
        return self.index.shape

    def analyze(self, x) -> np.ndarray:
        img = as_image(x)
        if img.shape != self.shape:
            raise ConfigError(f"image shape {img.shape} != operator shape {self.shape}")
        P = img.ravel()[self.index]
        out = np.empty(P.shape, dtype=np.complex128)
        for q, rows in self.groups.items():
            # row form of D^H p
            out[rows] = P[rows] @ self.bank[q].conj()
        out *= self.scale
        return out

    def synthesize(self, a) -> np.ndarray:
        a = np.asarray(a)
        if a.shape != self.index.shape:
            raise InputError(f"coefficient shape {a.shape} != {self.index.shape}")
        P = np.empty(a.shape, dtype=np.complex128)
        for q, rows in self.groups.items():
            P[rows] = a[rows] @ self.bank[q].T
        return assemble_adjoint(P, self.shape, self.pcfg) * self.scale
