"""Orthogonal dictionary learning by hard thresholding and SVD updates.

Each dictionary ``D`` is a square unitary ``n*n x n*n`` matrix whose columns
are atoms. Training alternates

    A <- H_eta(D^H X)          (sparse coding)
    D <- P V^H,  X A^H = P S V^H   (orthogonal Procrustes update)

which never increases ``||X - D A||_F^2 + eta^2 ||A||_0``.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.fft import dct

from fdlcp.direction import ClassMap
from fdlcp.errors import ConfigError, InputError
from fdlcp.image import PatchConfig, as_image, extract_patches

logger = logging.getLogger(__name__)


def haar_matrix(m: int) -> np.ndarray:
    """Orthonormal full-depth 1D Haar analysis matrix (rows are basis vectors)."""
    if m < 1 or m & (m - 1):
        raise ConfigError(f"Haar size must be a power of two, got {m}")
    H = np.ones((1, 1))
    while H.shape[0] < m:
        k = H.shape[0]
        H = np.vstack([np.kron(H, [1.0, 1.0]), np.kron(np.eye(k), [1.0, -1.0])]) / math.sqrt(2.0)
    return H


def haar2d_dictionary(n: int) -> np.ndarray:
    """Tensor-product 2D Haar dictionary for row-major ``n x n`` patches."""
    H = haar_matrix(n)
    return np.kron(H, H).T.astype(np.complex128)


def dct2d_dictionary(n: int) -> np.ndarray:
    """Orthonormal type-II 2D DCT dictionary for row-major ``n x n`` patches."""
    C = dct(np.eye(n), norm="ortho", axis=0)
    return np.kron(C, C).T.astype(np.complex128)


def hard_threshold(c, eta: float):
    """Keep entries with ``|c| >= eta``, zero the rest."""
    c = np.asarray(c)
    return np.where(np.abs(c) >= eta, c, 0)


def sparse_code(D: np.ndarray, X: np.ndarray, eta: float) -> np.ndarray:
    if D.shape[0] != X.shape[0]:
        raise InputError(f"dictionary rows {D.shape[0]} != patch length {X.shape[0]}")
    return hard_threshold(D.conj().T @ X, eta)


def objective(D: np.ndarray, X: np.ndarray, A: np.ndarray, eta: float) -> float:
    r = X - D @ A
    return float(np.vdot(r, r).real + eta**2 * np.count_nonzero(A))


def _phase_normalize(P: np.ndarray, V: np.ndarray) -> None:
    """Rotate paired singular vectors so the largest entry of each column of
    ``P`` is real positive. Leaves ``P S V^H`` unchanged."""
    k = np.argmax(np.abs(P), axis=0)
    ph = P[k, np.arange(P.shape[1])]
    ph = ph / np.abs(ph)
    P *= ph.conj()[None, :]
    V *= ph.conj()[None, :]


def _complete_basis(B: np.ndarray, m: int) -> np.ndarray:
    """Extend orthonormal columns ``B`` to a unitary ``m x m`` matrix by
    Gram-Schmidt over the standard basis in ascending order."""
    Q = np.zeros((m, m), dtype=np.complex128)
    k = B.shape[1]
    Q[:, :k] = B
    # residuals of every e_i against span(B), kept current by rank-1 updates
    W = np.eye(m, dtype=np.complex128) - B @ B.conj().T
    for i in range(m):
        if k == m:
            break
        v = W[:, i]
        if np.vdot(v, v).real <= 1e-16:
            continue
        v = v - Q[:, :k] @ (Q[:, :k].conj().T @ v)
        q = v / np.linalg.norm(v)
        Q[:, k] = q
        k += 1
        W[:, i + 1:] -= q[:, None] * (q.conj() @ W[:, i + 1:])[None, :]
    return Q


def update_dictionary(X: np.ndarray, A: np.ndarray, rtol: float = 1e-12) -> np.ndarray:
    """Unitary ``D`` minimising ``||X - D A||_F`` (orthogonal Procrustes).

    Rank-deficient ``X A^H`` is handled by completing the singular vector
    bases deterministically, so the result is always unitary.
    """
    M = X @ A.conj().T
    P, s, Vh = np.linalg.svd(M)
    V = Vh.conj().T
    m = M.shape[0]
    r = int(np.sum(s > rtol * max(s[0], np.finfo(float).tiny))) if s.size else 0
    if r == 0:
        return np.eye(m, dtype=np.complex128)
    if r < m:
        P, V = P[:, :r].copy(), V[:, :r].copy()
        _phase_normalize(P, V)
        P, V = _complete_basis(P, m), _complete_basis(V, m)
    else:
        _phase_normalize(P, V)
    return P @ V.conj().T


@dataclass(frozen=True)
class TrainConfig:
    eta: float = 0.2
    max_iterations: int = 20
    tol: float = 1e-4

    def __post_init__(self):
        if self.eta <= 0 or self.max_iterations < 1 or self.tol <= 0:
            raise ConfigError(f"invalid training config {self}")


@dataclass
class TrainResult:
    D: np.ndarray
    objectives: list[float]
    converged: bool

    @property
    def iterations(self) -> int:
        return len(self.objectives)


def train_class_dictionary(X: np.ndarray, cfg: TrainConfig = TrainConfig(),
                           D_init: np.ndarray | None = None) -> TrainResult:
    """Alternate sparse coding and dictionary updates on patch columns ``X``.

    ``objectives[k]`` is the penalised objective after alternation ``k + 1``.
    """
    X = np.asarray(X, dtype=np.complex128)
    m = X.shape[0]
    D = haar2d_dictionary(int(math.isqrt(m))) if D_init is None else np.asarray(D_init, dtype=np.complex128)
    if X.shape[1] == 0:
        return TrainResult(D=D, objectives=[], converged=True)
    objectives: list[float] = []
    converged = False
    prev = None
    for _ in range(cfg.max_iterations):
        A = sparse_code(D, X, cfg.eta)
        if not np.any(A):
            # nothing survives the threshold: X A^H = 0, keep D
            objectives.append(objective(D, X, A, cfg.eta))
            converged = True
            break
        D = update_dictionary(X, A)
        f = objective(D, X, A, cfg.eta)
        objectives.append(f)
        if prev is not None and abs(prev - f) <= cfg.tol * max(prev, np.finfo(float).tiny):
            converged = True
            break
        prev = f
    return TrainResult(D=D, objectives=objectives, converged=converged)


@dataclass
class DictionaryBank:
    """One unitary dictionary per populated direction class.

    Classes without trained entries fall back to the 2D Haar dictionary.
    """

    n: int
    Q: int
    eta: float
    dictionaries: dict[int, np.ndarray] = field(default_factory=dict)
    meta: dict[int, dict] = field(default_factory=dict)

    def __post_init__(self):
        self._haar = haar2d_dictionary(self.n)

    def __getitem__(self, q: int) -> np.ndarray:
        return self.dictionaries.get(q, self._haar)

    @property
    def populated(self) -> list[int]:
        return sorted(self.dictionaries)


def train_bank(image, class_map: ClassMap, pcfg: PatchConfig = PatchConfig(),
               tcfg: TrainConfig = TrainConfig(), normalize: bool = True,
               workers: int = 1) -> DictionaryBank:
    """Train one dictionary per populated class from the patches of ``image``.

    Patches are divided by the image's peak magnitude when ``normalize`` is
    set, so ``eta`` is relative to a unit-peak image.
    """
    img = as_image(image)
    P = extract_patches(img, pcfg)
    if len(P) != class_map.J:
        raise InputError(f"class map has {class_map.J} patches, image yields {len(P)}")
    peak = np.abs(img).max()
    if normalize and peak > 0:
        P = P / peak
    groups = class_map.groups()
    D0 = haar2d_dictionary(pcfg.n)

    def run(q: int) -> tuple[int, TrainResult]:
        X = P[groups[q]].T
        if not np.any(X):
            return q, TrainResult(D=D0, objectives=[], converged=True)
        return q, train_class_dictionary(X, tcfg, D0)

    classes = sorted(groups)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = dict(pool.map(run, classes))
    else:
        results = dict(map(run, classes))

    bank = DictionaryBank(n=pcfg.n, Q=class_map.Q, eta=tcfg.eta)
    for q in classes:
        res = results[q]
        bank.dictionaries[q] = res.D
        bank.meta[q] = {
            "patches": int(len(groups[q])),
            "iterations": res.iterations,
            "objective": res.objectives[-1] if res.objectives else None,
            "converged": res.converged,
        }
    logger.debug("trained %d class dictionaries", len(classes))
    return bank


def single_class_map(J: int, Q: int = 1) -> ClassMap:
    """Class map putting every patch in class 0 (plain single-dictionary learning)."""
    return ClassMap(labels=np.zeros(J, dtype=np.int64), Q=Q)
