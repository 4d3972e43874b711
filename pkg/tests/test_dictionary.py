import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import unitary_group

from fdlcp.dictionary import (
    DictionaryBank,
    TrainConfig,
    dct2d_dictionary,
    haar2d_dictionary,
    haar_matrix,
    hard_threshold,
    objective,
    single_class_map,
    sparse_code,
    train_bank,
    train_class_dictionary,
    update_dictionary,
)
from fdlcp.direction import ClassMap, build_direction_set, classify_patches
from fdlcp.errors import ConfigError, InputError
from fdlcp.image import PatchConfig, make_phantom


def crand(rng, *shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def unitary_err(D):
    return np.linalg.norm(D.conj().T @ D - np.eye(D.shape[0]))


def test_haar_closed_form():
    s = 1 / math.sqrt(2)
    np.testing.assert_allclose(haar_matrix(2), [[s, s], [s, -s]])
    H4 = haar_matrix(4)
    np.testing.assert_allclose(H4[0], [0.5] * 4)
    np.testing.assert_allclose(H4[1], [0.5, 0.5, -0.5, -0.5])
    np.testing.assert_allclose(H4[2], [s, -s, 0, 0])
    with pytest.raises(ConfigError):
        haar_matrix(6)


@pytest.mark.parametrize("build", [haar2d_dictionary, dct2d_dictionary])
def test_fixed_dictionaries_unitary(build):
    D = build(8)
    assert D.shape == (64, 64)
    assert unitary_err(D) < 1e-12
    # first atom is the flat patch
    np.testing.assert_allclose(np.abs(D[:, 0]), 1 / 8, atol=1e-12)


def test_hard_threshold_examples():
    c = np.array([0.1, -0.2, 0.3j, 0.19 + 0.0j, -1.0])
    out = hard_threshold(c, 0.2)
    np.testing.assert_array_equal(out, [0, -0.2, 0.3j, 0, -1.0])


def test_sparse_code_scalar_oracle():
    rng = np.random.default_rng(0)
    D = unitary_group.rvs(16, random_state=1)
    X = crand(rng, 16, 30)
    A = sparse_code(D, X, 0.9)
    for i in range(16):
        for j in range(30):
            c = sum(D[k, i].conjugate() * X[k, j] for k in range(16))
            expected = c if abs(c) >= 0.9 else 0
            assert abs(A[i, j] - expected) < 1e-12
    with pytest.raises(InputError):
        sparse_code(D, X[:8], 0.1)


def test_update_recovers_random_unitary():
    # X = D A with A full rank: the Procrustes solution is D itself
    rng = np.random.default_rng(2)
    worst = 0.0
    for seed in range(1000):
        D = unitary_group.rvs(4, random_state=seed)
        A = crand(rng, 4, 6)
        worst = max(worst, np.linalg.norm(update_dictionary(D @ A, A) - D))
    assert worst < 1e-10


def test_update_identity_case():
    rng = np.random.default_rng(3)
    U = unitary_group.rvs(8, random_state=4)
    X = U
    A = U  # X A^H = I
    D = update_dictionary(X, A)
    np.testing.assert_allclose(D, np.eye(8), atol=1e-12)
    assert unitary_err(update_dictionary(crand(rng, 8, 3), crand(rng, 8, 3))) < 1e-12
    np.testing.assert_array_equal(update_dictionary(np.zeros((4, 2)), np.zeros((4, 2))), np.eye(4))


def test_update_is_optimal_among_unitaries():
    rng = np.random.default_rng(5)
    X, A = crand(rng, 6, 20), crand(rng, 6, 20)
    D = update_dictionary(X, A)
    best = np.linalg.norm(X - D @ A)
    for seed in range(200):
        U = unitary_group.rvs(6, random_state=seed)
        assert best <= np.linalg.norm(X - U @ A) + 1e-9


@pytest.mark.parametrize("seed", range(20))
def test_training_monotone_and_unitary(seed):
    rng = np.random.default_rng(seed)
    X = crand(rng, 16, 200) * rng.uniform(0.05, 1.0)
    res = train_class_dictionary(X, TrainConfig(eta=0.2, max_iterations=20))
    assert unitary_err(res.D) < 1e-10
    f = res.objectives
    assert all(b <= a + 1e-12 for a, b in zip(f, f[1:]))
    assert 1 <= res.iterations <= 20


def test_training_fixed_point():
    # patches already sparse in the 2D Haar basis: Haar is a fixed point
    D = haar2d_dictionary(4)
    rng = np.random.default_rng(6)
    A = np.zeros((16, 50), dtype=complex)
    A[rng.integers(0, 16, 50), np.arange(50)] = 1 + rng.uniform(size=50)
    res = train_class_dictionary(D @ A, TrainConfig(eta=0.2), D_init=D)
    assert res.converged
    assert res.objectives[-1] == pytest.approx(0.2**2 * 50, abs=1e-9)
    Xhat = res.D @ sparse_code(res.D, D @ A, 0.2)
    np.testing.assert_allclose(Xhat, D @ A, atol=1e-10)


def test_all_below_threshold_keeps_initial():
    X = np.full((16, 10), 1e-3, dtype=complex)
    res = train_class_dictionary(X, TrainConfig(eta=0.2))
    np.testing.assert_array_equal(res.D, haar2d_dictionary(4))
    assert res.converged
    assert res.objectives == [pytest.approx(np.vdot(X, X).real)]


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0.1, 10))
def test_homogeneity(seed, alpha):
    # scaling data and threshold together leaves the dictionary unchanged
    rng = np.random.default_rng(seed)
    X = crand(rng, 4, 40)
    a = train_class_dictionary(X, TrainConfig(eta=0.5, max_iterations=5))
    b = train_class_dictionary(alpha * X, TrainConfig(eta=0.5 * alpha, max_iterations=5))
    if a.iterations == b.iterations:
        np.testing.assert_allclose(a.D, b.D, atol=1e-8)


def test_objective_value():
    D = np.eye(2)
    X = np.array([[1.0], [0.1]])
    A = np.array([[1.0], [0.0]])
    assert objective(D, X, A, 0.2) == pytest.approx(0.01 + 0.04)


@pytest.fixture(scope="module")
def phantom_bank():
    img = make_phantom(32)
    ds = build_direction_set(8)
    cm = classify_patches(img, PatchConfig(), ds)
    return img, cm, train_bank(img, cm)


def test_bank_unitary_and_meta(phantom_bank):
    img, cm, bank = phantom_bank
    assert bank.Q == 71
    assert bank.populated == sorted(cm.groups())
    for q in bank.populated:
        assert unitary_err(bank[q]) < 1e-10
        assert bank.meta[q]["patches"] == len(cm.members(q))
    missing = next(q for q in range(71) if q not in bank.dictionaries)
    np.testing.assert_array_equal(bank[missing], haar2d_dictionary(8))


def test_bank_deterministic_and_parallel(phantom_bank):
    img, cm, bank = phantom_bank
    again = train_bank(img, cm)
    par = train_bank(img, cm, workers=4)
    for q in bank.populated:
        assert again[q].tobytes() == bank[q].tobytes()
        np.testing.assert_allclose(par[q], bank[q], rtol=0, atol=1e-12)


def test_bank_class_relabel_invariance(phantom_bank):
    # a class's dictionary depends only on its own patches
    img, cm, bank = phantom_bank
    q = max(bank.populated, key=lambda k: bank.meta[k]["patches"])
    labels = np.where(cm.labels == q, q, (cm.labels + 1) % 71)
    labels[(labels == q) & (cm.labels != q)] = (q + 2) % 71
    other = train_bank(img, ClassMap(labels=labels, Q=71))
    assert other[q].tobytes() == bank[q].tobytes()


def test_bank_constant_image():
    img = np.full((16, 16), 0.5 + 0j)
    bank = train_bank(img, single_class_map(256))
    assert unitary_err(bank[0]) < 1e-10
    with pytest.raises(InputError):
        train_bank(img, single_class_map(10))


def test_bank_zero_image_keeps_haar():
    bank = train_bank(np.zeros((16, 16)), single_class_map(256))
    np.testing.assert_array_equal(bank[0], haar2d_dictionary(8))


def test_train_config_invalid():
    with pytest.raises(ConfigError):
        TrainConfig(eta=0)
    assert isinstance(DictionaryBank(n=2, Q=3, eta=0.2)[1], np.ndarray)
