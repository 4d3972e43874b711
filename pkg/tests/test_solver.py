import math

import numpy as np
import pytest
from scipy.stats import unitary_group

from fdlcp.dictionary import DictionaryBank
from fdlcp.direction import ClassMap
from fdlcp.errors import ConfigError
from fdlcp.frame import AnalysisOperator
from fdlcp.image import PatchConfig, make_phantom
from fdlcp.sampling import adjoint, encode, fft2c, make_cartesian_mask, make_random2d_mask
from fdlcp.solver import (
    AdmmState,
    PipelineConfig,
    SolverConfig,
    admm_reconstruct,
    reconstruct,
    soft_threshold,
    update_a,
    update_x,
)
from fdlcp.wavelet import SIDWT


def crand(rng, *shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


class Identity:
    def analyze(self, x):
        return np.asarray(x, dtype=complex).copy()

    def synthesize(self, a):
        return np.asarray(a, dtype=complex).copy()


def small_operator(seed, shape=(8, 8), n=2, Q=3):
    rng = np.random.default_rng(seed)
    bank = DictionaryBank(n=n, Q=Q, eta=0.2)
    for q in range(Q):
        bank.dictionaries[q] = unitary_group.rvs(n * n, random_state=seed * 10 + q)
    cm = ClassMap(labels=rng.integers(0, Q, shape[0] * shape[1]), Q=Q)
    return AnalysisOperator(bank, cm, shape, PatchConfig(n=n))


def dense_matrix(fn, shape):
    N = shape[0] * shape[1]
    cols = []
    for i in range(N):
        e = np.zeros(N, dtype=complex)
        e[i] = 1
        cols.append(np.asarray(fn(e.reshape(shape))).ravel())
    return np.array(cols).T


def test_soft_threshold_examples():
    np.testing.assert_allclose(soft_threshold(np.array([3 + 4j]), 1.0), [2.4 + 3.2j])
    np.testing.assert_array_equal(soft_threshold(np.array([0.5, -0.2j, 0]), 1.0), [0, 0, 0])
    np.testing.assert_allclose(soft_threshold(np.array([-2.0]), 0.5), [-1.5])


def test_update_a_examples():
    st = AdmmState(x=np.zeros((1, 1)), a=None, d=np.array([[0.0]]), h=None, Phix=np.array([[0.5]]))
    np.testing.assert_allclose(update_a(st, None, SolverConfig(beta=4.0)), [[0.25]])
    st.Phix = np.array([[0.99, 1.0, -1.5j]])
    st.d = np.zeros((1, 3))
    out = update_a(st, None, SolverConfig(beta=2.0, penalty="l0"))
    np.testing.assert_array_equal(out, [[0, 1.0, -1.5j]])


@pytest.mark.parametrize("seed", range(5))
def test_update_x_dense_oracle(seed):
    rng = np.random.default_rng(seed)
    op = small_operator(seed)
    mask = make_random2d_mask(8, 8, 0.4, seed=seed + 1)
    cfg = SolverConfig(lam=3.0, beta=0.7)
    y = np.where(mask, crand(rng, 8, 8), 0)
    st = AdmmState(x=None, a=crand(rng, 64, 4), d=crand(rng, 64, 4), h=np.where(mask, crand(rng, 8, 8), 0))
    Fu = dense_matrix(lambda e: np.where(mask, fft2c(e), 0), (8, 8))
    Phi = dense_matrix(op.analyze, (8, 8))
    # normal equations of lam/2 ||F_U x - y - h||^2 + beta/2 ||Phi x - a - d||^2
    lhs = cfg.lam * Fu.conj().T @ Fu + cfg.beta * Phi.conj().T @ Phi
    rhs = cfg.lam * Fu.conj().T @ (y + st.h).ravel() + cfg.beta * Phi.conj().T @ (st.a + st.d).ravel()
    x_dense = np.linalg.solve(lhs, rhs)
    x = update_x(st, mask, y, op, cfg).ravel()
    assert np.linalg.norm(x - x_dense) <= 1e-8 * np.linalg.norm(x_dense)


def test_update_x_limits():
    rng = np.random.default_rng(9)
    op = small_operator(9)
    mask = make_random2d_mask(8, 8, 0.4, seed=3)
    y = np.where(mask, crand(rng, 8, 8), 0)
    st = AdmmState(x=None, a=crand(rng, 64, 4), d=crand(rng, 64, 4), h=np.zeros((8, 8), complex))
    # lam = 0: x is the frame synthesis of a + d
    x0 = update_x(st, mask, y, op, SolverConfig(lam=0.0, beta=1.0))
    np.testing.assert_allclose(x0, op.synthesize(st.a + st.d), atol=1e-12)
    # beta -> 0: measured samples are matched exactly
    x1 = update_x(st, mask, y, op, SolverConfig(lam=1.0, beta=1e-9))
    np.testing.assert_allclose(encode(x1, mask), y, atol=1e-7)


def test_zero_data_gives_zero():
    mask = make_cartesian_mask(16, 16, 0.5, seed=1)
    x, st = admm_reconstruct(np.zeros((16, 16)), mask, SIDWT((16, 16), 2))
    assert st.converged and st.iteration == 1
    assert np.all(x == 0)


def test_full_mask_converges_fast():
    x = make_phantom(32)
    full = np.ones((32, 32), bool)
    xr, st = admm_reconstruct(encode(x, full), full, SIDWT((32, 32), 2), SolverConfig(max_iterations=5))
    assert st.iteration == 5
    assert np.linalg.norm(xr - x) / np.linalg.norm(x) < 1e-3


def test_residual_trace_and_nonconvergence(caplog):
    x = make_phantom(32)
    mask = make_cartesian_mask(32, 32, 0.4, seed=2)
    y = encode(x, mask)
    _, st = admm_reconstruct(y, mask, SIDWT((32, 32), 2), SolverConfig(max_iterations=3, eps=1e-14))
    assert not st.converged
    assert st.iteration == 3
    assert len(list(st.trace_rows())) == 3
    assert "ADMM stopped" in caplog.text


def test_identity_frame_l1_solution():
    # with Phi = I and a full mask the data term dominates: x -> y
    rng = np.random.default_rng(4)
    x = crand(rng, 8, 8)
    full = np.ones((8, 8), bool)
    xr, st = admm_reconstruct(encode(x, full), full, Identity(), SolverConfig(eps=1e-8))
    assert st.converged
    np.testing.assert_allclose(xr, x, atol=1e-7)


def test_l0_fixed_point():
    # an image whose frame coefficients all exceed the threshold is a fixed point
    full = np.ones((8, 8), bool)
    x = np.full((8, 8), 5.0 + 0j)
    cfg = SolverConfig(penalty="l0", beta=100.0)
    xr, st = admm_reconstruct(encode(x, full), full, Identity(), cfg)
    assert st.converged
    np.testing.assert_allclose(xr, x, atol=1e-10)


def test_config_validation():
    with pytest.raises(ConfigError):
        admm_reconstruct(np.zeros((4, 4)), np.ones((4, 4), bool), Identity(), SolverConfig(beta=0))
    with pytest.raises(ConfigError):
        admm_reconstruct(np.zeros((4, 4)), np.ones((4, 4), bool), Identity(), SolverConfig(penalty="l2"))
    with pytest.raises(ConfigError):
        PipelineConfig(T=-1)
    with pytest.raises(ConfigError):
        reconstruct(np.zeros((32, 32)), np.ones((32, 32), bool), method="magic")
    assert SolverConfig().threshold == pytest.approx(0.01)
    assert SolverConfig(penalty="l0", beta=2.0).threshold == pytest.approx(1.0)


def test_defaults():
    p = PipelineConfig()
    assert (p.T, p.patch.n, p.train.eta, p.solver.eps) == (1, 8, 0.2, 1e-4)
    assert p.sidwt_solver.penalty == "l1"


def test_zerofill_full_mask():
    x = make_phantom(32)
    full = np.ones((32, 32), bool)
    xr, rep = reconstruct(encode(x, full), full, "zerofill")
    np.testing.assert_allclose(xr, x, atol=1e-12)
    assert rep["converged"]


def test_sidwt_scale_equivariance():
    x = make_phantom(32)
    mask = make_cartesian_mask(32, 32, 0.5, seed=3)
    y = encode(x, mask)
    a, _ = reconstruct(y, mask, "sidwt")
    b, _ = reconstruct(7.0 * y, mask, "sidwt")
    np.testing.assert_allclose(b, 7.0 * a, rtol=1e-9, atol=1e-12)
    assert np.linalg.norm(adjoint(y)) > 0
