import math

import numpy as np
import pytest

from squats.baselines import (FISTA, QIHT, CsBaselineConfig, cs_encode, cs_recover,
                              direct_quantize, distributed_sensing, fista_recover,
                              hard_threshold, lambda_grid, measurement_grid, qiht_recover,
                              soft_threshold, spectral_norm_sq)
from squats.errors import FeasibilityError


def test_direct_one_bit_gaussian_mse():
    x = np.random.default_rng(0).standard_normal(200_000)
    err = (x - direct_quantize(x, 1.0)) ** 2
    # one-bit Lloyd-Max quantizer of N(0, 1): centroids +-sqrt(2/pi)
    assert abs(err.mean() - (1 - 2 / math.pi)) <= 3 * err.std() / math.sqrt(x.size)


def test_direct_zero_signal_costs_the_cell_value():
    out = direct_quantize(np.zeros(10), 1.0)
    assert np.allclose(out ** 2, 2 / math.pi)
    mid = direct_quantize(np.zeros(4), 2.5, reproduction="midpoint")
    assert np.allclose(np.abs(mid), 0.5)   # floor(2.5) = 2 bits: cells of width 1


def test_direct_high_rate_is_nearly_exact():
    x = np.random.default_rng(1).uniform(-1.9, 1.9, 1000)
    assert np.mean((x - direct_quantize(x, 16.0, reproduction="midpoint")) ** 2) < 1e-6


def test_direct_rejects_sub_bit_rates():
    with pytest.raises(FeasibilityError):
        direct_quantize(np.zeros(3), 0.99)
    with pytest.raises(ValueError):
        direct_quantize(np.zeros(3), 2, reproduction="mode")


def test_cs_config_bit_accounting():
    cfg = CsBaselineConfig(m=18, b=100)
    assert cfg.bits_per_measurement == 5 and cfg.n_levels == 32
    assert cfg.bits_used == 90 <= cfg.b
    with pytest.raises(FeasibilityError):
        CsBaselineConfig(m=101, b=100)
    with pytest.raises(ValueError):
        CsBaselineConfig(m=0, b=100)


def test_measurement_grid():
    assert measurement_grid(3, 100) == [18, 24, 30, 36, 42, 48, 54, 60]
    assert measurement_grid(3, 40) == [18, 24, 30, 36]
    assert measurement_grid(3, 10) == []


def test_cs_encode_zero_and_column_norms():
    cfg = CsBaselineConfig(m=400, b=1600)
    idx = cs_encode(np.zeros(50), cfg)
    assert np.all(cfg.dequantize(idx) == cfg.dequantize(cfg.quantize(np.zeros(1)))[0])
    norms = np.linalg.norm(cfg.sensing_matrix(50), axis=0)
    # chi with 400 degrees of freedom: sd about 0.71 around sqrt(400)
    assert np.all(np.abs(norms - 20) < 4)


def test_spectral_norm_matches_svd():
    A = np.random.default_rng(2).standard_normal((30, 80))
    assert spectral_norm_sq(A) == pytest.approx(np.linalg.norm(A, 2) ** 2, rel=1e-6)
    assert spectral_norm_sq(np.zeros((3, 4))) == 0.0


def test_thresholds():
    x = np.array([0.5, -3.0, 3.0, 1.0])
    assert np.array_equal(hard_threshold(x, 2), [0, -3.0, 3.0, 0])
    assert not hard_threshold(x, 0).any()
    assert np.allclose(soft_threshold(x, 1.0), [0, -2.0, 2.0, 0])


def test_qiht_trivial_and_sparsity():
    cfg = CsBaselineConfig(m=30, b=120)
    A = cfg.sensing_matrix(60)
    s = np.zeros(60)
    s[[4, 40]] = [1.0, -0.7]
    idx = cs_encode(s, cfg, A)
    assert not qiht_recover(idx, A, 0, cfg).any()
    x, info = qiht_recover(idx, A, 2, cfg, return_info=True)
    assert np.count_nonzero(x) <= 2
    assert info["step"] == pytest.approx(1 / spectral_norm_sq(A))
    assert not info["diverged"]


def test_qiht_recovers_support_at_fine_resolution():
    rng = np.random.default_rng(3)
    T, k = 100, 3
    hits = 0
    for t in range(100):
        cfg = CsBaselineConfig(m=20 * k, b=20 * k * 16, sensing_seed=t, lo=-10, hi=10)
        s = np.zeros(T)
        s[rng.choice(T, k, replace=False)] = rng.standard_normal(k)
        x = cs_recover(s, cfg, k)
        if set(np.flatnonzero(x)) == set(np.flatnonzero(s)):
            hits += 1
            # on the right support the only error left is the cell width
            assert np.max(np.abs(x - s)) < 1e-3
    # the fixed step 1/||A||^2 leaves some trials at a wrong fixed point
    assert hits >= 75


def test_qiht_divergence_guard():
    cfg = CsBaselineConfig(m=20, b=80)
    A = cfg.sensing_matrix(40)
    s = np.zeros(40)
    s[3] = 1.0
    x, info = qiht_recover(cs_encode(s, cfg, A), A, 2, cfg, step=50.0, return_info=True)
    assert info["diverged"] and np.all(np.isfinite(x))


def test_fista_limits():
    rng = np.random.default_rng(4)
    A = rng.standard_normal((40, 10))
    y = rng.standard_normal(40)
    assert not fista_recover(y, A, lam=1e6).any()
    ls = np.linalg.lstsq(A, y, rcond=None)[0]
    assert np.allclose(fista_recover(y, A, lam=0.0, iters=3000), ls, atol=1e-5)


def test_fista_objective_monotone():
    rng = np.random.default_rng(5)
    A = rng.standard_normal((20, 60))
    y = rng.standard_normal(20)
    _, info = fista_recover(y, A, lam=0.3, iters=200, return_info=True)
    h = np.array(info["objective"])
    assert np.all(np.diff(h) <= 1e-12)


def test_fista_config_and_lambda_grid():
    cfg = CsBaselineConfig(m=40, b=320, recovery=FISTA(iters=200))
    s = np.zeros(50)
    s[7] = 1.5
    x = cs_recover(s, cfg, 1)
    assert np.argmax(np.abs(x)) == 7
    A = cfg.sensing_matrix(50)
    yhat = cfg.dequantize(cs_encode(s, cfg, A))
    g = lambda_grid(yhat, A)
    assert g[2] == pytest.approx(0.1 * np.max(np.abs(A.T @ yhat)))
    with pytest.raises(TypeError):
        cs_recover(s, CsBaselineConfig(m=4, b=8, recovery="lasso"), 1)
    assert isinstance(CsBaselineConfig(m=4, b=8).recovery, QIHT)


def test_distributed_sensing_is_block_diagonal():
    A = distributed_sensing(3, 5, 7, seed=0)
    assert A.shape == (6, 15)
    assert not A[0:2, 5:].any() and not A[2:4, :5].any() and not A[4:6, :10].any()
    assert distributed_sensing(4, 5, 2, seed=0).shape == (4, 20)
