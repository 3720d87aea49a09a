"""Reference systems run at the same bit budget as the serial codec.

* direct serial scalar quantization of every sample;
* compress-and-quantize: Gaussian projections, uniform scalar quantization of
  each measurement, and recovery by quantized iterative hard thresholding
  (QIHT) or FISTA.
"""
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import FeasibilityError
from .quantizer import cell_midpoints, gaussian_centroids, uniform_cell

LAMBDA_GRID = (0.01, 0.03, 0.1, 0.3)


def direct_quantize(signal, R, lo=-2.0, hi=2.0, reproduction="centroid"):
    """Quantize each sample with ``2^floor(R)`` uniform cells on ``[lo, hi]``.

    There is no reserved zero level.  ``reproduction="centroid"`` maps each
    decision region (outer ones unbounded) to its standard-Gaussian centroid.
    """
    if R < 1:
        raise FeasibilityError(f"direct quantization needs at least 1 bit per sample, got R={R}")
    n = 2 ** int(math.floor(R))
    if reproduction == "centroid":
        values = gaussian_centroids(n, lo, hi)
    elif reproduction == "midpoint":
        values = cell_midpoints(n, lo, hi)
    else:
        raise ValueError(f"unknown reproduction {reproduction!r}")
    return values[uniform_cell(signal, n, lo, hi)]


@dataclass
class QIHT:
    iters: int = 300
    step: float = None


@dataclass
class FISTA:
    iters: int = 500
    lam: float = None
    lam_factor: float = 0.1


@dataclass
class CsBaselineConfig:
    """Compress-and-quantize settings.

    ``m`` measurements from an i.i.d. N(0, 1) matrix regenerated from
    ``sensing_seed``; each measurement gets ``floor(b / m)`` bits on
    ``[lo, hi]``.
    """

    m: int
    b: int
    sensing_seed: int = 0
    lo: float = -2.0
    hi: float = 2.0
    recovery: object = field(default_factory=QIHT)

    def __post_init__(self):
        if self.m < 1:
            raise ValueError("m must be >= 1")
        if self.b // self.m < 1:
            raise FeasibilityError(f"{self.b} bits cannot give {self.m} measurements one bit each")

    @property
    def bits_per_measurement(self):
        return self.b // self.m

    @property
    def n_levels(self):
        return 2 ** self.bits_per_measurement

    @property
    def bits_used(self):
        return self.m * self.bits_per_measurement

    def sensing_matrix(self, T):
        return np.random.default_rng(self.sensing_seed).standard_normal((self.m, T))

    def quantize(self, v):
        return uniform_cell(v, self.n_levels, self.lo, self.hi)

    def dequantize(self, idx):
        return cell_midpoints(self.n_levels, self.lo, self.hi)[idx]


def cs_encode(signal, cfg, A=None):
    """Cell indices of ``A s``; ``A`` defaults to ``cfg.sensing_matrix(T)``."""
    signal = np.asarray(signal, dtype=float)
    A = cfg.sensing_matrix(signal.size) if A is None else A
    return cfg.quantize(A @ signal)


def spectral_norm_sq(A, iters=100, seed=0):
    """Largest eigenvalue of ``A^T A`` by power iteration."""
    v = np.random.default_rng(seed).standard_normal(A.shape[1])
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(iters):
        w = A.T @ (A @ v)
        lam_new = float(np.linalg.norm(w))
        if lam_new == 0:
            return 0.0
        v = w / lam_new
        if abs(lam_new - lam) <= 1e-10 * lam_new:
            lam = lam_new
            break
        lam = lam_new
    return lam


def hard_threshold(x, k):
    """Keep the ``k`` largest magnitudes (ties broken by lower index)."""
    out = np.zeros_like(x)
    if k <= 0:
        return out
    keep = np.argsort(-np.abs(x), kind="stable")[:k]
    out[keep] = x[keep]
    return out


def qiht_recover(y_idx, A, k, cfg, iters=None, step=None, return_info=False):
    """Quantized iterative hard thresholding.

    ``x <- H_k(x + step * A^T (yhat - Q(A x)))`` where ``yhat`` are the
    dequantized measurements and ``Q`` re-quantizes the current estimate's
    measurements; the residual vanishes once the estimate is consistent with
    every quantization cell.
    """
    rec = cfg.recovery if isinstance(cfg.recovery, QIHT) else QIHT()
    iters = rec.iters if iters is None else iters
    step = step if step is not None else rec.step
    if step is None:
        step = 1.0 / max(spectral_norm_sq(A), 1e-12)
    yhat = cfg.dequantize(np.asarray(y_idx))
    x = np.zeros(A.shape[1])
    info = {"iters": 0, "diverged": False, "step": step}
    if k <= 0:
        return (x, info) if return_info else x
    scale = 10.0 * (np.linalg.norm(yhat) + 1.0) * math.sqrt(max(step, 0.0)) + 1e3
    best, best_res = x.copy(), np.inf
    for it in range(iters):
        resid = yhat - cfg.dequantize(cfg.quantize(A @ x))
        res = float(resid @ resid)
        if res < best_res:
            best, best_res = x.copy(), res
        if res == 0 and it > 0:
            break
        x = hard_threshold(x + step * (A.T @ resid), k)
        info["iters"] = it + 1
        if not np.all(np.isfinite(x)) or np.linalg.norm(x) > scale:
            info["diverged"] = True
            x = best
            break
    resid = yhat - cfg.dequantize(cfg.quantize(A @ x))
    if float(resid @ resid) > best_res:
        x = best
    return (x, info) if return_info else x


def soft_threshold(x, t):
    return np.sign(x) * np.maximum(np.abs(x) - t, 0.0)


def fista_recover(yhat, A, lam, iters=500, return_info=False):
    """Monotone FISTA for ``min_x 0.5 ||A x - yhat||^2 + lam ||x||_1``.

    Each step keeps the better of the proximal point and the previous
    iterate, so the recorded objective never increases.
    """
    yhat = np.asarray(yhat, dtype=float)
    L = max(spectral_norm_sq(A), 1e-12)

    def objective(x):
        r = A @ x - yhat
        return 0.5 * float(r @ r) + lam * float(np.abs(x).sum())

    x = np.zeros(A.shape[1])
    v = x.copy()
    t = 1.0
    fx = objective(x)
    history = [fx]
    for _ in range(iters):
        z = soft_threshold(v - A.T @ (A @ v - yhat) / L, lam / L)
        fz = objective(z)
        t_new = (1 + math.sqrt(1 + 4 * t * t)) / 2
        x_new, f_new = (z, fz) if fz <= fx else (x, fx)
        v = x_new + (t / t_new) * (z - x_new) + ((t - 1) / t_new) * (x_new - x)
        x, fx, t = x_new, f_new, t_new
        history.append(fx)
    return (x, {"objective": history, "L": L}) if return_info else x


def lambda_grid(yhat, A, grid=LAMBDA_GRID):
    scale = float(np.max(np.abs(A.T @ yhat))) if yhat.size else 0.0
    return [g * scale for g in grid]


def measurement_grid(k, b, lo=6, hi=20, step=2):
    """Measurement counts ``6k, 8k, ..., 20k`` that leave at least one bit each."""
    return [mult * k for mult in range(lo, hi + 1, step) if mult * k >= 1 and b // (mult * k) >= 1]


def cs_recover(signal, cfg, k, A=None):
    """Encode ``signal`` and recover it with ``cfg.recovery``; returns the estimate."""
    signal = np.asarray(signal, dtype=float)
    A = cfg.sensing_matrix(signal.size) if A is None else A
    idx = cs_encode(signal, cfg, A)
    if isinstance(cfg.recovery, QIHT):
        return qiht_recover(idx, A, k, cfg)
    if isinstance(cfg.recovery, FISTA):
        yhat = cfg.dequantize(idx)
        lam = cfg.recovery.lam
        if lam is None:
            lam = cfg.recovery.lam_factor * float(np.max(np.abs(A.T @ yhat)))
        return fista_recover(yhat, A, lam, iters=cfg.recovery.iters)
    raise TypeError(f"unknown recovery {cfg.recovery!r}")


def distributed_sensing(n, T, m_total, seed):
    """Block-diagonal sensing for ``n`` signals, ``m_total // n`` rows each (at least one)."""
    per = max(1, m_total // n)
    rng = np.random.default_rng(seed)
    A = np.zeros((n * per, n * T))
    for s in range(n):
        A[s * per:(s + 1) * per, s * T:(s + 1) * T] = rng.standard_normal((per, T))
    return A
