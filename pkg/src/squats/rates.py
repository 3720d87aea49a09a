"""Closed-form rate, bit-count and feasibility calculators.

All logarithms are base 2 unless the name says otherwise.  Binomial
coefficients are evaluated in log space so the calculators stay finite for
large ``T``.
"""
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.special import gammaln

LN2 = math.log(2.0)


def log2_binom(n, r):
    """log2 C(n, r); ``-inf`` when the coefficient is zero."""
    if r < 0 or r > n or n < 0:
        return -math.inf
    return float((gammaln(n + 1) - gammaln(r + 1) - gammaln(n - r + 1)) / LN2)


def _check(T, k, l, epsilon):
    if not 1 <= k <= T:
        raise ValueError(f"need 1 <= k <= T, got k={k}, T={T}")
    if l < 1:
        raise ValueError(f"need l >= 1, got {l}")
    if not epsilon > 0:
        raise ValueError(f"need epsilon > 0, got {epsilon}")


def sufficient_rate_ml(T, k, l, epsilon):
    """Rate sufficient for ML decoding of ``k`` nonzeros among ``T`` samples.

    ``max_{1<=i<=k} (1+eps) k / (i T) * log2(C(T-k, i) * l^i)``.  Terms whose
    binomial vanishes are skipped; if every term vanishes the rate is 0.
    """
    _check(T, k, l, epsilon)
    best = None
    for i in range(1, k + 1):
        lb = log2_binom(T - k, i)
        if lb == -math.inf:
            continue
        term = (1 + epsilon) * k / (i * T) * (lb + i * math.log2(l))
        best = term if best is None else max(best, term)
    return 0.0 if best is None else best


def rate_upper_bound(T, k, l, epsilon):
    """``(1+eps) (k/T) log2(T l)``; dominates :func:`sufficient_rate_ml`."""
    _check(T, k, l, epsilon)
    return (1 + epsilon) * k / T * math.log2(T * l)


def bits_growth(T, k, l):
    """Order-of-growth witness ``k log2 T + k log2 l`` for the bit count."""
    return k * math.log2(T) + k * math.log2(l)


class ComaRate(NamedTuple):
    rate: float
    failure_bound: float


def sufficient_rate_coma(T, k, l, epsilon):
    """Rate sufficient for column-matching decoding, with its failure bound ``T^-eps``."""
    _check(T, k, l, epsilon)
    rate = (1 + epsilon) * math.e / T * k * math.log2(T * l)
    return ComaRate(rate, float(T) ** (-epsilon))


@dataclass(frozen=True)
class Overall:
    """The whole ensemble has at most ``k`` nonzero entries."""

    k: int


@dataclass(frozen=True)
class Structured:
    """Each signal is ``k_t``-sparse in time and each time column ``k_s``-sparse across signals."""

    k_t: int
    k_s: int

    @property
    def k(self):
        return self.k_t * self.k_s


def sufficient_rate_distributed(n, T, model, l, epsilon, swap_structured_indices=False):
    """Rate (bits per ensemble sample) sufficient for ML decoding of ``n`` jointly sparse signals.

    ``max_{u in I} (1+eps) k / (u n T) * log2(theta * l^u)`` where ``theta``
    and ``I`` depend on the sparsity model.  For :class:`Structured` the
    binomials pair ``n`` with ``k_t`` and ``T`` with ``k_s``;
    ``swap_structured_indices`` exchanges that pairing.
    """
    if n < 1 or T < 1:
        raise ValueError("need n >= 1 and T >= 1")
    if l < 1 or not epsilon > 0:
        raise ValueError("need l >= 1 and epsilon > 0")
    if isinstance(model, Overall):
        k = model.k
        if not 1 <= k <= n * T:
            raise ValueError(f"overall sparsity k={k} outside 1..{n * T}")
        log_theta = log2_binom(n * T, k)
        uset = range(1, k + 1)
    elif isinstance(model, Structured):
        k_t, k_s = model.k_t, model.k_s
        if k_t < 1 or k_s < 1:
            raise ValueError("structured sparsity needs k_t, k_s >= 1")
        if swap_structured_indices:
            log_theta = log2_binom(n, k_s) + log2_binom(T, k_t)
        else:
            log_theta = log2_binom(n, k_t) + log2_binom(T, k_s)
        if log_theta == -math.inf:
            raise ValueError(f"structured model {model} incompatible with n={n}, T={T}")
        k = model.k
        uset = sorted({ut * us for ut in range(1, k_t + 1) for us in range(1, k_s + 1)})
    else:
        raise TypeError(f"unknown sparsity model {model!r}")
    return max((1 + epsilon) * k / (u * n * T) * (log_theta + u * math.log2(l)) for u in uset)


def level_budget(T, k, R, epsilon, cap=None):
    """Codewords per bin for rate ``R``: ``max(floor(2^(T R / (k (1+eps))) / T), 2)``.

    ``cap`` bounds the result (the uncapped value grows exponentially in ``R``).
    """
    expo = T * R / (k * (1 + epsilon))
    if expo > 1000:
        if cap is None:
            raise OverflowError(f"level budget 2^{expo:.0f}/T is not representable; pass cap")
        return int(cap)
    l = max(math.floor(2.0 ** expo / T), 2)
    return l if cap is None else min(l, int(cap))


def repetition_feasibility(k, raw=False):
    """Smallest extra rate fraction letting ``l T`` codewords be drawn without repeats.

    ``1 / (ln2 * log2(k / ln2)) - 1``, clamped at 0 unless ``raw``.
    """
    arg = math.log2(k / LN2) if k > 0 else -math.inf
    if arg <= 0:
        raise ValueError(f"repetition bound undefined for k={k} (needs k > ln 2)")
    val = 1.0 / (LN2 * arg) - 1.0
    return val if raw else max(val, 0.0)


def noisy_length_factor(q, u):
    """Codeword-length inflation ``1 / ((1-q)(1-u)^2)`` for bit-flip probabilities ``q``, ``u``."""
    if not 0 <= q < 0.5:
        raise ValueError(f"need 0 <= q < 1/2, got {q}")
    if not 0 <= u < 1:
        raise ValueError(f"need 0 <= u < 1, got {u}")
    return 1.0 / ((1 - q) * (1 - u) ** 2)


def bits_for_rate(R, T):
    """``ceil(R T)`` with a guard against float noise just above an integer."""
    x = R * T
    return int(math.ceil(x - 1e-9 * max(1.0, abs(x))))


def distinct_codeword_capacity(b, k):
    """log2 of the number of typical weight-``p b`` words, ``p b log2(k/ln2)``."""
    p = min(LN2 / k, 1.0)
    w = p * b
    return w * np.log2(1.0 / p)
