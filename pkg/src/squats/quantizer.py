"""Serial scalar quantizer with a reserved exact-zero level."""
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, special


def uniform_cell(x, n, lo, hi):
    """Index in ``0..n-1`` of the uniform cell of ``[lo, hi]`` containing ``x``.

    Inputs outside ``[lo, hi]`` saturate to the boundary cells.
    """
    x = np.asarray(x, dtype=float)
    cell = np.floor((x - lo) / (hi - lo) * n).astype(np.int64)
    return np.clip(cell, 0, n - 1)


def cell_midpoints(n, lo, hi):
    width = (hi - lo) / n
    return lo + width * (np.arange(n) + 0.5)


def gaussian_centroids(n, lo, hi, sigma=1.0):
    """Centroids of the ``n`` decision regions under N(0, sigma^2).

    The two outer regions extend to -inf / +inf since overload saturates into
    them.
    """
    edges = lo + (hi - lo) * np.arange(n + 1) / n
    edges = edges / sigma
    edges[0], edges[-1] = -np.inf, np.inf
    mass = special.ndtr(edges[1:]) - special.ndtr(edges[:-1])
    dens = np.exp(-0.5 * np.where(np.isfinite(edges), edges, 0.0) ** 2)
    dens = np.where(np.isfinite(edges), dens, 0.0) / np.sqrt(2 * np.pi)
    first = (dens[:-1] - dens[1:]) * sigma
    out = np.where(mass > 0, first / np.where(mass > 0, mass, 1.0), cell_midpoints(n, lo, hi))
    return out


@dataclass(frozen=True)
class ScalarQuantizer:
    """Uniform ``l``-cell quantizer on ``[lo, hi]`` plus the zero level ``q_0 = 0``.

    Index 0 is produced only by an input of exactly zero; every nonzero input
    lands in one of the cells ``1..l``.  ``reproduction`` selects cell
    midpoints (default) or centroids under a standard Gaussian.
    """

    levels: int
    lo: float = -2.0
    hi: float = 2.0
    reproduction: str = "midpoint"
    values: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if int(self.levels) < 1:
            raise ValueError(f"levels must be >= 1, got {self.levels}")
        if not self.hi > self.lo:
            raise ValueError(f"need lo < hi, got [{self.lo}, {self.hi}]")
        if self.reproduction == "midpoint":
            cells = cell_midpoints(self.levels, self.lo, self.hi)
        elif self.reproduction == "centroid":
            cells = gaussian_centroids(self.levels, self.lo, self.hi)
        else:
            raise ValueError(f"unknown reproduction {self.reproduction!r}")
        values = np.concatenate([[0.0], cells])
        values.setflags(write=False)
        object.__setattr__(self, "levels", int(self.levels))
        object.__setattr__(self, "values", values)

    @property
    def alphabet_size(self):
        return self.levels + 1

    @property
    def max_cell_error(self):
        """Largest ``|x - Q(x)|`` for nonzero ``x`` inside ``[lo, hi]`` (midpoints)."""
        return (self.hi - self.lo) / (2 * self.levels)

    def index(self, x):
        """Vectorised level index in ``0..l``."""
        x = np.asarray(x, dtype=float)
        idx = uniform_cell(x, self.levels, self.lo, self.hi) + 1
        return np.where(x == 0, 0, idx)

    def value(self, index):
        return self.values[np.asarray(index)]

    def __call__(self, x):
        return self.value(self.index(x))

    def to_dict(self):
        return {"l": self.levels, "lo": self.lo, "hi": self.hi, "reproduction": self.reproduction}

    @classmethod
    def from_dict(cls, d):
        return cls(int(d["l"]), float(d.get("lo", -2.0)), float(d.get("hi", 2.0)),
                   d.get("reproduction", "midpoint"))


def quantize(x, q):
    """Quantize one real sample; returns ``(index, value)``."""
    j = int(q.index(float(x)))
    return j, float(q.values[j])


def empirical_avg_mse(sampler, q, trials, seed=None, with_stderr=False):
    """Monte Carlo estimate of ``(1/T) sum_i E|s[i] - Q(s[i])|^2``.

    ``sampler(rng)`` must return one signal realisation as a 1-D array.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    rng = np.random.default_rng(seed)
    per_trial = np.empty(trials)
    for t in range(trials):
        s = np.asarray(sampler(rng), dtype=float)
        per_trial[t] = np.mean((s - q(s)) ** 2)
    mean = float(per_trial.mean())
    if not with_stderr:
        return mean
    stderr = float(per_trial.std(ddof=1) / np.sqrt(trials)) if trials > 1 else float("nan")
    return mean, stderr


def panter_dite_mse(pdf, l, support=(-10.0, 10.0), points=2 ** 16):
    """Panter-Dite high-resolution MSE for an ``l+1``-level quantizer.

    ``(1/12) * (l+1)^-2 * (int pdf^(1/3))^3``, with the integral taken by the
    trapezoid rule on ``points`` samples of ``support``.
    """
    if l < 0:
        raise ValueError("l must be >= 0")
    grid = np.linspace(support[0], support[1], int(points))
    with np.errstate(all="ignore"):
        dens = np.asarray(pdf(grid), dtype=float)
        integral = integrate.trapezoid(np.cbrt(dens), grid)
    if not np.isfinite(integral) or integral <= 0:
        raise ValueError("pdf^(1/3) integral is not finite and positive on the given grid")
    return float(integral ** 3 / 12.0 * 2.0 ** (-2.0 * np.log2(l + 1)))
