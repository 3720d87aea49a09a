"""Random binned binary codebooks and their on-disk format.

A codebook holds ``T`` bins of ``l`` codewords each, every bit drawn
Bernoulli(ln2 / k), plus the all-zero word shared by all bins.  Codeword
``c_{j,i}`` (level ``j`` in ``1..l``, bin ``i`` in ``0..T-1``) is stored at
``words[i, j-1]``.
"""
import json
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import bits
from .errors import FeasibilityError
from .rates import LN2, distinct_codeword_capacity, repetition_feasibility

MAGIC = b"SQTS"
VERSION = 1
_HEADER = struct.Struct("<4sHIIIIQ")


@dataclass(frozen=True, eq=False)
class Codebook:
    T: int
    l: int
    k: int
    b: int
    seed: int
    words: np.ndarray = field(repr=False)

    @property
    def p(self):
        return min(LN2 / self.k, 1.0)

    @property
    def n_codewords(self):
        """Distinct codeword slots, counting the shared zero word once."""
        return self.l * self.T + 1

    @property
    def zero_codeword(self):
        return np.zeros(bits.n_words(self.b), dtype=np.uint64)

    def codeword(self, i, j):
        """Packed word for bin ``i`` and level ``j`` (``j = 0`` is the zero word)."""
        if j == 0:
            return self.zero_codeword
        return self.words[i, j - 1]

    def bit_matrix(self):
        """``(T, l, b)`` uint8 view of all stored codewords."""
        return bits.unpack(self.words, self.b)

    def ones_fraction(self):
        return bits.popcount(self.words.reshape(-1)) / (self.T * self.l * self.b)

    def __eq__(self, other):
        if not isinstance(other, Codebook):
            return NotImplemented
        return (self.T, self.l, self.k, self.b, self.seed) == (
            other.T, other.l, other.k, other.b, other.seed
        ) and np.array_equal(self.words, other.words)

    def header(self):
        return {"T": self.T, "l": self.l, "k": self.k, "b": self.b, "seed": self.seed,
                "version": VERSION}

    def save(self, path):
        """Write the binary codebook and a ``.json`` metadata sidecar next to it."""
        path = Path(path)
        payload = bits.to_bytes(self.words.reshape(-1, self.words.shape[-1]), self.b)
        with open(path, "wb") as fh:
            fh.write(_HEADER.pack(MAGIC, VERSION, self.T, self.l, self.k, self.b, self.seed))
            fh.write(np.ascontiguousarray(payload).tobytes())
        path.with_suffix(path.suffix + ".json").write_text(json.dumps(self.header(), indent=2))
        return path

    @classmethod
    def load(cls, path):
        path = Path(path)
        raw = path.read_bytes()
        if len(raw) < _HEADER.size:
            raise ValueError(f"{path}: truncated codebook header")
        magic, version, T, l, k, b, seed = _HEADER.unpack_from(raw)
        if magic != MAGIC:
            raise ValueError(f"{path}: bad magic {magic!r}")
        if version != VERSION:
            raise ValueError(f"{path}: unsupported version {version}")
        nb = bits.n_bytes(b)
        body = np.frombuffer(raw, dtype=np.uint8, offset=_HEADER.size)
        if body.size != T * l * nb:
            raise ValueError(f"{path}: expected {T * l * nb} payload bytes, found {body.size}")
        words = bits.from_bytes(body.reshape(T * l, nb), b).reshape(T, l, -1)
        return cls(T, l, k, b, seed, words)


def check_distinct_feasible(T, l, k, b):
    """Raise :class:`FeasibilityError` if ``l T`` distinct nonzero words cannot be expected."""
    n = l * T
    if b < 64 and n > 2 ** b - 1:
        raise FeasibilityError(f"{n} distinct nonzero words do not fit in b={b} bits")
    if math.log2(n) > distinct_codeword_capacity(b, k):
        extra = repetition_feasibility(k) if k > LN2 else float("inf")
        raise FeasibilityError(
            f"b={b} too short for {n} repetition-free codewords at k={k}; "
            f"inflate b by a factor of at least {1 + extra:.3f}"
        )


def generate(T, l, k, b, seed=None, reject_duplicates=False):
    """Draw a codebook.  Bits are consumed bin-major, then level, then bit index.

    With ``reject_duplicates`` every stored word is nonzero and distinct;
    offending words are redrawn in order from the same stream, up to
    ``100 l T`` redraws.
    """
    if min(T, l, k, b) < 1:
        raise ValueError(f"T, l, k, b must all be >= 1 (got {T}, {l}, {k}, {b})")
    if seed is None:
        seed = int(np.random.SeedSequence().generate_state(1, dtype=np.uint64)[0])
    seed = int(seed)
    if reject_duplicates:
        check_distinct_feasible(T, l, k, b)
    rng = np.random.default_rng(seed)
    p = min(LN2 / k, 1.0)
    words = bits.random_words(rng, (T * l,), b, p)
    if reject_duplicates:
        _redraw_repeats(words, rng, b, p, cap=100 * l * T)
    return Codebook(int(T), int(l), int(k), int(b), seed, words.reshape(T, l, -1))


def _redraw_repeats(words, rng, b, p, cap):
    seen = set()
    draws = 0
    for r in range(words.shape[0]):
        key = words[r].tobytes()
        while not words[r].any() or key in seen:
            if draws >= cap:
                raise FeasibilityError(f"no repetition-free codebook after {cap} redraws")
            words[r] = bits.pack(rng.random(b) < p)
            key = words[r].tobytes()
            draws += 1
        seen.add(key)
