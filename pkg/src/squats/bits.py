"""Packed binary words.

Binary words of length ``b`` are stored as ``uint64`` arrays whose last axis
has ``ceil(b / 64)`` entries.  Bit ``t`` of a word lives in word ``t // 64`` at
position ``t % 64`` (least significant first).  Unused high bits of the last
word are always zero.
"""
import numpy as np

WORD = 64


def n_words(b):
    return (int(b) + WORD - 1) // WORD


def n_bytes(b):
    return (int(b) + 7) // 8


def pack(bits):
    """Pack a ``(..., b)`` array of 0/1 values into ``(..., ceil(b/64))`` uint64."""
    bits = np.asarray(bits, dtype=bool)
    b = bits.shape[-1]
    w = n_words(b)
    padded = np.zeros(bits.shape[:-1] + (w * WORD,), dtype=bool)
    padded[..., :b] = bits
    as_bytes = np.packbits(padded, axis=-1, bitorder="little")
    return np.ascontiguousarray(as_bytes).view("<u8").astype(np.uint64)


def unpack(words, b):
    """Inverse of :func:`pack`; returns a ``(..., b)`` uint8 array."""
    words = np.ascontiguousarray(np.asarray(words, dtype=np.uint64)).astype("<u8")
    as_bytes = words.view(np.uint8)
    bits = np.unpackbits(as_bytes, axis=-1, bitorder="little")
    return bits[..., :b]


def popcount(words, axis=-1):
    """Number of set bits, summed over ``axis``."""
    return np.bitwise_count(words).sum(axis=axis, dtype=np.int64)


def to_bytes(words, b):
    """Little-endian bit-order bytes, ``ceil(b/8)`` per word."""
    words = np.ascontiguousarray(np.asarray(words, dtype=np.uint64)).astype("<u8")
    return words.view(np.uint8)[..., : n_bytes(b)]


def from_bytes(data, b):
    data = np.asarray(data, dtype=np.uint8)
    w = n_words(b)
    padded = np.zeros(data.shape[:-1] + (w * 8,), dtype=np.uint8)
    padded[..., : data.shape[-1]] = data
    return np.ascontiguousarray(padded).view("<u8").astype(np.uint64)


def covered(words, reg):
    """True where ``words | reg == reg``, i.e. every one-bit of a word is set in ``reg``."""
    return ~np.any(words & ~reg, axis=-1)


def random_words(rng, shape, b, p, chunk_bits=1 << 22):
    """I.i.d. Bernoulli(``p``) words of length ``b``.

    Draws are consumed from ``rng`` row-major over ``shape`` and then bit index,
    so a seeded generator reproduces the same words on every platform.
    """
    shape = tuple(shape)
    rows = int(np.prod(shape)) if shape else 1
    out = np.empty((rows, n_words(b)), dtype=np.uint64)
    step = max(1, chunk_bits // max(b, 1))
    for start in range(0, rows, step):
        stop = min(rows, start + step)
        out[start:stop] = pack(rng.random((stop - start, b)) < p)
    return out.reshape(shape + (n_words(b),))
