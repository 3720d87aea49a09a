"""Asymmetric bit-flip noise on the final register."""
import numpy as np

from . import bits
from .codec import NoiseModel, Register, SerialEncoder


def apply_noise(reg, noise, rng=None):
    """Flip each 0-bit to 1 with probability ``noise.q`` and each 1-bit to 0 with ``noise.u``."""
    rng = np.random.default_rng(rng)
    y = reg.to_bits().astype(bool)
    draw = rng.random(reg.b)
    out = np.where(y, draw >= noise.u, draw < noise.q)
    return Register(reg.b, bits.pack(out))


def noise_from_dict(d):
    return NoiseModel(float(d.get("q", 0.0)), float(d.get("u", 0.0)))


def encode_with_step_noise(signal, codebook, quantizer, noise, rng=None):
    """Encode while flipping register bits after every sample (exploration only)."""
    rng = np.random.default_rng(rng)
    enc = SerialEncoder(codebook, quantizer)
    for s in np.asarray(signal, dtype=float):
        enc.push(s)
        enc.register = apply_noise(enc.register, noise, rng)
    return enc.register
