"""Walk one sparse signal through the serial codec.

A length-100 signal with three Gaussian nonzeros is quantized sample by
sample; each nonzero level ORs a random codeword into a 100-bit register.
The ML decoder recovers the quantized signal from that register alone.
"""
import numpy as np

from squats import ScalarQuantizer, SerialEncoder, decode_coma, decode_ml, generate
from squats.bench import gen_signal, mse
from squats.rates import bits_for_rate, level_budget, rate_upper_bound

T, k, R, eps = 100, 3, 1.0, 1.0
b = bits_for_rate(R, T)
l = level_budget(T, k, R, eps, cap=1024)
print(f"T={T} k={k} R={R}: b={b} register bits, l={l} nonzero levels")
print(f"rate bound at this l: {rate_upper_bound(T, k, l, eps):.3f} bits/sample")

cb = generate(T, l, k, b, seed=7)
q = ScalarQuantizer(l)
s = gen_signal(T, k, seed=11)

enc = SerialEncoder(cb, q)
for x in s:                      # one sample at a time, as an ADC would deliver them
    j = enc.push(x)
    if j:
        print(f"  sample {enc.position - 1:3d} = {x:+.3f} -> level {j}, "
              f"register now has {enc.register.popcount()} ones")

res = decode_ml(enc.register, cb, q)
print("ML support:", res.support, "exact:", res.exact_match)
print(f"ML mse {mse(s, res.signal):.2e}   (scalar quantizer alone: {mse(s, q(s)):.2e})")

coma = decode_coma(enc.register, cb, q, np.random.default_rng(0))
print(f"CoMa support: {coma.support}  mse {mse(s, coma.signal):.2e}")
