"""Bit flips on the register and the longer codewords that absorb them.

With 0->1 flips at rate q and 1->0 flips at rate u, the codewords are made
longer by 1/((1-q)(1-u)^2) and the ML decoder scores candidate sets by the
flip likelihood instead of exact coverage.
"""
from squats.bench import ExperimentConfig, run_sweep
from squats.rates import noisy_length_factor

for q, u in [(0.0, 0.0), (0.1, 0.1), (0.4, 0.1)]:
    print(f"q={q} u={u}: length factor {noisy_length_factor(q, u):.3f}")
    for R in (1.0, 2.0, 4.0):
        cfg = ExperimentConfig(scenario="noisy", T=50, k=2, rates=(R,), trials=20,
                               epsilon="fixed", noise={"q": q, "u": u})
        r = run_sweep(cfg)[0]
        print(f"   R={R}: l={r['l']:<5} b={r['b']:<4} mse={r['mse_mean']:.2e}")
