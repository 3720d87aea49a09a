"""MSE versus rate for a single sparse signal, against compressed-sensing baselines.

Runs a short version of the T=100, k=3 sweep and writes CSV and SVG next to
this script.  Use more trials (and the CLI) for smoother curves.
"""
from pathlib import Path

from squats.bench import ExperimentConfig, emit, run_sweep

out = Path(__file__).with_name("out")
out.mkdir(exist_ok=True)
cfg = ExperimentConfig(scenario="single", T=100, k=3, rates=(0.4, 0.5, 0.6, 0.8, 1.0),
                       trials=30, decoder="ml", epsilon="auto-grid",
                       baselines=("qiht", "fista"), heldout_trials=10)
rows = run_sweep(cfg, progress=lambda r: print(
    f"R={r['R']:<4} {r['decoder']:<6} mse={r['mse_mean']:.3g}  {r['flag']}"))
for fmt in ("csv", "svg"):
    print("wrote", emit(rows, fmt, out / f"rate_sweep.{fmt}"))
