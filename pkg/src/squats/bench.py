"""Monte Carlo rate sweeps and their CSV/SVG output.

Every trial draws from its own stream ``SeedSequence([seed, trial])``, so a
sweep gives the same numbers whatever the thread count, and every rate point
and method sees the same signals.
"""
import csv
import json
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import baselines as bl
from .channel import apply_noise
from .codebook import generate
from .codec import (DEFAULT_BUDGET, NoiseModel, decode_coma, decode_ml, encode,
                    fragment_codebooks, fragment_pipeline, selected_pairs)
from .errors import BudgetExceeded, ConfigError, FeasibilityError
from .network import (DistributedCodebook, NetworkGraph, decode_distributed,
                      encode_distributed, gen_joint_sparse, random_failures, simulate,
                      single_hop)
from .quantizer import ScalarQuantizer
from .rates import Overall, Structured, bits_for_rate, level_budget, noisy_length_factor

SCENARIOS = ("single", "noisy", "distributed", "fragmented", "mismatch")
DECODERS = ("ml", "coma")
EPSILON_POLICIES = ("auto-grid", "fixed", "fine-search")
EPSILON_GRID = (0.8, 0.9667, 1.1333, 1.3)
FINE_GRID = tuple(np.round(np.linspace(0.3, 2.0, 16), 4))
BASELINES = ("direct", "qiht", "fista")
COLUMNS = ("scenario", "R", "decoder", "epsilon", "l", "b", "mse_mean", "mse_stderr",
           "support_error_rate", "wall_ms", "k_true", "mse_sum_mean", "flag")


@dataclass
class ExperimentConfig:
    """One sweep.

    ``k`` is the true number of nonzeros and ``k_design`` (default ``k``) the
    value the codebook and level budget are built for.  ``levels`` pins ``l``
    instead of deriving it from the rate.  ``model`` selects the distributed
    sparsity: ``{"overall": k}`` or ``{"k_t": .., "k_s": ..}``.
    """

    scenario: str = "single"
    T: int = 100
    k: int = 3
    k_design: int = None
    n: int = 1
    rates: tuple = (0.5, 1.0)
    trials: int = 100
    seed: int = 0
    decoder: str = "ml"
    epsilon: str = "auto-grid"
    epsilon_value: float = 1.0
    baselines: tuple = ()
    noise: dict = None
    topology: object = None
    failure_rate: float = 0.0
    model: dict = None
    groups: int = 10
    even_support: bool = False
    k_true_grid: tuple = (1, 2, 3, 4, 5, 6)
    levels: int = None
    level_cap: int = 1024
    reproduction: str = "midpoint"
    budget: int = DEFAULT_BUDGET
    heldout_trials: int = 20
    record_timing: bool = True

    def __post_init__(self):
        self.rates = tuple(float(r) for r in np.atleast_1d(self.rates))
        self.baselines = tuple(self.baselines)
        self.k_true_grid = tuple(int(x) for x in self.k_true_grid)
        if self.k_design is None:
            self.k_design = self.k
        if self.scenario not in SCENARIOS:
            raise ConfigError(f"scenario must be one of {SCENARIOS}, got {self.scenario!r}")
        if self.decoder not in DECODERS:
            raise ConfigError(f"decoder must be one of {DECODERS}, got {self.decoder!r}")
        if self.epsilon not in EPSILON_POLICIES:
            raise ConfigError(f"epsilon policy must be one of {EPSILON_POLICIES}")
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if self.k_design < 1:
            raise ConfigError("design k must be >= 1")
        if not self.rates or any(r <= 0 for r in self.rates):
            raise ConfigError("rates must be positive")
        if any(b <= a for a, b in zip(self.rates, self.rates[1:])):
            raise ConfigError("rate grid must be strictly increasing")
        unknown = set(self.baselines) - set(BASELINES)
        if unknown:
            raise ConfigError(f"unknown baselines {sorted(unknown)}")
        if self.scenario == "noisy" and self.noise is None:
            raise ConfigError("noisy scenario needs a noise block {q, u}")
        if self.noise is not None:
            try:
                NoiseModel(float(self.noise.get("q", 0)), float(self.noise.get("u", 0)))
            except ValueError as exc:
                raise ConfigError(str(exc)) from None
        if self.T < 1 or self.n < 1 or self.k < 0:
            raise ConfigError("T, n must be >= 1 and k >= 0")

    @property
    def noise_model(self):
        if self.noise is None:
            return None
        return NoiseModel(float(self.noise.get("q", 0)), float(self.noise.get("u", 0)))

    @property
    def sparsity_model(self):
        if self.model is None or "overall" in self.model:
            return Overall(int((self.model or {}).get("overall", self.k)))
        return Structured(int(self.model["k_t"]), int(self.model["k_s"]))

    @property
    def epsilons(self):
        if self.epsilon == "fixed":
            return (float(self.epsilon_value),)
        return EPSILON_GRID if self.epsilon == "auto-grid" else FINE_GRID

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        known = set(cls.__dataclass_fields__)
        extra = set(d) - known
        if extra:
            raise ConfigError(f"unknown config keys {sorted(extra)}")
        try:
            return cls(**d)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None

    @classmethod
    def load(cls, path):
        try:
            d = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"{path}: {exc}") from None
        return cls.from_dict(d.get("experiment", d))


def trial_rng(seed, trial, *extra):
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(trial), *extra]))


def gen_signal(T, k_true, seed=None):
    """Length-``T`` signal with ``k_true`` standard Gaussian entries at uniform positions."""
    rng = np.random.default_rng(seed)
    if not 0 <= k_true <= T:
        raise ValueError(f"need 0 <= k_true <= T, got {k_true}")
    s = np.zeros(T)
    s[rng.choice(T, size=k_true, replace=False)] = rng.standard_normal(k_true)
    return s


def gen_signal_even(T, k_true, groups, seed=None):
    """Like :func:`gen_signal` but with ``k_true / groups`` nonzeros in each contiguous group."""
    rng = np.random.default_rng(seed)
    tg = -(-T // groups)
    if k_true % groups:
        raise ValueError(f"{k_true} nonzeros do not split evenly into {groups} groups")
    s = np.zeros(T)
    per = k_true // groups
    for g in range(groups):
        lo, hi = g * tg, min(T, (g + 1) * tg)
        s[lo + rng.choice(hi - lo, size=per, replace=False)] = rng.standard_normal(per)
    return s


def mse(s, s_hat):
    """Per-sample squared error ``||s - s_hat||^2 / T``."""
    s = np.asarray(s, dtype=float).reshape(-1)
    s_hat = np.asarray(s_hat, dtype=float).reshape(-1)
    return float(np.mean((s - s_hat) ** 2))


def resolve_threads(threads=None):
    env = os.environ.get("SQUATS_THREADS")
    if env:
        return max(1, int(env))
    return max(1, int(threads or 1))


def _pmap(fn, n, threads):
    if threads == 1:
        return [fn(t) for t in range(n)]
    with ThreadPoolExecutor(threads) as pool:
        return list(pool.map(fn, range(n)))


class _Ctx:
    """Everything a trial needs for one (rate, epsilon) point."""

    def __init__(self, cfg, R, eps, ri, ei, k_true):
        self.cfg = cfg
        self.R, self.eps, self.k_true = R, eps, k_true
        self.noise = cfg.noise_model
        dist = cfg.scenario == "distributed"
        self.T_total = cfg.n * cfg.T if dist else cfg.T
        self.b = bits_for_rate(R, self.T_total)
        r_eff = R
        if self.noise is not None and not self.noise.noiseless:
            r_eff = R / noisy_length_factor(self.noise.q, self.noise.u)
        k_des = cfg.k_design
        cb_seed = int(np.random.SeedSequence(
            [cfg.seed, 1, round(R * 1e6), round(eps * 1e6)]).generate_state(1)[0])
        if cfg.scenario == "fragmented":
            # the quantizer serves the whole signal; fragmentation only splits the codebook
            self.l = cfg.levels or level_budget(cfg.T, k_des, r_eff, eps, cap=cfg.level_cap)
            self.codebooks = fragment_codebooks(cfg.T, cfg.groups, self.l, k_des, self.b,
                                                seed=cb_seed)
            self.bits_used = sum(cb.b for cb in self.codebooks)
        else:
            self.l = cfg.levels or level_budget(self.T_total, k_des, r_eff, eps,
                                                cap=cfg.level_cap)
            if dist:
                self.dcb = DistributedCodebook.generate(cfg.n, cfg.T, self.l, k_des, self.b,
                                                        seed=cb_seed)
                self.graph = _graph(cfg)
            else:
                self.codebook = generate(cfg.T, self.l, k_des, self.b, seed=cb_seed)
            self.bits_used = self.b
        self.quantizer = ScalarQuantizer(self.l, reproduction=cfg.reproduction)


def _graph(cfg):
    topo = cfg.topology
    if topo is None:
        return single_hop(cfg.n)
    if isinstance(topo, (str, Path)):
        return NetworkGraph.load(topo)
    return NetworkGraph.from_dict(topo)


def draw_signal(cfg, rng, k_true=None):
    k_true = cfg.k if k_true is None else k_true
    if cfg.scenario == "distributed":
        model = cfg.sparsity_model
        return gen_joint_sparse(cfg.n, cfg.T, model, rng)
    if cfg.even_support:
        return gen_signal_even(cfg.T, k_true, cfg.groups, rng)
    return gen_signal(cfg.T, k_true, rng)


def _decode(ctx, reg, rng, codebook, k):
    cfg = ctx.cfg
    if cfg.decoder == "coma":
        return decode_coma(reg, codebook, ctx.quantizer, rng), ""
    try:
        return decode_ml(reg, codebook, ctx.quantizer, k=k, noise=ctx.noise,
                         budget=cfg.budget), ""
    except BudgetExceeded as exc:
        return exc.partial, "budget"


def _squats_trial(ctx, t):
    cfg = ctx.cfg
    rng = trial_rng(cfg.seed, t)
    s = draw_signal(cfg, rng, ctx.k_true)
    flag = ""
    if cfg.scenario == "fragmented":
        res = fragment_pipeline(s, cfg.groups, ctx.quantizer, codebooks=ctx.codebooks,
                                decoder=cfg.decoder, rng=rng)
        truth = selected_pairs(s, ctx.quantizer)
    elif cfg.scenario == "distributed":
        inputs = encode_distributed(s, ctx.dcb, ctx.quantizer)
        failures = None
        if cfg.failure_rate > 0:
            failures = random_failures(ctx.graph, cfg.failure_rate, rng)
        reg = simulate(ctx.graph, inputs, failures)
        if ctx.noise is not None and not ctx.noise.noiseless:
            reg = apply_noise(reg, ctx.noise, rng)
        res, flag = _decode(ctx, reg, rng, ctx.dcb.base, cfg.k_design)
        truth = selected_pairs(s.reshape(-1), ctx.quantizer)
    else:
        reg = encode(s, ctx.codebook, ctx.quantizer)
        if ctx.noise is not None and not ctx.noise.noiseless:
            reg = apply_noise(reg, ctx.noise, rng)
        res, flag = _decode(ctx, reg, rng, ctx.codebook, cfg.k_design)
        truth = selected_pairs(s, ctx.quantizer)
    if res.fallback:
        flag = flag or "fallback"
    err = float(np.sum((s.reshape(-1) - res.signal.reshape(-1)) ** 2))
    return err / s.size, err, tuple(res.support) != tuple(truth), flag


def _row(cfg, R, decoder, eps, l, b, per_trial, wall, k_true, flags):
    per = np.array([x[0] for x in per_trial])
    sums = np.array([x[1] for x in per_trial])
    supp = np.array([x[2] for x in per_trial], dtype=float)
    n = per.size
    return {
        "scenario": cfg.scenario, "R": R, "decoder": decoder, "epsilon": eps, "l": l, "b": b,
        "mse_mean": float(per.mean()),
        "mse_stderr": float(per.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0,
        "support_error_rate": float(supp.mean()) if supp.size else None,
        "wall_ms": round(wall * 1000, 1) if cfg.record_timing else 0,
        "k_true": k_true, "mse_sum_mean": float(sums.mean()),
        "flag": ";".join(sorted(set(f for f in flags if f))),
    }


def _infeasible(cfg, R, decoder, eps, k_true, why):
    return {"scenario": cfg.scenario, "R": R, "decoder": decoder, "epsilon": eps, "l": None,
            "b": 0, "mse_mean": math.nan, "mse_stderr": math.nan, "support_error_rate": None,
            "wall_ms": 0, "k_true": k_true, "mse_sum_mean": math.nan,
            "flag": f"infeasible: {why}"}


def _squats_point(cfg, R, ri, k_true, threads):
    """Best row over the epsilon policy for one rate point."""
    best = None
    for ei, eps in enumerate(cfg.epsilons):
        t0 = time.perf_counter()
        try:
            ctx = _Ctx(cfg, R, eps, ri, ei, k_true)
        except (FeasibilityError, OverflowError) as exc:
            best = best or _infeasible(cfg, R, cfg.decoder, eps, k_true, str(exc))
            continue
        out = _pmap(lambda t: _squats_trial(ctx, t), cfg.trials, threads)
        row = _row(cfg, R, cfg.decoder, eps, ctx.l, ctx.bits_used, out,
                   time.perf_counter() - t0, k_true, [x[3] for x in out])
        if row["b"] > bits_for_rate(R, _bits_base(cfg)):
            raise AssertionError(f"row uses {row['b']} bits, budget {bits_for_rate(R, _bits_base(cfg))}")
        if best is None or not (row["mse_mean"] >= best["mse_mean"]):
            best = row
    return best


def _bits_base(cfg):
    return cfg.n * cfg.T if cfg.scenario == "distributed" else cfg.T


def _cs_trials(cfg, A, b, k, trials, threads, recovery, offset=0):
    shape_T = A.shape[1]
    ccfg = bl.CsBaselineConfig(A.shape[0], b, recovery=recovery)

    def one(t):
        rng = trial_rng(cfg.seed, t) if offset == 0 else trial_rng(cfg.seed, t, offset)
        s = draw_signal(cfg, rng).reshape(-1)
        if s.size != shape_T:
            raise ValueError("sensing matrix does not match signal length")
        x = bl.cs_recover(s, ccfg, k, A)
        err = float(np.sum((s - x) ** 2))
        truth = set(np.flatnonzero(s))
        return err / s.size, err, set(np.flatnonzero(x)) != truth, ""

    return ccfg, _pmap(one, trials, threads)


def _sensing(cfg, m, ri):
    seed = int(np.random.SeedSequence([cfg.seed, 2, ri, m]).generate_state(1)[0])
    if cfg.scenario == "distributed":
        return bl.distributed_sensing(cfg.n, cfg.T, m, seed)
    return np.random.default_rng(seed).standard_normal((m, cfg.T))


def _baseline_rows(cfg, R, ri, threads):
    rows = []
    b = bits_for_rate(R, _bits_base(cfg))
    k = cfg.k
    if "direct" in cfg.baselines:
        t0 = time.perf_counter()
        if R >= 1:
            def one(t):
                s = draw_signal(cfg, trial_rng(cfg.seed, t)).reshape(-1)
                e = float(np.sum((s - bl.direct_quantize(s, R)) ** 2))
                return e / s.size, e, False, ""
            out = _pmap(one, cfg.trials, threads)
            bits = _bits_base(cfg) * int(math.floor(R))
            rows.append(_row(cfg, R, "direct", None, 2 ** int(math.floor(R)), bits, out,
                             time.perf_counter() - t0, cfg.k, []))
        else:
            rows.append(_infeasible(cfg, R, "direct", None, cfg.k,
                                    "rate below one bit per sample"))
    for name in ("qiht", "fista"):
        if name not in cfg.baselines:
            continue
        t0 = time.perf_counter()
        best = None
        ms = sorted({_sensing_rows(cfg, m) for m in bl.measurement_grid(k, b)})
        ms = [m for m in ms if b // m >= 1]
        for m in ms:
            A = _sensing(cfg, m, ri)
            if name == "qiht":
                rec = bl.QIHT()
            else:
                rec = bl.FISTA(lam_factor=_pick_lambda(cfg, A, b, k, threads))
            ccfg, out = _cs_trials(cfg, A, b, k, cfg.trials, threads, rec)
            per = np.mean([x[0] for x in out])
            if best is None or per < best[0]:
                best = (per, ccfg, out, rec)
        if best is None:
            rows.append(_infeasible(cfg, R, name, None, cfg.k,
                                    "no measurement count fits the budget"))
            continue
        _, ccfg, out, rec = best
        flag = f"m={ccfg.m}" + (f";lambda={rec.lam_factor}" if name == "fista" else "")
        row = _row(cfg, R, name, None, ccfg.n_levels, ccfg.bits_used, out,
                   time.perf_counter() - t0, cfg.k, [])
        row["flag"] = flag
        if row["b"] > b:
            raise AssertionError(f"{name} uses {row['b']} bits, budget {b}")
        rows.append(row)
    return rows


def _sensing_rows(cfg, m):
    if cfg.scenario == "distributed":
        return cfg.n * max(1, m // cfg.n)
    return m


def _pick_lambda(cfg, A, b, k, threads):
    """Lambda factor with the lowest MSE on held-out signals (separate seed streams)."""
    best = None
    for f in bl.LAMBDA_GRID:
        _, out = _cs_trials(cfg, A, b, k, cfg.heldout_trials, threads, bl.FISTA(lam_factor=f),
                            offset=7)
        e = np.mean([x[0] for x in out])
        if best is None or e < best[0]:
            best = (e, f)
    return best[1]


def run_sweep(cfg, threads=None, progress=None):
    """Run every rate point (or, for ``mismatch``, every true ``k``) of ``cfg``.

    Returns a list of row dicts with the keys in :data:`COLUMNS`.
    """
    threads = resolve_threads(threads)
    rows = []
    if cfg.scenario == "mismatch":
        R = cfg.rates[0]
        for kt in cfg.k_true_grid:
            rows.append(_squats_point(cfg, R, 0, kt, threads))
            if progress:
                progress(rows[-1])
        return rows
    for ri, R in enumerate(cfg.rates):
        rows.append(_squats_point(cfg, R, ri, cfg.k, threads))
        if progress:
            progress(rows[-1])
        if cfg.baselines and cfg.scenario in ("single", "distributed"):
            for row in _baseline_rows(cfg, R, ri, threads):
                rows.append(row)
                if progress:
                    progress(row)
    return rows


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v) if math.isfinite(v) else str(v)
    return str(v)


def write_csv(rows, path):
    path = Path(path)
    try:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(COLUMNS)
            for r in rows:
                w.writerow([_fmt(r.get(c)) for c in COLUMNS])
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc
    return path


_INT_COLS = {"l", "b", "k_true"}
_STR_COLS = {"scenario", "decoder", "flag"}


def read_csv(path):
    rows = []
    with open(path, newline="") as fh:
        for rec in csv.DictReader(fh):
            row = {}
            for c in COLUMNS:
                v = rec[c]
                if c in _STR_COLS:
                    row[c] = v
                elif v == "":
                    row[c] = None
                elif c in _INT_COLS:
                    row[c] = int(v)
                else:
                    row[c] = float(v)
            rows.append(row)
    return rows


def write_svg(rows, path, title=None):
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    path = Path(path)
    fig, ax = plt.subplots(figsize=(6, 4))
    mismatch = bool(rows) and rows[0]["scenario"] == "mismatch"
    xkey = "k_true" if mismatch else "R"
    series = {}
    for r in rows:
        if r["mse_mean"] is None or not math.isfinite(r["mse_mean"]):
            continue
        series.setdefault((r["scenario"], r["decoder"]), []).append((r[xkey], r["mse_mean"]))
    for (scen, dec), pts in series.items():
        pts.sort()
        ax.plot(*zip(*pts), marker="o", label=f"{dec}" if len({s for s, _ in series}) == 1
                else f"{scen}/{dec}")
    ax.set_yscale("log")
    ax.set_xlabel("nonzeros" if mismatch else "rate R [bits/sample]")
    ax.set_ylabel("MSE")
    if title:
        ax.set_title(title)
    if series:
        ax.legend()
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    try:
        # fixed salt and no date keep reruns byte-identical
        with matplotlib.rc_context({"svg.hashsalt": "squats"}):
            fig.savefig(path, format="svg", metadata={"Date": None})
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc
    finally:
        plt.close(fig)
    return path


def emit(rows, fmt, path):
    """Write ``rows`` as ``csv`` or ``svg`` to ``path``."""
    if fmt == "csv":
        return write_csv(rows, path)
    if fmt == "svg":
        return write_svg(rows, path)
    raise ValueError(f"unknown format {fmt!r}")
