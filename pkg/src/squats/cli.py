"""``squats`` command line: codebooks, encoding, decoding, sweeps and network runs.

Exit codes: 0 ok, 2 bad configuration, 3 infeasible parameters, 4 decoder
budget exceeded.
"""
import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import bench
from .codebook import Codebook, generate
from .codec import (DEFAULT_BUDGET, NoiseModel, Register, decode_coma, decode_ml, encode)
from .errors import BudgetExceeded, ConfigError, FeasibilityError
from .network import (DistributedCodebook, NetworkGraph, decode_distributed,
                      encode_distributed, gen_joint_sparse, random_failures, simulate,
                      single_hop)
from .quantizer import ScalarQuantizer
from .rates import Overall, Structured, bits_for_rate, level_budget

log = logging.getLogger("squats")

EXIT_OK, EXIT_CONFIG, EXIT_INFEASIBLE, EXIT_BUDGET = 0, 2, 3, 4


def _load_config(path):
    if path is None:
        return {}
    try:
        cfg = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"{path}: {exc}") from None
    if not isinstance(cfg, dict):
        raise ConfigError(f"{path}: top level must be an object")
    return cfg


def _require(cfg, key, where="config"):
    if key not in cfg:
        raise ConfigError(f"{where} is missing {key!r}")
    return cfg[key]


def _relative(base, p):
    p = Path(p)
    return p if p.is_absolute() or base is None else Path(base).parent / p


def _quantizer(cfg, l):
    q = cfg.get("quantizer", {})
    return ScalarQuantizer(l, lo=float(q.get("lo", -2.0)), hi=float(q.get("hi", 2.0)),
                           reproduction=q.get("reproduction", "midpoint"))


def _codebook_params(cb):
    """``T, l, k, b`` from an explicit block or from ``R`` (and ``epsilon``)."""
    T = int(_require(cb, "T", "codebook block"))
    k = int(_require(cb, "k", "codebook block"))
    if "b" in cb:
        b = int(cb["b"])
    else:
        b = bits_for_rate(float(_require(cb, "R", "codebook block")), T)
    if "l" in cb:
        l = int(cb["l"])
    else:
        R = b / T
        l = level_budget(T, k, R, float(cb.get("epsilon", 1.0)), cap=cb.get("level_cap", 1024))
    return T, l, k, b


def _read_signal(path):
    path = Path(path)
    if path.suffix == ".npy":
        return np.load(path)
    return np.loadtxt(path, delimiter="," if path.suffix == ".csv" else None, ndmin=1)


def cmd_gen_codebook(args, cfg):
    block = cfg.get("codebook", cfg)
    T, l, k, b = _codebook_params(block)
    seed = args.seed if args.seed is not None else block.get("seed")
    cb = generate(T, l, k, b, seed=seed,
                  reject_duplicates=bool(block.get("reject_duplicates", False)))
    path = cb.save(args.out / block.get("file", "codebook.sqts"))
    log.info("wrote %s (T=%d l=%d k=%d b=%d seed=%d)", path, T, l, k, b, cb.seed)
    return EXIT_OK


def cmd_encode(args, cfg):
    cb = Codebook.load(_relative(args.config, args.codebook or _require(cfg, "codebook")))
    signal = _read_signal(_relative(args.config, args.input or _require(cfg, "signal")))
    reg = encode(np.asarray(signal, dtype=float).reshape(-1), cb, _quantizer(cfg, cb.l))
    out = args.out / cfg.get("register_file", "register.bin")
    out.write_bytes(reg.to_bytes())
    out.with_suffix(out.suffix + ".json").write_text(json.dumps({"b": reg.b, **cb.header()},
                                                                indent=2))
    log.info("wrote %s (%d of %d bits set)", out, reg.popcount(), reg.b)
    return EXIT_OK


def cmd_decode(args, cfg):
    cb = Codebook.load(_relative(args.config, args.codebook or _require(cfg, "codebook")))
    reg_path = _relative(args.config, args.input or _require(cfg, "register"))
    reg = Register.from_bytes(Path(reg_path).read_bytes(), cb.b)
    qz = _quantizer(cfg, cb.l)
    decoder = cfg.get("decoder", "ml")
    noise = cfg.get("noise")
    noise = NoiseModel(float(noise.get("q", 0)), float(noise.get("u", 0))) if noise else None
    rc = EXIT_OK
    if decoder == "coma":
        res = decode_coma(reg, cb, qz, np.random.default_rng(args.seed))
    elif decoder == "ml":
        try:
            res = decode_ml(reg, cb, qz, k=cfg.get("k"), noise=noise,
                            exact=bool(cfg.get("exact", False)),
                            budget=int(cfg.get("budget", DEFAULT_BUDGET)))
        except BudgetExceeded as exc:
            log.error("%s; writing the best partial result", exc)
            res, rc = exc.partial, EXIT_BUDGET
    else:
        raise ConfigError(f"unknown decoder {decoder!r}")
    out = args.out / cfg.get("signal_file", "decoded.csv")
    np.savetxt(out, res.signal, delimiter=",")
    meta = {"support": [list(p) for p in res.support], "exact_match": res.exact_match,
            "fallback": res.fallback, "log_likelihood": res.log_likelihood}
    out.with_suffix(".json").write_text(json.dumps(meta, indent=2))
    log.info("wrote %s (%d nonzeros)", out, len(res.support))
    return rc


def cmd_bench(args, cfg):
    exp = bench.ExperimentConfig.from_dict(cfg.get("experiment", cfg))
    if args.seed is not None:
        exp.seed = args.seed
    if args.no_timing:
        exp.record_timing = False
    rows = bench.run_sweep(exp, threads=args.threads,
                           progress=lambda r: log.info("%s R=%s %s mse=%.3g %s", r["scenario"],
                                                       r["R"], r["decoder"], r["mse_mean"],
                                                       r["flag"]))
    stem = cfg.get("name", f"bench_{exp.scenario}")
    for fmt in args.format:
        path = bench.emit(rows, fmt, args.out / f"{stem}.{fmt}")
        log.info("wrote %s", path)
    return EXIT_OK


def cmd_net_sim(args, cfg):
    n = int(_require(cfg, "n"))
    T = int(_require(cfg, "T"))
    model = cfg.get("model", {"overall": cfg.get("k", 3)})
    model = Overall(int(model["overall"])) if "overall" in model else Structured(
        int(model["k_t"]), int(model["k_s"]))
    graph = NetworkGraph.from_dict(cfg["network"]) if isinstance(cfg.get("network"), dict) else (
        NetworkGraph.load(_relative(args.config, cfg["network"])) if "network" in cfg
        else single_hop(n))
    if len(graph.encoders) != n:
        raise ConfigError(f"network has {len(graph.encoders)} encoders, config says n={n}")
    b = int(cfg["b"]) if "b" in cfg else bits_for_rate(float(_require(cfg, "R")), n * T)
    l = int(cfg["l"]) if "l" in cfg else level_budget(n * T, model.k, b / (n * T),
                                                    float(cfg.get("epsilon", 1.0)), cap=1024)
    seed = args.seed if args.seed is not None else cfg.get("seed", 0)
    ss = np.random.SeedSequence(seed)
    dcb = DistributedCodebook.generate(n, T, l, model.k, b,
                                       seed=int(ss.generate_state(1, dtype=np.uint64)[0]))
    qz = _quantizer(cfg, l)
    rows = []
    for t, child in enumerate(ss.spawn(int(cfg.get("trials", 10)))):
        rng = np.random.default_rng(child)
        s = gen_joint_sparse(n, T, model, rng)
        inputs = encode_distributed(s, dcb, qz)
        failures = random_failures(graph, float(cfg.get("failure_rate", 0.0)), rng)
        y = simulate(graph, inputs, failures)
        mono = encode(s.reshape(-1), dcb.base, qz)
        res = decode_distributed(y, dcb, qz, cfg.get("decoder", "ml"), k=model.k, rng=rng)
        rows.append({"trial": t, "failures": len(failures), "bit_exact": y == mono,
                     "mse": bench.mse(s, res.signal)})
    out = args.out / cfg.get("file", "net_sim.csv")
    with open(out, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]) if rows else ["trial"])
        w.writeheader()
        w.writerows(rows)
    log.info("wrote %s; %d/%d runs bit-exact", out, sum(r["bit_exact"] for r in rows), len(rows))
    return EXIT_OK


COMMANDS = {"gen-codebook": cmd_gen_codebook, "encode": cmd_encode, "decode": cmd_decode,
            "bench": cmd_bench, "net-sim": cmd_net_sim}


def build_parser():
    p = argparse.ArgumentParser(prog="squats", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", type=Path, help="JSON configuration file")
        sp.add_argument("--out", type=Path, default=Path("."), help="output directory")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--threads", type=int, default=1)
        sp.add_argument("--format", action="append", choices=["csv", "svg"],
                        help="output format (repeatable; default csv)")
        sp.add_argument("-v", "--verbose", action="store_true")
        if name in ("encode", "decode"):
            sp.add_argument("--codebook", type=Path, help="codebook file (overrides config)")
            sp.add_argument("--input", type=Path,
                            help="signal (encode) or register (decode) file")
        if name == "bench":
            sp.add_argument("--no-timing", action="store_true",
                            help="write wall_ms as 0 so reruns are byte-identical")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    args.format = args.format or ["csv"]
    try:
        cfg = _load_config(args.config)
        args.out.mkdir(parents=True, exist_ok=True)
        return COMMANDS[args.command](args, cfg)
    except ConfigError as exc:
        print(f"squats: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FeasibilityError as exc:
        print(f"squats: infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except BudgetExceeded as exc:
        print(f"squats: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except (KeyError, TypeError, ValueError) as exc:
        print(f"squats: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
