"""Command-line entry point.

On failure the last line on stderr is ``error: {"type": ..., "message": ...}``
and the exit status is nonzero.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import harness, plotting
from .config import VARIANTS, ConfigError, ExperimentConfig, dump_config, load_config
from .quantize import quantize_file

log = logging.getLogger("seadbs")

EXIT_CONFIG = 2
EXIT_RUNTIME = 1

TABLE2_COLUMNS = [
    "interval", "a_mean_beta_power", "b_mean_beta_power", "a_mean_reward", "b_mean_reward",
    "psd_wins", "reward_wins", "n_seeds", "psd_p", "reward_p",
]


def _load(args) -> ExperimentConfig:
    cfg = load_config(args.config)
    if getattr(args, "variant", None):
        cfg.variant = args.variant
    cfg.validate()
    return cfg


def _seeds(args, cfg: ExperimentConfig) -> list[int]:
    return [args.seed] if args.seed is not None else list(cfg.seeds)


def _out(args, cfg: ExperimentConfig) -> Path:
    out = Path(args.out or cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _models(paths: list[str]) -> dict[str, str]:
    models = {}
    for p in paths:
        path = Path(p)
        models[f"{path.parent.name}/{path.stem}"] = str(path)
    return models


def cmd_calibrate(args) -> int:
    cfg = _load(args)
    res = harness.calibrate(cfg)
    out = _out(args, cfg)
    harness.write_rows(out / "calibration.csv", ["mode", "seed", "beta_power"], res.rows)
    summary = {
        "threshold": res.threshold,
        "parkinsonian_min": float(res.betas("parkinsonian").min()),
        "healthy_max": float(res.betas("healthy").max()),
        "p_value": res.p_value,
        "passed": res.passed,
    }
    harness.write_rows(out / "calibration_summary.csv", list(summary), [summary])
    print(json.dumps(summary))
    if not res.passed:
        raise harness.CalibrationError("beta-separation check failed")
    return 0


def cmd_train(args) -> int:
    cfg = _load(args)
    out = _out(args, cfg)
    (out / "config.yaml").write_text(dump_config(cfg))
    res = harness.run_training(cfg, out, _seeds(args, cfg), cfg.variant)
    for seed, r in res.items():
        print(f"{cfg.variant} seed {seed}: {r['checkpoint']}")
    return 0


def cmd_ablation(args) -> int:
    cfg = _load(args)
    out = _out(args, cfg)
    (out / "config.yaml").write_text(dump_config(cfg))
    res = harness.run_ablation(cfg, out, _seeds(args, cfg))
    print("ranking:", " < ".join(res["ranking"]))
    return 0


def _checkpoint_sets(run_dir: Path, variant: str) -> dict[int, Path]:
    found = {}
    for p in sorted((run_dir / variant).glob("checkpoint_*.ckpt")):
        tail = p.stem.split("_", 1)[1]
        if tail.isdigit():
            found[int(tail)] = p
    return found


def cmd_eval_seedshift(args) -> int:
    cfg = _load(args)
    out = _out(args, cfg)
    if args.interval is not None:
        cfg.evaluation.intervals = [args.interval]
        cfg.validate()
    if args.checkpoint:
        harness.seed_shift_report(_models(args.checkpoint), cfg, out)
        return 0
    # paired SEA-DBS vs baseline comparison over every training seed found
    run_dir = Path(args.runs or out)
    a, b = _checkpoint_sets(run_dir, "sea_dbs"), _checkpoint_sets(run_dir, "baseline")
    shared = sorted(set(a) & set(b))
    if not shared:
        raise ConfigError(f"no paired sea_dbs/baseline checkpoints under {run_dir}")
    rows = harness.compare_seed_shift({s: a[s] for s in shared}, {s: b[s] for s in shared}, cfg)
    harness.write_rows(out / "table2.csv", TABLE2_COLUMNS, rows)
    for r in rows:
        print(f"n={r['interval']}: psd {r['a_mean_beta_power']:.4f} vs {r['b_mean_beta_power']:.4f}, "
              f"reward {r['a_mean_reward']:.4f} vs {r['b_mean_reward']:.4f}")
    return 0


def cmd_eval_carrier(args) -> int:
    cfg = _load(args)
    out = _out(args, cfg)
    if args.freq is not None:
        cfg.evaluation.carrier_freqs = [args.freq]
    if not args.checkpoint:
        raise ConfigError("eval-carrier needs --checkpoint")
    for f in cfg.evaluation.carrier_freqs:
        if f <= 0:
            raise ConfigError(f"carrier frequency must be positive, got {f}")
    for s in harness.carrier_report(_models(args.checkpoint), cfg, out):
        print(f"{s['model']} {s['carrier_freq']:g} Hz: suppression {s['suppression']:.4f}")
    return 0


def cmd_quantize(args) -> int:
    full, half = quantize_file(args.src, args.dst)
    print(json.dumps({"fp32_payload_bytes": full, "fp16_payload_bytes": half, "ratio": half / full}))
    return 0


def cmd_parity(args) -> int:
    cfg = _load(args)
    out = _out(args, cfg)
    if not args.checkpoint or len(args.checkpoint) != 1:
        raise ConfigError("parity needs exactly one --checkpoint")
    s = harness.run_quantization_parity(args.checkpoint[0], cfg, out)
    print(json.dumps({k: s[k] for k in harness.PARITY_COLUMNS}))
    return 0


def cmd_plot(args) -> int:
    """Re-render figures from CSVs already present under ``--out``."""
    out = Path(args.out or ".")
    made = []
    for ep_csv in sorted(out.glob("*/train_episodes_*.csv")):
        rows = harness.read_rows(ep_csv)
        x = np.array([int(r["episode"]) for r in rows])
        beta = np.array([float(r["mean_beta_power"]) for r in rows])
        ret = np.array([float(r["cumulative_reward"]) for r in rows])
        made += plotting.training_curves({ep_csv.parent.name: (x, beta, ret)}, ep_csv.parent,
                                         prefix=ep_csv.stem.replace("episodes", "curves"))
    abl = out / "ablation_episodes.csv"
    if abl.exists():
        rows = harness.read_rows(abl)
        curves = {}
        for v in VARIANTS:
            vr = [r for r in rows if r["variant"] == v]
            if not vr:
                continue
            eps = sorted({int(r["episode"]) for r in vr})
            beta = [np.mean([float(r["mean_beta_power"]) for r in vr if int(r["episode"]) == e]) for e in eps]
            ret = [np.mean([float(r["cumulative_reward"]) for r in vr if int(r["episode"]) == e]) for e in eps]
            curves[v] = (np.array(eps), np.array(beta), np.array(ret))
        made += plotting.training_curves(curves, out, prefix="ablation")
    if not made:
        raise ConfigError(f"no plottable CSVs under {out}")
    for p in made:
        print(p)
    return 0


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print("error: " + json.dumps({"type": "UsageError", "message": message}), file=sys.stderr)
        sys.exit(EXIT_CONFIG)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="seadbs", description="Closed-loop adaptive DBS experiments.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, fn, help_):
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("--config", help="YAML experiment config")
        sp.add_argument("--seed", type=int, help="single training seed (default: config seeds)")
        sp.add_argument("--variant", help=f"one of {', '.join(VARIANTS)}")
        sp.add_argument("--out", help="output directory")
        sp.set_defaults(fn=fn)
        return sp

    add("calibrate", cmd_calibrate, "unstimulated beta check in both modes")
    add("train", cmd_train, "train one variant")
    add("ablation", cmd_ablation, "train all four variants on shared seeds")
    sp = add("eval-seedshift", cmd_eval_seedshift, "greedy rollouts with periodic re-seeding")
    sp.add_argument("--checkpoint", action="append")
    sp.add_argument("--runs", help="directory with sea_dbs/ and baseline/ checkpoints")
    sp.add_argument("--interval", type=int)
    sp = add("eval-carrier", cmd_eval_carrier, "greedy rollouts at each carrier frequency")
    sp.add_argument("--checkpoint", action="append")
    sp.add_argument("--freq", type=float)
    sp = add("parity", cmd_parity, "fp32 vs fp16 evaluation")
    sp.add_argument("--checkpoint", action="append")
    add("plot", cmd_plot, "re-render figures from CSVs")
    sp = sub.add_parser("quantize", help="fp32 checkpoint -> fp16 checkpoint")
    sp.add_argument("src")
    sp.add_argument("dst")
    sp.set_defaults(fn=cmd_quantize)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.fn(args)
    except (ConfigError, harness.CalibrationError, ValueError, OSError) as exc:
        code = EXIT_CONFIG if isinstance(exc, ConfigError) else EXIT_RUNTIME
        print("error: " + json.dumps({"type": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return code


if __name__ == "__main__":
    sys.exit(main())
