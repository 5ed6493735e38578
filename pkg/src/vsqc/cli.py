"""Command-line front end.

Commands::

    vsqc train-binary --digits 0,1
    vsqc train-multi  --digits 0,1,2 --whales 30 --iters 50
    vsqc sweep-binary --pairs 0,1 2,7 --variants circuit1,circuit5
    vsqc gradcheck
    vsqc woa-bench

Every run writes a JSON record (config snapshot, per-epoch history, final
metrics, seed, duration) plus a loss-curve CSV under ``--out``. Values come
from the built-in defaults, then an optional YAML ``--config`` file, then
explicit flags. Exit codes: 0 success, 1 accuracy or check failure, 2 bad
usage or input.
"""

from __future__ import annotations

import argparse
import csv
import itertools
import json
import logging
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np
import yaml

from . import data as mnist
from .gradcheck import DEFAULT_TOL, run_gradcheck
from .shadow import PARAMETER_SHIFT, VARIANTS
from .train import TrainConfig, TrainingDivergedError, train_binary, train_multi
from .woa import WoaConfig, optimize, shifted_sphere, sphere

logger = logging.getLogger("vsqc")

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_USAGE = 2

# short config-file keys -> TrainConfig fields
CONFIG_KEYS = {
    "N": "n_qubits",
    "n_qsc": "n_qsc",
    "D": "depth",
    "EPOCH": "epochs",
    "LR": "learning_rate",
    "BATCH": "batch_size",
    "N_train": "n_train",
    "N_test": "n_test",
}
WOA_KEYS = {
    "whales": "num_whales",
    "iters": "max_iters",
    "lb": "lower_bound",
    "ub": "upper_bound",
    "spiral_b": "spiral_b",
}
# flag dest -> TrainConfig field
FLAG_FIELDS = {
    "n_qubits": "n_qubits",
    "n_qsc": "n_qsc",
    "depth": "depth",
    "variant": "variant",
    "n_shadow": "n_shadow",
    "epochs": "epochs",
    "lr": "learning_rate",
    "batch": "batch_size",
    "n_train": "n_train",
    "n_test": "n_test",
    "n_val": "n_val",
    "seed": "seed",
    "digits": "digits",
    "woa_fitness": "woa_fitness",
}


class UsageError(ValueError):
    pass


def parse_digits(text: str) -> tuple[int, ...]:
    try:
        digits = tuple(int(t) for t in text.replace(" ", "").split(",") if t)
    except ValueError:
        raise argparse.ArgumentTypeError(f"digits must be comma-separated integers, got {text!r}")
    if not digits or any(d < 0 or d > 9 for d in digits):
        raise argparse.ArgumentTypeError(f"digits must lie in 0..9, got {text!r}")
    if len(set(digits)) != len(digits):
        raise argparse.ArgumentTypeError(f"repeated digit in {text!r}")
    return digits


def load_config_file(path) -> dict:
    """Read a flat YAML mapping into ``TrainConfig`` keyword arguments."""
    try:
        raw = yaml.safe_load(Path(path).read_text()) or {}
    except (OSError, yaml.YAMLError) as exc:
        raise UsageError(f"cannot read config file {path}: {exc}")
    if not isinstance(raw, dict):
        raise UsageError(f"config file {path} must hold a key-value mapping")
    out, woa = {}, {}
    fields = set(TrainConfig.__dataclass_fields__)
    for key, value in raw.items():
        if key in CONFIG_KEYS:
            out[CONFIG_KEYS[key]] = value
        elif key in WOA_KEYS:
            woa[WOA_KEYS[key]] = value
        elif key in fields and key != "woa":
            out[key] = value
        else:
            raise UsageError(f"unknown config key {key!r} in {path}")
    if "digits" in out and isinstance(out["digits"], str):
        out["digits"] = parse_digits(out["digits"])
    if woa:
        out["woa"] = woa
    return out


def build_config(args) -> TrainConfig:
    values = load_config_file(args.config) if getattr(args, "config", None) else {}
    woa = dict(values.pop("woa", {}))
    for dest, name in FLAG_FIELDS.items():
        v = getattr(args, dest, None)
        if v is not None:
            values[name] = v
    for dest, name in WOA_KEYS.items():
        v = getattr(args, dest, None)
        if v is not None:
            woa[name] = v
    woa["seed"] = values.get("seed", 0)
    return TrainConfig(**values, woa=WoaConfig(**woa))


# --- records ---------------------------------------------------------------------


def _jsonable(x):
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    raise TypeError(f"cannot serialize {type(x).__name__}")


def run_record(command: str, config: TrainConfig, result, duration: float) -> dict:
    record = {
        "command": command,
        "config": config.to_dict(),
        "seed": config.seed,
        "history": result.history,
        "final": {"train": result.final_train.to_dict(), "test": result.final_test.to_dict()},
        "theta": result.theta,
        "head": {"weights": result.head.weights, "bias": result.head.bias},
        "duration_s": duration,
    }
    if result.woa_trace is not None:
        record.update(
            woa_trace=result.woa_trace,
            phase1_loss=result.phase1_loss,
            refined_loss=result.refined_loss,
            woa_adopted=result.woa_adopted,
        )
    return record


def write_json(path: Path, record: dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(record, indent=2, default=_jsonable) + "\n")


def write_loss_curve(path: Path, history: list[dict]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "loss", "test_loss", "train_acc", "test_acc"])
        for h in history:
            writer.writerow([h["epoch"], h["train_loss"], h["test_loss"], h["train_acc"], h["test_acc"]])


def run_name(command: str, config: TrainConfig) -> str:
    digits = "-".join(str(d) for d in config.digits)
    return f"{command}_{digits}_{config.variant}_seed{config.seed}"


def _summary(config: TrainConfig, result) -> str:
    rows = [("split", "acc", "prec", "rec", "f1", "loss")]
    for split, m in (("train", result.final_train), ("test", result.final_test)):
        rows.append((split, *(f"{v:.4f}" for v in (m.accuracy, m.precision, m.recall, m.f1, m.loss))))
    lines = [f"digits={config.digits} variant={config.variant} seed={config.seed}"]
    lines += ["  ".join(f"{c:>6}" for c in row) for row in rows]
    return "\n".join(lines)


# --- commands --------------------------------------------------------------------


def _load(config: TrainConfig, data_dir):
    return mnist.load_task(data_dir, config.digits, config.n_train, config.n_test, config.seed, config.n_val)


def _finish(args, command: str, config: TrainConfig, result, duration: float) -> int:
    out = Path(args.out)
    name = run_name(command, config)
    write_json(out / f"{name}.json", run_record(command, config, result, duration))
    write_loss_curve(out / f"{name}_loss.csv", result.history)
    print(_summary(config, result))
    if result.woa_trace is not None:
        print(
            f"phase1_loss={result.phase1_loss:.6f} refined_loss={result.refined_loss:.6f} "
            f"woa_adopted={result.woa_adopted}"
        )
    print(f"record: {out / (name + '.json')}")
    if args.min_accuracy is not None and result.final_test.accuracy < args.min_accuracy:
        print(f"test accuracy {result.final_test.accuracy:.4f} below {args.min_accuracy}", file=sys.stderr)
        return EXIT_FAIL
    return EXIT_OK


def cmd_train_binary(args) -> int:
    config = build_config(args)
    if len(config.digits) != 2:
        raise UsageError(f"train-binary needs exactly two digits, got {config.digits}")
    train, test, _ = _load(config, args.data_dir)
    start = time.perf_counter()
    result = train_binary(train, test, config)
    return _finish(args, "train-binary", config, result, time.perf_counter() - start)


def cmd_train_multi(args) -> int:
    config = build_config(args)
    if len(config.digits) < 3:
        raise UsageError(f"train-multi needs at least three digits, got {config.digits}")
    train, test, val = _load(config, args.data_dir)
    start = time.perf_counter()
    result = train_multi(train, test, config, val_set=val)
    return _finish(args, "train-multi", config, result, time.perf_counter() - start)


def _sweep_task(payload):
    config_dict, data_dir, out = payload
    config = TrainConfig.from_dict(config_dict)
    train, test, _ = _load(config, data_dir)
    start = time.perf_counter()
    result = train_binary(train, test, config)
    duration = time.perf_counter() - start
    write_json(Path(out) / f"{run_name('train-binary', config)}.json", run_record("train-binary", config, result, duration))
    write_loss_curve(Path(out) / f"{run_name('train-binary', config)}_loss.csv", result.history)
    t = result.final_test
    return {
        "pair": "-".join(map(str, config.digits)),
        "variant": config.variant,
        "seed": config.seed,
        "test_accuracy": t.accuracy,
        "test_precision": t.precision,
        "test_recall": t.recall,
        "test_f1": t.f1,
        "test_loss": t.loss,
        "train_loss": result.final_train.loss,
    }


def cmd_sweep_binary(args) -> int:
    base = build_config(args)
    if args.all_pairs:
        pairs = list(itertools.combinations(range(10), 2))
    elif args.pairs:
        pairs = [tuple(sorted(p)) for p in args.pairs]
    else:
        raise UsageError("give --pairs or --all-pairs")
    for p in pairs:
        if len(p) != 2:
            raise UsageError(f"each pair needs two digits, got {p}")
    variants = args.variants.split(",") if args.variants else [base.variant]
    mnist.resolve_data_dir(args.data_dir)  # fail fast before any work
    payloads = []
    for pair, variant in itertools.product(pairs, variants):
        cfg = TrainConfig.from_dict({**base.to_dict(), "digits": pair, "variant": variant})
        cfg.layer()  # validate the variant early
        payloads.append((cfg.to_dict(), args.data_dir, args.out))
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            rows = list(pool.map(_sweep_task, payloads))
    else:
        rows = [_sweep_task(p) for p in payloads]
    order = {v: i for i, v in enumerate(VARIANTS)}
    rows.sort(key=lambda r: (tuple(int(d) for d in r["pair"].split("-")), order.get(r["variant"], 99)))
    table = Path(args.out) / "sweep_summary.csv"
    table.parent.mkdir(parents=True, exist_ok=True)
    with table.open("w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0]))
        writer.writeheader()
        writer.writerows(rows)
    print(f"{'pair':>5} {'variant':>9} {'test_acc':>8}")
    for r in rows:
        print(f"{r['pair']:>5} {r['variant']:>9} {r['test_accuracy']:8.4f}")
    print(f"table: {table}")
    if args.min_accuracy is not None and any(r["test_accuracy"] < args.min_accuracy for r in rows):
        return EXIT_FAIL
    return EXIT_OK


def cmd_gradcheck(args) -> int:
    report = run_gradcheck(
        n_qubits=args.n_qubits,
        n_qsc=args.n_qsc,
        depth=args.depth,
        variant=args.variant,
        draws=args.draws,
        seed=args.seed,
        shift=args.shift,
        tol=args.tol,
    )
    print(f"gradcheck {args.variant} n={args.n_qubits} n_qsc={args.n_qsc} D={args.depth} draws={args.draws}")
    for l, dev in enumerate(report.theta_deviation):
        print(f"  theta[{l:2d}]  {dev:.3e}")
    print(f"  W          {report.weight_deviation:.3e}")
    print(f"  b          {report.bias_deviation:.3e}")
    for name, dev in report.by_check.items():
        print(f"  check {name:<22} {dev:.3e}")
    print(f"max deviation {report.max_deviation:.3e} (tolerance {report.tol:g}): {'PASS' if report.passed else 'FAIL'}")
    if args.out:
        write_json(
            Path(args.out) / f"gradcheck_seed{args.seed}.json",
            {
                "command": "gradcheck",
                "config": {k: getattr(args, k) for k in ("n_qubits", "n_qsc", "depth", "variant", "draws", "seed", "shift", "tol")},
                "seed": args.seed,
                "max_deviation": report.max_deviation,
                "theta_deviation": report.theta_deviation,
                "weight_deviation": report.weight_deviation,
                "bias_deviation": report.bias_deviation,
                "passed": report.passed,
            },
        )
    return EXIT_OK if report.passed else EXIT_FAIL


def cmd_woa_bench(args) -> int:
    config = WoaConfig(
        num_whales=args.whales if args.whales is not None else 30,
        max_iters=args.iters if args.iters is not None else 200,
        lower_bound=args.lb if args.lb is not None else -10.0,
        upper_bound=args.ub if args.ub is not None else 10.0,
        spiral_b=args.spiral_b if args.spiral_b is not None else 1.0,
        seed=args.seed if args.seed is not None else 0,
    )
    if args.function == "sphere":
        fitness = sphere
    else:
        fitness = shifted_sphere(np.full(args.dim, args.center))
    start = time.perf_counter()
    best, score, trace = optimize(fitness, args.dim, config)
    duration = time.perf_counter() - start
    monotone = bool(np.all(np.diff(trace) <= 0))
    ok = monotone and score <= args.target
    print(f"{args.function} dim={args.dim} whales={config.num_whales} iters={config.max_iters}")
    print(f"best score {score:.3e} (target {args.target:g}), monotone trace: {monotone}")
    if args.out:
        write_json(
            Path(args.out) / f"woa-bench_{args.function}_seed{config.seed}.json",
            {
                "command": "woa-bench",
                "config": {**vars(config), "function": args.function, "dim": args.dim, "center": args.center},
                "seed": config.seed,
                "best_score": score,
                "best_position": best,
                "woa_trace": trace,
                "duration_s": duration,
            },
        )
    return EXIT_OK if ok else EXIT_FAIL


# --- parser ----------------------------------------------------------------------


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="YAML key-value file (N, n_qsc, D, EPOCH, LR, BATCH, N_train, N_test, ...)")
    p.add_argument("--variant", help=f"shadow circuit template, one of {', '.join(VARIANTS)}")
    p.add_argument("--n-qubits", type=int, dest="n_qubits")
    p.add_argument("--n-qsc", type=int, dest="n_qsc")
    p.add_argument("--depth", type=int)
    p.add_argument("--n-shadow", type=int, dest="n_shadow")
    p.add_argument("--epochs", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--batch", type=int)
    p.add_argument("--n-train", type=int, dest="n_train", help="training samples per class")
    p.add_argument("--n-test", type=int, dest="n_test", help="test samples per class")
    p.add_argument("--seed", type=int)
    p.add_argument("--data-dir", dest="data_dir", help=f"MNIST IDX directory (default ${mnist.DATA_DIR_ENV} or data/mnist)")
    p.add_argument("--out", default="runs", help="output directory for records and CSV files")
    p.add_argument("--min-accuracy", type=float, dest="min_accuracy", help="exit 1 if test accuracy falls below this")


def _woa_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--whales", type=int)
    p.add_argument("--iters", type=int)
    p.add_argument("--lb", type=float)
    p.add_argument("--ub", type=float)
    p.add_argument("--spiral-b", type=float, dest="spiral_b")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="vsqc", description="Shadow-circuit quantum classifier experiments.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log per-epoch progress")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train-binary", help="train a two-digit classifier")
    _common(p)
    p.add_argument("--digits", type=parse_digits, default=None, help="two digits, e.g. 0,1")
    p.set_defaults(func=cmd_train_binary)

    p = sub.add_parser("train-multi", help="train a multi-digit classifier with WOA head refinement")
    _common(p)
    _woa_flags(p)
    p.add_argument("--digits", type=parse_digits, default=None, help="three or more digits, e.g. 0,1,2")
    p.add_argument("--n-val", type=int, dest="n_val", help="validation samples per class")
    p.add_argument("--woa-fitness", choices=("train", "val"), dest="woa_fitness")
    p.set_defaults(func=cmd_train_multi)

    p = sub.add_parser("sweep-binary", help="train many digit pairs and/or variants")
    _common(p)
    p.add_argument("--pairs", nargs="+", type=parse_digits, help="pairs such as 0,1 2,7")
    p.add_argument("--all-pairs", action="store_true", dest="all_pairs", help="all 45 digit pairs")
    p.add_argument("--variants", help="comma-separated variants (default: --variant)")
    p.add_argument("--jobs", type=int, default=1, help="worker processes")
    p.set_defaults(func=cmd_sweep_binary)

    p = sub.add_parser("gradcheck", help="compare gradients with central differences")
    p.add_argument("--variant", default="circuit5")
    p.add_argument("--n-qubits", type=int, dest="n_qubits", default=4)
    p.add_argument("--n-qsc", type=int, dest="n_qsc", default=2)
    p.add_argument("--depth", type=int, default=2)
    p.add_argument("--draws", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tol", type=float, default=DEFAULT_TOL)
    p.add_argument("--out", default=None)
    p.add_argument("--shift", type=float, default=PARAMETER_SHIFT, help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("woa-bench", help="run WOA on sphere benchmarks")
    _woa_flags(p)
    p.add_argument("--function", choices=("sphere", "shifted-sphere"), default="sphere")
    p.add_argument("--dim", type=int, default=10)
    p.add_argument("--center", type=float, default=1.0, help="shift of the shifted sphere")
    p.add_argument("--target", type=float, default=1e-2, help="best score needed for exit 0")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_woa_bench)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:  # bad flags, config, paths or data files
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except TrainingDivergedError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
