"""Command-line entry point.

    minvar generate|train|oracle|eval|grid|experiment [--config PATH] [--seed N] [--out DIR] [--set key=value ...]

Exit codes: 0 success, 1 usage/config error, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import data as data_mod
from . import network
from .config import RunConfig
from .core_math import ConvergenceError
from .experiment import RunReport, build_report, datasets, oracle_probe_accuracy, run_table, train_model
from .oracle_eval import TrainingError, spectral_embedding

log = logging.getLogger("minvar")

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2


class UsageError(Exception):
    pass


def _write_matrix_csv(path, header, columns):
    with open(path, "w", newline="\n") as f:
        f.write(",".join(header) + "\n")
        for row in zip(*columns):
            f.write(",".join(v if isinstance(v, str) else _fmt(v) for v in row) + "\n")


def _fmt(v):
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return f"{float(v):.17g}"


def _load_or_generate(cfg: RunConfig, out: Path):
    path = out / "dataset.csv"
    if path.exists():
        ds = data_mod.load_csv(path)
        train_set, test_set = data_mod.split(ds, cfg.train_fraction, cfg.seed)
        return ds, train_set, test_set
    return datasets(cfg)


def cmd_generate(cfg: RunConfig, out: Path, args) -> int:
    ds = data_mod.make_moons(cfg.moon_params())
    path = out / "dataset.csv"
    data_mod.save_csv(ds, path)
    print(path)
    return EXIT_OK


def cmd_train(cfg: RunConfig, out: Path, args) -> int:
    if args.print_config:
        sys.stdout.write(cfg.to_text())
        return EXIT_OK
    _, train_set, _ = _load_or_generate(cfg, out)
    t0 = time.perf_counter()

    def progress(epoch, energy):
        if epoch % max(cfg.epochs // 10, 1) == 0 or epoch == cfg.epochs - 1:
            log.info("epoch %d objective %.6g penalty %.6g", epoch, energy.objective, energy.penalty)

    net, history = train_model(cfg, train_set, log=progress)
    network.save(net, out / "net.bin")
    history.to_csv(out / "history.csv", include_time=cfg.record_time)
    (out / "config.txt").write_text(cfg.to_text())
    report = build_report(cfg, [net], [cfg.seed], histories=[history])
    report.metadata["train_seconds"] = time.perf_counter() - t0
    (out / "train_report.json").write_text(report.to_json())
    if cfg.lam_value() == 0.0 and report.collapse.get("collapsed"):
        print(f"collapse detected: covariance top eigenvalue ratio {report.collapse['ratio']:.3g}")
    print(out / "net.bin")
    return EXIT_OK


def cmd_oracle(cfg: RunConfig, out: Path, args) -> int:
    ds, _, _ = _load_or_generate(cfg, out)
    if len(ds) < cfg.p + 2:
        raise UsageError(f"need n >= p + 2 points for the oracle, got n={len(ds)}, p={cfg.p}")
    orc = spectral_embedding(ds.points, cfg.kernel_sigma, cfg.p, cfg.drop_constant)
    n = len(ds)
    # eigenvalues of the empirical operator L / n, which do not grow with n
    values = orc.eigenvalues / n
    _write_matrix_csv(out / "oracle_eigenvalues.csv", ["index", "eigenvalue"], [range(n), values])
    header = ["x", "y", "moon", "quadrant", "t"] + [f"phi_{k}" for k in range(cfg.p)]
    cols = [ds.points[:, 0], ds.points[:, 1], ds.moon, ds.quadrant, ds.t_param] + list(orc.embedding.T)
    _write_matrix_csv(out / "oracle_embedding.csv", header, cols)
    print(out / "oracle_eigenvalues.csv")
    return EXIT_OK


def _load_oracle(path: Path):
    if not path.exists():
        return None
    raw = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return raw[:, 5:]


def cmd_eval(cfg: RunConfig, out: Path, args) -> int:
    ckpt = Path(args.checkpoint) if args.checkpoint else out / "net.bin"
    oracle_path = Path(args.oracle) if args.oracle else out / "oracle_embedding.csv"
    ds, train_set, test_set = _load_or_generate(cfg, out)
    if args.oracle_features or not ckpt.exists():
        if not args.oracle_features:
            raise UsageError(f"checkpoint {ckpt} not found (use --oracle-features to probe the oracle)")
        acc = oracle_probe_accuracy(cfg, ds, train_set, test_set)
        result = {"oracle_probe_accuracy": acc, "seed": cfg.seed, "p": cfg.p}
        (out / "oracle_report.json").write_text(json.dumps(result, indent=2, sort_keys=True))
        print(f"oracle probe accuracy {acc:.4f}")
        return EXIT_OK
    net = network.load(ckpt)
    if net.config.output_dim != cfg.p:
        cfg = cfg.updated({"p": net.config.output_dim})
    oracle = _load_oracle(oracle_path)
    if oracle is not None and oracle.shape != (len(ds), cfg.p):
        oracle = None
    report = build_report(cfg, [net], [cfg.seed], oracle_embedding=oracle)
    (out / "report.json").write_text(report.to_json())
    print(f"probe accuracy {report.probe['accuracy_mean']:.4f}; alignment {np.round(report.alignment, 4).tolist()}")
    return EXIT_OK


def cmd_grid(cfg: RunConfig, out: Path, args) -> int:
    ckpt = Path(args.checkpoint) if args.checkpoint else out / "net.bin"
    if not ckpt.exists():
        raise UsageError(f"checkpoint {ckpt} not found")
    net = network.load(ckpt)
    grid = data_mod.make_grid(*cfg.grid_ranges(), cfg.grid_resolution)
    phi = network.forward(net, grid)
    header = ["x", "y"] + [f"phi_{k}" for k in range(phi.shape[1])]
    _write_matrix_csv(out / "grid.csv", header, [grid[:, 0], grid[:, 1]] + list(phi.T))
    print(out / "grid.csv")
    return EXIT_OK


def cmd_experiment(cfg: RunConfig, out: Path, args) -> int:
    rows = run_table(cfg, log=lambda msg: log.info(msg))
    (out / "table.json").write_text(json.dumps(rows, indent=2, sort_keys=True))
    for name, row in rows.items():
        print(f"{name:10s} {100 * row['mean']:6.2f} +- {100 * row['std']:.2f}")
    return EXIT_OK


COMMANDS = {
    "generate": cmd_generate,
    "train": cmd_train,
    "oracle": cmd_oracle,
    "eval": cmd_eval,
    "grid": cmd_grid,
    "experiment": cmd_experiment,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="minvar", description="Minimal-variation embeddings of 2-D point clouds.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="flat key = value config file")
        p.add_argument("--seed", type=int)
        p.add_argument("--out", help="output directory")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="override any config key (repeatable)")
        p.add_argument("--objective", choices=["ssl", "graph", "dirichlet"])
        p.add_argument("--p", type=int)
        p.add_argument("--n", type=int)
        p.add_argument("--epochs", type=int)
        p.add_argument("--lam")
        p.add_argument("-v", "--verbose", action="store_true")
        if name == "train":
            p.add_argument("--print-config", action="store_true")
        if name in ("eval", "grid"):
            p.add_argument("--checkpoint")
        if name == "eval":
            p.add_argument("--oracle")
            p.add_argument("--oracle-features", action="store_true",
                           help="probe the spectral oracle instead of a checkpoint")
    return parser


def resolve_config(args) -> RunConfig:
    text = Path(args.config).read_text() if args.config else ""
    overrides = {}
    for item in args.set:
        if "=" not in item:
            raise UsageError(f"--set expects KEY=VALUE, got {item!r}")
        k, v = item.split("=", 1)
        overrides[k.strip()] = v.strip()
    for key in ("seed", "out", "objective", "p", "n", "epochs", "lam"):
        value = getattr(args, key, None)
        if value is not None:
            overrides[key] = str(value)
    return RunConfig.from_text(text, overrides)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code == 0 else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(levelname)s %(message)s")
    try:
        cfg = resolve_config(args)
        out = Path(cfg.out)
        if not (args.command == "train" and args.print_config):
            out.mkdir(parents=True, exist_ok=True)
        return COMMANDS[args.command](cfg, out, args)
    except (UsageError, ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (TrainingError, ConvergenceError, FloatingPointError) as e:
        print(f"numerical failure: {e}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
