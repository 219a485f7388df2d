"""End-to-end pipeline pieces: data, training, oracle, probe, report."""

from __future__ import annotations

import json
import platform
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from . import __version__
from .config import RunConfig
from .data import Dataset, make_moons, split
from .network import Network, forward, init
from .objectives import ObjectiveKind, smoothed_energy
from .oracle_eval import (
    align,
    covariance_top_eigenvalue,
    off_manifold_magnitude,
    probe_accuracy,
    probe_fit,
    spectral_embedding,
)
from .trainer import TrainHistory, evaluate, train
from .data import make_grid


def datasets(cfg: RunConfig, seed: int | None = None):
    """Full dataset and its stratified (train, test) split for one seed."""
    seed = cfg.seed if seed is None else seed
    ds = make_moons(cfg.moon_params(seed))
    train_set, test_set = split(ds, cfg.train_fraction, seed)
    return ds, train_set, test_set


def train_model(cfg: RunConfig, train_set: Dataset, seed: int | None = None, log=None):
    net = init(cfg.network_config(seed))
    tc = cfg.train_config(seed)
    cov0 = covariance_top_eigenvalue(forward(net, train_set.points))
    net, history = train(net, train_set, tc, log=log)
    history.initial_cov_top = cov0
    return net, history


def probe_scores(features_train, y_train, features_test, y_test, ridge=1e-6, seed=0):
    """Held-out probe accuracy plus a shuffled-label control."""
    model = probe_fit(features_train, y_train, ridge)
    acc = probe_accuracy(model, features_test, y_test)
    rng = np.random.default_rng(seed)
    shuffled = rng.permutation(y_train)
    control = probe_accuracy(probe_fit(features_train, shuffled, ridge), features_test, y_test)
    return acc, control


def oracle_probe_accuracy(cfg: RunConfig, ds: Dataset, train_set: Dataset, test_set: Dataset, p=None):
    """Oracle on all points (transductive), probe fitted on train rows and scored on test rows."""
    orc = spectral_embedding(ds.points, cfg.kernel_sigma, p or cfg.p, cfg.drop_constant)
    index = {tuple(x): i for i, x in enumerate(ds.points)}
    tr = [index[tuple(x)] for x in train_set.points]
    te = [index[tuple(x)] for x in test_set.points]
    model = probe_fit(orc.embedding[tr], train_set.quadrant, cfg.ridge)
    return probe_accuracy(model, orc.embedding[te], test_set.quadrant)


@dataclass
class RunReport:
    config: dict
    energy: dict
    probe: dict
    alignment: list
    smoothed_energy: float
    off_manifold: dict
    collapse: dict
    seeds: list
    versions: dict
    metadata: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> RunReport:
        return cls(**json.loads(text))


def versions() -> dict:
    return {"minvar": __version__, "numpy": np.__version__, "python": platform.python_version()}


def build_report(cfg: RunConfig, nets: list[Network], seeds: list[int], histories=None,
                 oracle_embedding=None) -> RunReport:
    """Evaluate one or more trained networks (one per seed) into a report."""
    accs, controls, align_rows, smooth_vals, off_vals, energies = [], [], [], [], [], []
    tc = cfg.train_config()
    for k, (net, seed) in enumerate(zip(nets, seeds)):
        ds, train_set, test_set = datasets(cfg, seed)
        f_train = forward(net, train_set.points)
        f_test = forward(net, test_set.points)
        acc, control = probe_scores(f_train, train_set.quadrant, f_test, test_set.quadrant, cfg.ridge, seed)
        accs.append(acc)
        controls.append(control)
        if oracle_embedding is not None and k == 0:
            ref = oracle_embedding
        else:
            ref = spectral_embedding(ds.points, cfg.kernel_sigma, cfg.p, cfg.drop_constant).embedding
        align_rows.append(align(forward(net, ds.points), ref).tolist())
        smooth_vals.append(smoothed_energy(f_train, train_set.points, cfg.kernel_sigma))
        grid = make_grid(*cfg.grid_ranges(), min(cfg.grid_resolution, 60))
        on, off = off_manifold_magnitude(net, grid, ds.points, cfg.off_margin)
        off_vals.append({"on_mean": on, "off_mean": off})
        lam = histories[k].lam if histories else None
        e = evaluate(net, train_set.points, tc, lam=lam, seed=seed)
        energies.append({"objective": e.objective, "penalty": e.penalty, "lam": e.lam, "total": e.total})
    collapse = {}
    if histories:
        h = histories[0]
        ds, train_set, _ = datasets(cfg, seeds[0])
        final = covariance_top_eigenvalue(forward(nets[0], train_set.points))
        initial = getattr(h, "initial_cov_top", float("nan"))
        collapse = {"initial_cov_top": initial, "final_cov_top": final,
                    "ratio": final / initial if initial else float("nan"),
                    "collapsed": bool(final < 1e-3 * initial)}
    return RunReport(
        config={k: v for k, v in asdict(cfg).items()},
        energy=energies[0] if len(energies) == 1 else {"per_seed": energies},
        probe={"accuracy_mean": float(np.mean(accs)), "accuracy_std": float(np.std(accs)),
               "per_seed": accs, "shuffled_label_control": float(np.mean(controls))},
        alignment=align_rows[0] if len(align_rows) == 1 else align_rows,
        smoothed_energy=float(np.mean(smooth_vals)),
        off_manifold=off_vals[0] if len(off_vals) == 1 else {"per_seed": off_vals},
        collapse=collapse,
        seeds=list(seeds),
        versions=versions(),
        metadata={"created": time.strftime("%Y-%m-%dT%H:%M:%S")},
    )


def run_table(cfg: RunConfig, objectives=("ssl", "dirichlet", "graph"), seeds=None, log=None) -> dict:
    """Multi-seed held-out probe accuracy per objective, plus oracle and random-feature rows."""
    seeds = list(range(cfg.seed, cfg.seed + cfg.seeds)) if seeds is None else list(seeds)
    rows = {}
    for name in objectives:
        sub = cfg.updated({"objective": name})
        accs, penalties = [], []
        for seed in seeds:
            t0 = time.perf_counter()
            _, train_set, test_set = datasets(sub, seed)
            net, history = train_model(sub, train_set, seed)
            acc, _ = probe_scores(forward(net, train_set.points), train_set.quadrant,
                                  forward(net, test_set.points), test_set.quadrant, sub.ridge, seed)
            penalty = evaluate(net, train_set.points, sub.train_config(seed)).penalty
            accs.append(acc)
            penalties.append(penalty)
            if log:
                log(f"{name} seed={seed} acc={acc:.4f} penalty={penalty:.4f} ({time.perf_counter() - t0:.0f}s)")
        rows[name] = {"mean": float(np.mean(accs)), "std": float(np.std(accs)), "per_seed": accs,
                      "penalty": penalties}
    oracle, rand = [], []
    for seed in seeds:
        ds, train_set, test_set = datasets(cfg, seed)
        oracle.append(oracle_probe_accuracy(cfg, ds, train_set, test_set))
        rng = np.random.default_rng(seed)
        r_train = rng.standard_normal((len(train_set), cfg.p))
        r_test = rng.standard_normal((len(test_set), cfg.p))
        rand.append(probe_accuracy(probe_fit(r_train, train_set.quadrant, cfg.ridge), r_test, test_set.quadrant))
    rows["oracle"] = {"mean": float(np.mean(oracle)), "std": float(np.std(oracle)), "per_seed": oracle}
    rows["random"] = {"mean": float(np.mean(rand)), "std": float(np.std(rand)), "per_seed": rand}
    return rows


__all__ = ["RunReport", "datasets", "train_model", "probe_scores", "oracle_probe_accuracy",
           "build_report", "run_table", "TrainHistory", "ObjectiveKind"]
