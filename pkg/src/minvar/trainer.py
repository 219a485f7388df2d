"""Large-batch SGD on ``E(phi) + lam * Omega(phi)``."""

from __future__ import annotations

import time
from dataclasses import dataclass, field, asdict

import numpy as np

from .core_math import make_rng
from .data import Dataset
from .network import Network, forward
from .objectives import EnergyValue, ObjectiveKind, embedding_energy, objective_and_penalty, orthogonality_penalty
from .oracle_eval import TrainingError

AUTO = "auto"
LAMBDA_EPS = 1e-8
LAMBDA_CAP = 1e6

# balance points found by running each objective on the default half-moons
DEFAULT_LAMBDA = {
    ObjectiveKind.SSL: 0.3,
    ObjectiveKind.GRAPH: 0.002,
    ObjectiveKind.DIRICHLET: 30.0,
}


@dataclass
class TrainConfig:
    objective: ObjectiveKind | None = ObjectiveKind.DIRICHLET  # None: penalty only
    lam: float | str | None = None  # None -> per-objective default, "auto" -> auto_lambda
    sigma: float = 0.1
    learning_rate: float = 0.05
    epochs: int = 1500
    batch_size: int = 512
    seed: int = 0
    lr_decay_points: tuple = (0.6, 0.8)
    lr_decay_factor: float = 0.3
    clip_norm: float = 1.0  # 0 disables clipping
    center: bool = True

    def __post_init__(self):
        if self.objective is not None:
            self.objective = ObjectiveKind.parse(self.objective)
        if isinstance(self.lam, str) and self.lam.lower() != AUTO:
            self.lam = float(self.lam)
        if isinstance(self.lam, (int, float)) and self.lam < 0:
            raise ValueError("lam must be >= 0")
        if not self.sigma > 0:
            raise ValueError("sigma must be > 0")
        if self.learning_rate < 0 or self.epochs < 1:
            raise ValueError("learning_rate must be >= 0 and epochs >= 1")
        if self.batch_size < 64:
            raise ValueError(f"batch_size must be >= 64 (large-batch floor), got {self.batch_size}")
        if not 0 < self.lr_decay_factor < 1:
            raise ValueError("lr_decay_factor must be in (0, 1)")

    def lr_at(self, epoch: int) -> float:
        drops = sum(epoch >= f * self.epochs for f in self.lr_decay_points)
        return self.learning_rate * self.lr_decay_factor**drops


@dataclass
class EpochRecord:
    epoch: int
    energy: EnergyValue
    lr: float
    seconds: float


@dataclass
class TrainHistory:
    records: list[EpochRecord] = field(default_factory=list)
    lam: float = 0.0

    def __len__(self):
        return len(self.records)

    def column(self, name: str) -> np.ndarray:
        if name == "total":
            return np.array([r.energy.total for r in self.records])
        if name in ("objective", "penalty"):
            return np.array([getattr(r.energy, name) for r in self.records])
        return np.array([getattr(r, name) for r in self.records])

    def to_csv(self, path, include_time: bool = True) -> None:
        """``epoch,objective,penalty,total,lr,seconds``; ``include_time=False`` zeroes the clock column."""
        with open(path, "w", newline="\n") as f:
            f.write("epoch,objective,penalty,total,lr,seconds\n")
            for r in self.records:
                e = r.energy
                secs = r.seconds if include_time else 0.0
                f.write(f"{r.epoch},{e.objective:.17g},{e.penalty:.17g},{e.total:.17g},{r.lr:.17g},{secs:.6f}\n")


def resolve_lambda(net: Network, data: Dataset, config: TrainConfig) -> float:
    if config.objective is None:
        return 1.0
    if config.lam is None:
        return DEFAULT_LAMBDA[config.objective]
    if isinstance(config.lam, str):
        return auto_lambda(net, data, config)
    return float(config.lam)


def auto_lambda(net: Network, data: Dataset, config: TrainConfig) -> float:
    """``E / max(Omega, eps)`` at the current parameters, on the full dataset."""
    points = data.points if isinstance(data, Dataset) else np.asarray(data)
    # a dedicated stream so the choice of lambda does not shift the training stream
    rng = make_rng(config.seed ^ 0x5A5A5A5A)
    energy = embedding_energy(config.objective, net, points, config.sigma, rng)
    omega = orthogonality_penalty(forward(net, points), center=config.center)[0]
    return float(min(energy / max(omega, LAMBDA_EPS), LAMBDA_CAP))


def train(net: Network, data: Dataset, config: TrainConfig, log=None):
    """Train ``net`` in place and return ``(net, history)``.

    Each step applies ``lr * (grad E / lam + grad Omega)``: the learning rate
    is tuned for the penalty alone and divided by ``lam`` for the full loss.
    With ``lam == 0`` the step is ``lr * grad E``.
    """
    points = data.points if isinstance(data, Dataset) else np.asarray(data, dtype=np.float64)
    n = len(points)
    if n == 0:
        raise ValueError("empty dataset")
    batch_size = min(config.batch_size, n)
    lam = resolve_lambda(net, data, config)
    if lam > 0:
        obj_scale, pen_scale = 1.0 / lam, 1.0
    else:
        obj_scale, pen_scale = 1.0, 0.0
    rng = make_rng(config.seed)
    history = TrainHistory(lam=lam)
    params = net.params
    for epoch in range(config.epochs):
        t0 = time.perf_counter()
        lr = config.lr_at(epoch)
        perm = rng.permutation(n)
        obj_sum = pen_sum = 0.0
        n_batches = 0
        for start in range(0, n, batch_size):
            idx = perm[start:start + batch_size]
            if len(idx) < max(batch_size // 2, 2):
                # a short tail batch gives a poor covariance estimate
                continue
            value, penalty, grads = objective_and_penalty(
                net, config.objective, points[idx], config.sigma, rng,
                center=config.center, objective_scale=obj_scale, penalty_scale=pen_scale,
            )
            if config.clip_norm > 0:
                norm = np.sqrt(sum(float(np.sum(g * g)) for g in grads))
                if norm > config.clip_norm:
                    grads = [g * (config.clip_norm / norm) for g in grads]
            if lr > 0:
                for p, g in zip(params, grads):
                    p -= lr * g
            obj_sum += value
            pen_sum += penalty
            n_batches += 1
        energy = EnergyValue(obj_sum / n_batches, pen_sum / n_batches, lam)
        if not (np.isfinite(energy.total) and all(np.all(np.isfinite(p)) for p in params)):
            raise TrainingError("training diverged", epoch)
        history.records.append(EpochRecord(epoch, energy, lr, time.perf_counter() - t0))
        if log is not None:
            log(epoch, energy)
    return net, history


def evaluate(net: Network, points, config: TrainConfig, lam: float | None = None, seed: int = 0) -> EnergyValue:
    """Objective and penalty on a whole point set, outside the training loop."""
    points = np.asarray(points, dtype=np.float64)
    if config.objective is None:
        objective = 0.0
    else:
        objective = embedding_energy(config.objective, net, points, config.sigma, make_rng(seed))
    penalty = orthogonality_penalty(forward(net, points), center=config.center)[0]
    return EnergyValue(objective, penalty, 1.0 if lam is None else lam)


def config_dict(config: TrainConfig) -> dict:
    d = asdict(config)
    d["objective"] = None if config.objective is None else config.objective.value
    return d
