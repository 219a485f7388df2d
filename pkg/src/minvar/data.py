"""Two interlocking half-moons with a four-class downstream label."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core_math import make_rng


@dataclass(frozen=True)
class MoonParams:
    n: int = 1000
    noise_std: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if self.n < 4 or self.n % 2:
            raise ValueError(f"n must be even and >= 4, got {self.n}")
        if not np.isfinite(self.noise_std) or self.noise_std < 0:
            raise ValueError(f"noise_std must be finite and >= 0, got {self.noise_std}")


@dataclass
class Dataset:
    points: np.ndarray  # (n, 2)
    moon: np.ndarray  # (n,) in {0, 1}
    quadrant: np.ndarray  # (n,) in {0, 1, 2, 3}
    t_param: np.ndarray  # (n,) in [0, pi]

    def __len__(self):
        return len(self.points)

    def subset(self, idx) -> Dataset:
        return Dataset(self.points[idx], self.moon[idx], self.quadrant[idx], self.t_param[idx])


def arc(moon, t):
    """Noise-free position on each moon's arc."""
    moon = np.asarray(moon)
    t = np.asarray(t, dtype=np.float64)
    x = np.where(moon == 0, np.cos(t), 1.0 - np.cos(t))
    y = np.where(moon == 0, np.sin(t), 0.5 - np.sin(t))
    return np.stack([x, y], axis=-1)


def quadrant_label(moon, t):
    return 2 * np.asarray(moon) + (np.asarray(t) >= np.pi / 2)


def make_moons(params: MoonParams = MoonParams()) -> Dataset:
    rng = make_rng(params.seed)
    half = params.n // 2
    moon = np.repeat([0, 1], half)
    t = rng.uniform(0.0, np.pi, size=params.n)
    points = arc(moon, t) + params.noise_std * rng.standard_normal((params.n, 2))
    return Dataset(points, moon, quadrant_label(moon, t).astype(np.int64), t)


def make_grid(x_range, y_range, resolution: int) -> np.ndarray:
    """Row-major lattice: x varies slowest, y fastest."""
    (x0, x1), (y0, y1) = x_range, y_range
    if resolution < 2:
        raise ValueError("resolution must be >= 2")
    if not (x1 > x0 and y1 > y0):
        raise ValueError(f"degenerate range {x_range} x {y_range}")
    xs = np.linspace(x0, x1, resolution)
    ys = np.linspace(y0, y1, resolution)
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    return np.column_stack([gx.ravel(), gy.ravel()])


def split(dataset: Dataset, train_fraction: float = 0.5, seed: int = 0):
    """Stratified shuffle split on the quadrant label."""
    if not 0.0 < train_fraction < 1.0:
        raise ValueError(f"train_fraction must be in (0, 1), got {train_fraction}")
    rng = make_rng(seed)
    train, test = [], []
    for c in np.unique(dataset.quadrant):
        idx = np.flatnonzero(dataset.quadrant == c)
        idx = idx[rng.permutation(len(idx))]
        k = int(round(train_fraction * len(idx)))
        train.append(idx[:k])
        test.append(idx[k:])
    train = np.sort(np.concatenate(train))
    test = np.sort(np.concatenate(test))
    if len(train) == 0 or len(test) == 0:
        raise ValueError("split produced an empty side")
    return dataset.subset(train), dataset.subset(test)


def save_csv(dataset: Dataset, path) -> None:
    with open(path, "w", newline="\n") as f:
        f.write("x,y,moon,quadrant,t\n")
        for (x, y), m, q, t in zip(dataset.points, dataset.moon, dataset.quadrant, dataset.t_param):
            f.write(f"{x:.17g},{y:.17g},{m},{q},{t:.17g}\n")


def load_csv(path) -> Dataset:
    raw = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return Dataset(raw[:, :2].copy(), raw[:, 2].astype(np.int64), raw[:, 3].astype(np.int64), raw[:, 4].copy())
