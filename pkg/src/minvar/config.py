"""Flat ``key = value`` run configuration with ``#`` comments."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, fields

from .data import MoonParams
from .network import NetworkConfig
from .objectives import ObjectiveKind
from .trainer import AUTO, TrainConfig


@dataclass
class RunConfig:
    # data
    n: int = 1000
    noise_std: float = 0.1
    train_fraction: float = 0.5
    # network
    p: int = 2
    hidden_layers: int = 5
    hidden_width: int = 100
    # training
    objective: str = "dirichlet"
    lam: str = "default"  # a number, "auto", or "default" (per-objective value)
    sigma: float = 0.0  # 0 -> noise_std
    learning_rate: float = 0.05
    epochs: int = 1500
    batch_size: int = 512
    lr_decay_points: str = "0.6,0.8"
    lr_decay_factor: float = 0.3
    clip_norm: float = 1.0
    center: bool = True
    record_time: bool = False
    # evaluation
    ridge: float = 1e-6
    drop_constant: bool = True
    grid_resolution: int = 100
    grid_x: str = "-1.5,2.5"
    grid_y: str = "-1.25,1.75"
    margin: float = 0.0  # 0 -> 3 * noise_std
    seeds: int = 5  # repetitions for the experiment command
    # bookkeeping
    seed: int = 0
    out: str = "runs/default"

    def __post_init__(self):
        self.validate()

    def validate(self):
        MoonParams(self.n, self.noise_std, self.seed)
        if not 0 < self.train_fraction < 1:
            raise ValueError("train_fraction must be in (0, 1)")
        ObjectiveKind.parse(self.objective)
        self.lam_value()
        self.train_config()

    # derived pieces -----------------------------------------------------
    @property
    def kernel_sigma(self) -> float:
        return self.sigma if self.sigma > 0 else self.noise_std

    @property
    def off_margin(self) -> float:
        return self.margin if self.margin > 0 else 3.0 * self.noise_std

    def lam_value(self):
        s = str(self.lam).strip().lower()
        if s == "default":
            return None
        if s == AUTO:
            return AUTO
        value = float(s)
        if value < 0:
            raise ValueError("lam must be >= 0")
        return value

    def moon_params(self, seed=None) -> MoonParams:
        return MoonParams(self.n, self.noise_std, self.seed if seed is None else seed)

    def network_config(self, seed=None) -> NetworkConfig:
        return NetworkConfig(2, self.p, self.hidden_layers, self.hidden_width, "tanh",
                             self.seed if seed is None else seed)

    def train_config(self, seed=None) -> TrainConfig:
        return TrainConfig(
            objective=ObjectiveKind.parse(self.objective),
            lam=self.lam_value(),
            sigma=self.kernel_sigma,
            learning_rate=self.learning_rate,
            epochs=self.epochs,
            batch_size=self.batch_size,
            seed=self.seed if seed is None else seed,
            lr_decay_points=_floats(self.lr_decay_points),
            lr_decay_factor=self.lr_decay_factor,
            clip_norm=self.clip_norm,
            center=self.center,
        )

    def grid_ranges(self):
        return _floats(self.grid_x), _floats(self.grid_y)

    # text format ----------------------------------------------------------
    def to_text(self) -> str:
        lines = ["# resolved run configuration"]
        for f in fields(self):
            value = getattr(self, f.name)
            if isinstance(value, bool):
                value = "true" if value else "false"
            elif isinstance(value, float):
                value = repr(value)
            lines.append(f"{f.name} = {value}")
        return "\n".join(lines) + "\n"

    def updated(self, overrides: dict) -> RunConfig:
        return dataclasses.replace(self, **coerce(overrides))

    @classmethod
    def from_text(cls, text: str, overrides: dict | None = None) -> RunConfig:
        values = parse_text(text)
        if overrides:
            values.update(overrides)
        return cls(**coerce(values))


def _floats(s):
    if isinstance(s, (tuple, list)):
        return tuple(float(v) for v in s)
    return tuple(float(v) for v in str(s).split(",") if v.strip())


def parse_text(text: str) -> dict:
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        values[key] = value
    return values


_TYPES = {f.name: f.type for f in fields(RunConfig)}


def coerce(values: dict) -> dict:
    out = {}
    for key, value in values.items():
        if key not in _TYPES:
            raise ValueError(f"unknown config key {key!r}")
        kind = _TYPES[key]
        if isinstance(value, str):
            if kind == "bool":
                low = value.lower()
                if low not in ("true", "false", "1", "0", "yes", "no"):
                    raise ValueError(f"{key}: expected a boolean, got {value!r}")
                value = low in ("true", "1", "yes")
            elif kind == "int":
                value = int(value)
            elif kind == "float":
                value = float(value)
        out[key] = value
    return out
