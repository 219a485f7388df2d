"""Fully-connected tanh network with hand-written derivatives.

Everything is batched over points: ``x`` has shape ``(m, input_dim)``.
Besides the usual value / parameter-gradient pair, the network propagates
input tangents alongside the forward pass so that the input Jacobian is
available exactly, and the reverse pass can run through those tangents.
That second route is what the Dirichlet energy needs (double backprop).
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "NetworkConfig",
    "Network",
    "Cache",
    "init",
    "forward",
    "grad_params",
    "input_jacobian",
    "dirichlet_point_value_and_grad",
    "save",
    "load",
]

_MAGIC = b"MVNET001"


@dataclass(frozen=True)
class NetworkConfig:
    input_dim: int = 2
    output_dim: int = 2
    hidden_layers: int = 5
    hidden_width: int = 100
    activation: str = "tanh"
    init_seed: int = 0

    def __post_init__(self):
        if self.input_dim < 1 or self.output_dim < 1 or self.hidden_width < 1:
            raise ValueError("network dimensions must be >= 1")
        # 0 hidden layers is allowed: the network is then a single affine map
        if self.hidden_layers < 0:
            raise ValueError("hidden_layers must be >= 0")
        if self.activation != "tanh":
            raise ValueError(f"unsupported activation {self.activation!r}")

    def layer_sizes(self) -> list[int]:
        return [self.input_dim] + [self.hidden_width] * self.hidden_layers + [self.output_dim]


@dataclass
class Network:
    """Weights are stored as ``(fan_out, fan_in)``; the last layer is linear."""

    weights: list[np.ndarray]
    biases: list[np.ndarray]
    config: NetworkConfig = field(default_factory=NetworkConfig)

    def __post_init__(self):
        if len(self.weights) != len(self.biases):
            raise ValueError("weights and biases must have the same length")
        for k, (W, b) in enumerate(zip(self.weights, self.biases)):
            if W.ndim != 2 or b.shape != (W.shape[0],):
                raise ValueError(f"layer {k}: bias shape {b.shape} does not match weight {W.shape}")
            if k > 0 and W.shape[1] != self.weights[k - 1].shape[0]:
                raise ValueError(f"layer {k}: fan_in {W.shape[1]} != previous fan_out")

    @classmethod
    def from_layers(cls, layers, activation="tanh"):
        """Build from explicit ``[(W, b), ...]``; the config is inferred."""
        weights = [np.array(W, dtype=np.float64) for W, _ in layers]
        biases = [np.array(b, dtype=np.float64) for _, b in layers]
        widths = {W.shape[0] for W in weights[:-1]}
        config = NetworkConfig(
            input_dim=weights[0].shape[1],
            output_dim=weights[-1].shape[0],
            hidden_layers=len(weights) - 1,
            hidden_width=widths.pop() if len(widths) == 1 else max(widths, default=1),
            activation=activation,
        )
        return cls(weights, biases, config)

    @property
    def params(self) -> list[np.ndarray]:
        """Parameters in layer order: W0, b0, W1, b1, ..."""
        out = []
        for W, b in zip(self.weights, self.biases):
            out += [W, b]
        return out

    @property
    def n_params(self) -> int:
        return sum(p.size for p in self.params)

    def copy(self) -> Network:
        return Network([W.copy() for W in self.weights], [b.copy() for b in self.biases], self.config)

    def flat(self) -> np.ndarray:
        return np.concatenate([p.ravel() for p in self.params])

    def set_flat(self, theta: np.ndarray) -> None:
        offset = 0
        for p in self.params:
            p[...] = theta[offset:offset + p.size].reshape(p.shape)
            offset += p.size

    def __call__(self, x):
        return forward(self, x)


def init(config: NetworkConfig) -> Network:
    """Glorot-uniform weights, zero biases."""
    rng = np.random.default_rng(config.init_seed)
    sizes = config.layer_sizes()
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-bound, bound, size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    return Network(weights, biases, config)


@dataclass
class Cache:
    """Intermediate values from a forward pass, kept for the reverse pass."""

    hs: list[np.ndarray]  # layer inputs: hs[0] = x, hs[k] = tanh(a_k)
    ts: list[np.ndarray] | None  # input tangents matching hs, shape (m, d, width)
    out: np.ndarray
    jac: np.ndarray | None  # (m, p, d)


def _as_points(net: Network, x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != net.weights[0].shape[1]:
        raise ValueError(f"expected points of dimension {net.weights[0].shape[1]}, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValueError("non-finite input point")
    return x


def run(net: Network, x, tangents: bool = False) -> Cache:
    x = _as_points(net, x)
    m, d = x.shape
    hs = [x]
    ts = [np.broadcast_to(np.eye(d), (m, d, d))] if tangents else None
    h = x
    last = len(net.weights) - 1
    for k, (W, b) in enumerate(zip(net.weights, net.biases)):
        a = h @ W.T + b
        if k < last:
            h = np.tanh(a)
            hs.append(h)
            if tangents:
                s = 1.0 - h * h
                ts.append((ts[-1] @ W.T) * s[:, None, :])
        else:
            out = a
    jac = None
    if tangents:
        # (m, d, p) -> (m, p, d)
        jac = np.swapaxes(ts[-1] @ net.weights[-1].T, 1, 2)
    return Cache(hs, ts, out, jac)


def backward(net: Network, cache: Cache, g_out=None, g_jac=None) -> list[np.ndarray]:
    """Reverse pass for a scalar whose partials are ``g_out`` (m, p) and ``g_jac`` (m, p, d).

    Returns gradients in the same order as ``net.params``.
    """
    hs, ts = cache.hs, cache.ts
    if g_jac is not None and ts is None:
        raise ValueError("cache was built without tangents")
    last = len(net.weights) - 1
    grads: list[np.ndarray] = [None] * (2 * len(net.weights))
    gh = g_out
    gt = None if g_jac is None else np.swapaxes(g_jac, 1, 2)  # (m, d, p)
    for k in range(last, -1, -1):
        W = net.weights[k]
        h_in = hs[k]
        if k < last:
            h = hs[k + 1]
            s = 1.0 - h * h
            ga = None
            if gt is not None:
                u = ts[k] @ W.T
                gs = np.einsum("mdw,mdw->mw", gt, u)
                gt = gt * s[:, None, :]  # now the gradient w.r.t. u
                gh = -2.0 * h * gs if gh is None else gh - 2.0 * h * gs
            if gh is not None:
                ga = gh * s
        else:
            ga = gh
        gW = np.zeros_like(W)
        gb = np.zeros(W.shape[0])
        if ga is not None:
            gW += ga.T @ h_in
            gb += ga.sum(axis=0)
        if gt is not None:
            t_in = ts[k]
            gW += gt.reshape(-1, W.shape[0]).T @ t_in.reshape(-1, W.shape[1])
        grads[2 * k] = gW
        grads[2 * k + 1] = gb
        if k > 0:
            gh = None if ga is None else ga @ W
            gt = None if gt is None else gt @ W
    return grads


def forward(net: Network, x) -> np.ndarray:
    """Features of each point, shape ``(m, p)`` (or ``(p,)`` for a single point)."""
    single = np.ndim(x) == 1
    out = run(net, x).out
    return out[0] if single else out


def grad_params(net: Network, x, upstream) -> list[np.ndarray]:
    """Gradient of ``sum_i <upstream_i, phi(x_i)>`` with respect to every parameter."""
    cache = run(net, x)
    upstream = np.asarray(upstream, dtype=np.float64).reshape(cache.out.shape) \
        if np.size(upstream) == cache.out.size else None
    if upstream is None:
        raise ValueError(f"upstream must have shape {cache.out.shape}")
    return backward(net, cache, g_out=upstream)


def input_jacobian(net: Network, x) -> np.ndarray:
    """Exact Jacobian ``D phi(x)``: shape ``(p, d)`` for one point, ``(m, p, d)`` for a batch."""
    single = np.ndim(x) == 1
    jac = run(net, x, tangents=True).jac
    return jac[0] if single else jac


def dirichlet_point_value_and_grad(net: Network, x):
    """``||D phi(x)||_F^2`` at a single point and its parameter gradient."""
    cache = run(net, np.atleast_2d(x), tangents=True)
    value = float(np.sum(cache.jac ** 2))
    return value, backward(net, cache, g_jac=2.0 * cache.jac)


def save(net: Network, path) -> None:
    """Binary checkpoint: magic, layer count, shapes, then little-endian float64 parameters."""
    c = net.config
    with open(path, "wb") as f:
        f.write(_MAGIC)
        f.write(struct.pack("<q", c.init_seed))
        f.write(struct.pack("<I", len(net.weights)))
        for W in net.weights:
            f.write(struct.pack("<II", *W.shape))
        for p in net.params:
            f.write(np.ascontiguousarray(p, dtype="<f8").tobytes())


def load(path) -> Network:
    with open(path, "rb") as f:
        if f.read(len(_MAGIC)) != _MAGIC:
            raise ValueError(f"{path}: not a network checkpoint")
        (seed,) = struct.unpack("<q", f.read(8))
        (n_layers,) = struct.unpack("<I", f.read(4))
        shapes = [struct.unpack("<II", f.read(8)) for _ in range(n_layers)]
        layers = []
        for rows, cols in shapes:
            W = np.frombuffer(f.read(8 * rows * cols), dtype="<f8").reshape(rows, cols).astype(np.float64)
            b = np.frombuffer(f.read(8 * rows), dtype="<f8").astype(np.float64)
            layers.append((W, b))
    net = Network.from_layers(layers)
    net.config = NetworkConfig(
        input_dim=net.config.input_dim,
        output_dim=net.config.output_dim,
        hidden_layers=net.config.hidden_layers,
        hidden_width=net.config.hidden_width,
        init_seed=seed,
    )
    return net
