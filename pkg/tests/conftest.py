import numpy as np
import pytest

from minvar import network as nw


def central_diff(f, theta, idx, h=1e-5):
    """Central differences of scalar ``f`` at ``theta`` along coordinates ``idx``."""
    out = np.empty(len(idx))
    for k, i in enumerate(idx):
        e = np.zeros_like(theta)
        e[i] = h
        out[k] = (f(theta + e) - f(theta - e)) / (2 * h)
    return out


def flat(grads):
    return np.concatenate([g.ravel() for g in grads])


def with_params(net, theta):
    other = net.copy()
    other.set_flat(theta)
    return other


def perturbed_net(depth, width, p=2, seed=0, scale=0.3):
    """Random net with nonzero biases so no derivative is trivially zero."""
    net = nw.init(nw.NetworkConfig(2, p, depth, width, init_seed=seed))
    rng = np.random.default_rng(seed + 1000)
    for b in net.biases:
        b += scale * rng.standard_normal(b.shape)
    return net


def affine_net(W, b):
    return nw.Network.from_layers([(np.asarray(W, float), np.asarray(b, float))])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE = []


@pytest.fixture
def criterion():
    """Record one pass/fail line per acceptance criterion, then assert."""
    def record(number, name, ok, detail):
        line = f"criterion {number} [{'PASS' if ok else 'FAIL'}] {name}: {detail}"
        ACCEPTANCE.append(line)
        print(line)
        assert ok, line
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
