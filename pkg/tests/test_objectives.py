import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from minvar import objectives as ob
from minvar.core_math import random_orthogonal, sym_eig
from minvar.objectives import ObjectiveKind

from conftest import affine_net, central_diff, flat, perturbed_net, with_params


def rotated(net, U):
    """Network computing U @ phi(x)."""
    out = net.copy()
    out.weights[-1] = U @ net.weights[-1]
    out.biases[-1] = U @ net.biases[-1]
    return out


def constant_net(p=2):
    net = perturbed_net(2, 8, p=p)
    net.weights[-1][...] = 0
    return net


def _rel(a, b):
    return np.linalg.norm(a - b) / max(np.linalg.norm(b), 1e-300)


# kernel -------------------------------------------------------------------

def test_gaussian_kernel_values():
    assert ob.gaussian_kernel([0.3, 0.4], [0.3, 0.4], 0.7) == 1.0
    assert ob.gaussian_kernel([0, 0], [1, 0], 1.0) == pytest.approx(0.36787944, abs=1e-8)
    assert ob.gaussian_kernel([0, 0], [0, 1], 0.5) == pytest.approx(0.01831564, abs=1e-8)
    with pytest.raises(ValueError):
        ob.gaussian_kernel([0, 0], [1, 1], 0.0)


def test_kernel_matrix_matches_pointwise(rng):
    X = rng.standard_normal((6, 2))
    W = ob.kernel_matrix(X, 0.8)
    direct = ob.gaussian_kernel(X[:, None, :], X[None, :, :], 0.8)
    np.testing.assert_allclose(W, direct, atol=1e-14)
    np.testing.assert_array_equal(np.diag(W), 1.0)
    np.testing.assert_array_equal(W, W.T)


# graph energy ---------------------------------------------------------------

def test_graph_energy_examples():
    W = np.array([[1.0, np.exp(-1)], [np.exp(-1), 1.0]])
    assert ob.graph_energy(np.array([[1.0], [-1.0]]), W) == pytest.approx(2 * np.exp(-1), rel=1e-14)
    assert ob.graph_energy(np.ones((2, 3)), W) == 0.0
    with pytest.raises(ValueError):
        ob.graph_energy(np.ones((2, 1)), np.array([[1.0, 0.2], [0.3, 1.0]]))


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**31), n=st.integers(2, 12), p=st.integers(1, 4))
def test_graph_energy_trace_identity(seed, n, p):
    rng = np.random.default_rng(seed)
    Phi = rng.standard_normal((n, p))
    W = ob.kernel_matrix(rng.standard_normal((n, 2)), 1.3)
    assert ob.graph_energy(Phi, W) == pytest.approx(ob.graph_energy_direct(Phi, W), rel=1e-10, abs=1e-12)


def test_graph_energy_zero_on_components():
    W = np.zeros((6, 6))
    W[:3, :3] = 1.0
    W[3:, 3:] = 1.0
    piecewise = np.array([[1.0], [1.0], [1.0], [-2.0], [-2.0], [-2.0]])
    assert ob.graph_energy(piecewise, W) == 0.0
    assert ob.graph_energy(piecewise + np.arange(6)[:, None] * 0.1, W) > 0


def test_graph_energy_grad_finite_differences(rng):
    net = perturbed_net(2, 12, p=2, seed=4)
    X = rng.standard_normal((10, 2))
    theta = net.flat()
    idx = rng.choice(theta.size, 20, replace=False)
    fd = central_diff(lambda th: ob.graph_energy_grad(with_params(net, th), X, 0.9)[0], theta, idx)
    assert _rel(flat(ob.graph_energy_grad(net, X, 0.9)[1])[idx], fd) < 1e-5


def test_graph_energy_grad_guards_and_constant():
    net = constant_net()
    value, grads = ob.graph_energy_grad(net, np.random.default_rng(0).standard_normal((5, 2)), 0.5)
    assert value == 0.0
    np.testing.assert_allclose(grads[-2], 0, atol=1e-15)
    with pytest.raises(ValueError):
        ob.graph_energy_grad(net, np.zeros((1, 2)), 0.5)


def test_graph_energy_wide_kernel_limit(rng):
    # W -> all ones: (1/n^2) sum_ij |Phi_i - Phi_j|^2 = 2 tr(Cov)
    net = perturbed_net(2, 10, p=3, seed=1)
    X = rng.standard_normal((20, 2))
    Phi = ob.run(net, X).out
    value = ob.graph_energy_grad(net, X, 1e6)[0]
    Phi = Phi - Phi.mean(axis=0)
    assert value == pytest.approx(2 * np.trace(Phi.T @ Phi / len(X)), rel=1e-8)


# SSL ---------------------------------------------------------------------------

def test_ssl_closed_form():
    net = affine_net(np.eye(2), np.zeros(2))
    xi = np.array([[1.0, 0.0]])
    value, _ = ob.ssl_energy(net, np.array([[0.3, 0.4]]), 0.1, xi=xi)
    assert value == pytest.approx(0.01, rel=1e-12)


def test_ssl_constant_net_and_guards():
    value, _ = ob.ssl_energy(constant_net(), np.ones((4, 2)), 0.1, rng=np.random.default_rng(0))
    assert value == 0.0
    with pytest.raises(ValueError):
        ob.ssl_energy(constant_net(), np.zeros((0, 2)), 0.1, rng=np.random.default_rng(0))


def test_ssl_fresh_noise_each_call():
    net = perturbed_net(2, 10)
    rng = np.random.default_rng(0)
    X = rng.standard_normal((8, 2))
    assert ob.ssl_energy(net, X, 0.1, rng=rng)[0] != ob.ssl_energy(net, X, 0.1, rng=rng)[0]


def test_ssl_grad_finite_differences(rng):
    net = perturbed_net(3, 15, p=2, seed=5)
    X = rng.standard_normal((6, 2))
    xi = rng.standard_normal((6, 2))
    theta = net.flat()
    idx = rng.choice(theta.size, 20, replace=False)
    fd = central_diff(lambda th: ob.ssl_energy(with_params(net, th), X, 0.3, xi=xi)[0], theta, idx)
    assert _rel(flat(ob.ssl_energy(net, X, 0.3, xi=xi)[1])[idx], fd) < 1e-5


# Dirichlet -----------------------------------------------------------------------

def test_dirichlet_affine_and_constant(rng):
    W = rng.standard_normal((3, 2))
    X = rng.standard_normal((7, 2))
    assert ob.dirichlet_energy(affine_net(W, np.zeros(3)), X)[0] == pytest.approx(np.sum(W**2), rel=1e-14)
    assert ob.dirichlet_energy(constant_net(), X)[0] == 0.0


def test_dirichlet_grad_finite_differences(rng):
    net = perturbed_net(3, 20, p=2, seed=6)
    X = rng.standard_normal((5, 2))
    theta = net.flat()
    idx = rng.choice(theta.size, 20, replace=False)
    fd = central_diff(lambda th: ob.dirichlet_energy(with_params(net, th), X)[0], theta, idx)
    assert _rel(flat(ob.dirichlet_energy(net, X)[1])[idx], fd) < 1e-4


# penalty -----------------------------------------------------------------------------

def test_penalty_examples():
    n, p = 10, 3
    Q, _ = np.linalg.qr(np.random.default_rng(0).standard_normal((n, n)))
    assert ob.orthogonality_penalty(np.sqrt(n) * Q[:, :p])[0] == pytest.approx(0.0, abs=1e-24)
    assert ob.orthogonality_penalty(np.zeros((n, p)))[0] == p
    rows = np.tile([1.0, 0.0], (n, 1))
    assert ob.orthogonality_penalty(rows)[0] == pytest.approx(1.0)
    # centred: the constant feature carries no variance
    assert ob.orthogonality_penalty(rows, center=True)[0] == pytest.approx(2.0)
    with pytest.raises(ValueError):
        ob.orthogonality_penalty(np.ones((2, 3)))


@pytest.mark.parametrize("center", [False, True])
def test_penalty_gradient_finite_differences(center, rng):
    Phi = rng.standard_normal((9, 3))
    _, g = ob.orthogonality_penalty(Phi, center=center)
    fd = central_diff(lambda v: ob.orthogonality_penalty(v.reshape(9, 3), center=center)[0],
                      Phi.ravel(), range(Phi.size)).reshape(9, 3)
    assert _rel(g, fd) < 1e-7


def test_zero_penalty_means_unit_singular_values(rng):
    n, p = 30, 3
    Q, _ = np.linalg.qr(rng.standard_normal((n, p)))
    Phi = np.sqrt(n) * Q @ random_orthogonal(p, rng)
    assert ob.orthogonality_penalty(Phi)[0] < 1e-24
    np.testing.assert_allclose(sym_eig(Phi.T @ Phi / n)[0], np.ones(p), atol=1e-12)


def test_combined_step_gradient_matches_parts(rng):
    net = perturbed_net(2, 10, p=2, seed=8)
    X = rng.standard_normal((12, 2))
    value, penalty, grads = ob.objective_and_penalty(
        net, ObjectiveKind.DIRICHLET, X, 0.2, None, center=True, objective_scale=0.5, penalty_scale=2.0)
    v, g_e = ob.dirichlet_energy(net, X)
    theta = net.flat()
    fd = central_diff(
        lambda th: ob.orthogonality_penalty(ob.run(with_params(net, th), X).out, center=True)[0],
        theta, range(theta.size))
    assert value == pytest.approx(v)
    assert _rel(flat(grads), 0.5 * flat(g_e) + 2.0 * fd) < 1e-6


# smoothed energy ------------------------------------------------------------------------

def test_smoothed_energy_examples(rng):
    X = rng.standard_normal((8, 2))
    assert ob.smoothed_energy(np.tile([1.5, -2.0], (8, 1)), X, 0.5) == pytest.approx(0.0, abs=1e-28)
    # n = 2, W_12 = w, Phi = (1, -1): both residuals are +-w, so the value is w^2
    X2 = np.array([[0.0, 0.0], [1.0, 0.0]])
    w = np.exp(-1.0)
    assert ob.smoothed_energy(np.array([1.0, -1.0]), X2, 1.0) == pytest.approx(w**2, rel=1e-14)
    # sigma -> 0: W -> I and every residual vanishes
    assert ob.smoothed_energy(rng.standard_normal((8, 2)), X, 1e-6) == pytest.approx(0.0, abs=1e-28)


# orthogonal invariance ------------------------------------------------------------------

def test_energies_invariant_under_rotation():
    rng = np.random.default_rng(2)
    net = perturbed_net(3, 20, p=3, seed=2)
    X = rng.standard_normal((40, 2))
    xi = rng.standard_normal((40, 2))
    W = ob.kernel_matrix(X, 0.5)
    Phi = ob.run(net, X).out
    for _ in range(10):
        U = random_orthogonal(3, rng)
        other = rotated(net, U)
        assert abs(ob.ssl_energy(other, X, 0.1, xi=xi)[0] - ob.ssl_energy(net, X, 0.1, xi=xi)[0]) < 1e-9
        assert abs(ob.graph_energy(Phi @ U.T, W) - ob.graph_energy(Phi, W)) < 1e-9
        assert abs(ob.dirichlet_energy(other, X)[0] - ob.dirichlet_energy(net, X)[0]) < 1e-9


def test_energy_value_total():
    e = ob.EnergyValue(2.0, 0.5, 4.0)
    assert e.total == 4.0


def test_objective_kind_parse():
    assert ObjectiveKind.parse("GraphLaplacian") is ObjectiveKind.GRAPH
    assert ObjectiveKind.parse("ssl") is ObjectiveKind.SSL
    with pytest.raises(ValueError):
        ObjectiveKind.parse("barlow")
