import numpy as np
import pytest

from minvar.data import (
    MoonParams,
    arc,
    load_csv,
    make_grid,
    make_moons,
    quadrant_label,
    save_csv,
    split,
)


def test_arc_definition():
    np.testing.assert_allclose(arc(0, 0.0), [1.0, 0.0])
    np.testing.assert_allclose(arc(1, np.pi / 2), [1.0, -0.5], atol=1e-15)


def test_noise_free_points_on_arcs():
    ds = make_moons(MoonParams(200, 0.0, 3))
    np.testing.assert_allclose(ds.points, arc(ds.moon, ds.t_param), atol=1e-15)
    assert np.all((ds.t_param >= 0) & (ds.t_param <= np.pi))


def test_moon_balance_and_quadrants():
    ds = make_moons(MoonParams(1000, 0.1, 0))
    assert np.sum(ds.moon == 0) == np.sum(ds.moon == 1) == 500
    np.testing.assert_array_equal(ds.quadrant, 2 * ds.moon + (ds.t_param >= np.pi / 2))


@pytest.mark.parametrize("seed", [0, 1, 2, 3])
def test_quadrant_counts(seed):
    # each quadrant is a Binomial(500, 1/2) draw; [200, 300] is > 4 sigma wide
    counts = np.bincount(make_moons(MoonParams(1000, 0.1, seed)).quadrant, minlength=4)
    assert np.all((counts >= 200) & (counts <= 300))


def test_labels_ignore_noise():
    a = make_moons(MoonParams(100, 0.0, 5))
    b = make_moons(MoonParams(100, 0.3, 5))
    np.testing.assert_array_equal(a.t_param, b.t_param)
    np.testing.assert_array_equal(a.quadrant, b.quadrant)
    np.testing.assert_array_equal(quadrant_label(b.moon, b.t_param), b.quadrant)


def test_arcs_are_separated():
    t = np.linspace(0, np.pi, 2001)
    a, b = arc(0, t), arc(1, t)
    d = np.sqrt(((a[:, None, :] - b[None, :, :]) ** 2).sum(-1))
    assert d.min() > 0.1


def test_determinism():
    a = make_moons(MoonParams(100, 0.1, 42))
    b = make_moons(MoonParams(100, 0.1, 42))
    np.testing.assert_array_equal(a.points, b.points)


@pytest.mark.parametrize("n", [7, 2, 0])
def test_bad_n(n):
    with pytest.raises(ValueError):
        MoonParams(n, 0.1, 0)


def test_grid_corners_and_counts():
    g = make_grid((0, 1), (0, 1), 2)
    np.testing.assert_array_equal(g, [[0, 0], [0, 1], [1, 0], [1, 1]])
    g = make_grid((-1, 1), (0, 0.5), 3)
    assert len(g) == 9
    assert set(g[:, 0]) == {-1.0, 0.0, 1.0}
    assert make_grid((0, 1), (0, 1), 100).shape == (10000, 2)
    with pytest.raises(ValueError):
        make_grid((1, 1), (0, 1), 5)
    with pytest.raises(ValueError):
        make_grid((0, 1), (0, 1), 1)


def test_split_contract():
    ds = make_moons(MoonParams(1000, 0.1, 0))
    a, b = split(ds, 0.5, seed=1)
    assert len(a) == len(b) == 500
    both = np.concatenate([a.points, b.points])
    assert len(np.unique(both, axis=0)) == 1000
    ca, cb = np.bincount(a.quadrant, minlength=4), np.bincount(b.quadrant, minlength=4)
    assert np.all(np.abs(ca - cb) <= 1)
    a2, _ = split(ds, 0.5, seed=1)
    np.testing.assert_array_equal(a.points, a2.points)
    for bad in (0.0, 1.0, -0.1):
        with pytest.raises(ValueError):
            split(ds, bad)


def test_csv_round_trip(tmp_path):
    ds = make_moons(MoonParams(50, 0.1, 0))
    path = tmp_path / "d.csv"
    save_csv(ds, path)
    assert path.read_text().splitlines()[0] == "x,y,moon,quadrant,t"
    back = load_csv(path)
    np.testing.assert_array_equal(back.points, ds.points)
    np.testing.assert_array_equal(back.t_param, ds.t_param)
    np.testing.assert_array_equal(back.quadrant, ds.quadrant)
