import json
import math
import os

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import minimize_scalar

from planarsq import cache
from planarsq.curves import (
    BoundCurve,
    ZetaTable,
    _group_blocks,
    curve_eval,
    curve_lower,
    hull_by_legendre,
    linear_lower_bound,
    lower_hull,
    producibility_hull,
    sm_curve,
    symmetric_curve,
    zeta,
    zeta_point,
    zeta_table,
)
from planarsq.errors import CurveRangeError, MissingTableEntryError, SchemaError
from planarsq.ground import DEFAULT_CONFIG
from planarsq.spin import SpinLabel

from _states import hull_violation, near_optimal_pairs, near_optimal_product, random_product, random_two_producible


def g1_closed(X):
    X = np.asarray(X, dtype=float)
    return 1.5 - X**2 - 0.5 * np.sqrt(1 - X**2)


@pytest.fixture(scope="module")
def hull_k1_j1():
    return producibility_hull(1, 1)


@pytest.fixture(scope="module")
def hull_k2_j1():
    return producibility_hull(2, 1)


# ------------------------------------------------------------ lower hull

pts = st.lists(st.tuples(st.floats(0, 1), st.floats(-5, 5)), min_size=2, max_size=40)


@settings(max_examples=150, deadline=None)
@given(pts)
def test_lower_hull_properties(points):
    x = np.array([p[0] for p in points])
    y = np.array([p[1] for p in points])
    h = lower_hull(x, y)
    hx, hy = x[h], y[h]
    assert np.all(np.diff(hx) > 0)
    slopes = np.diff(hy) / np.diff(hx) if len(h) > 1 else np.array([])
    assert np.all(np.diff(slopes) >= -1e-9 * (1 + np.abs(slopes[1:]))) if len(slopes) > 1 else True
    # every input point lies on or above the hull
    if len(h) > 1:
        interp = np.interp(x, hx, hy)
        assert np.all(y >= interp - 1e-9 * (1 + np.abs(y)))
    assert hx[0] == x.min() and hx[-1] == x.max()


def test_lower_hull_square():
    x = np.array([0, 1, 0, 1, 0.5])
    y = np.array([0, 0, 1, 1, -1])
    h = lower_hull(x, y)
    assert sorted(zip(x[h], y[h])) == [(0, 0), (0.5, -1), (1, 0)]


# ------------------------------------------------------------ BoundCurve

def test_curve_validation():
    with pytest.raises(ValueError):
        BoundCurve("x", (), np.array([0.0, 0.0]), np.array([1.0, 1.0]))
    with pytest.raises(ValueError):
        BoundCurve("x", (), np.array([0.0, 1.5]), np.array([1.0, 1.0]))
    with pytest.raises(ValueError):
        BoundCurve("x", (), np.array([0.0, 1.0]), np.array([-1.0, 1.0]))


def test_eval_and_range():
    c = BoundCurve("x", (SpinLabel(2),), np.array([0.0, 0.5, 1.0]), np.array([0.0, 0.1, 0.5]),
                   np.array([0.0, 0.2, 0.8]))
    assert curve_eval(c, 0.5) == pytest.approx(0.1)
    assert curve_eval(c, 0.25) == pytest.approx(0.05)
    with pytest.raises(CurveRangeError):
        curve_eval(c, 1.2)
    with pytest.raises(CurveRangeError):
        curve_eval(c, math.nan)
    assert curve_lower(c, 0.25) <= curve_eval(c, 0.25)
    # supporting lines at 0 (slope 0) and 0.5 (slope 0.2): max(0, 0.1 - 0.05)
    assert curve_lower(c, 0.25) == pytest.approx(0.05)
    assert curve_lower(c, 0.75) == pytest.approx(max(0.1 + 0.2 * 0.25, 0.5 - 0.8 * 0.25))


def test_curve_json_round_trip(hull_k2_j1):
    back = BoundCurve.from_dict(json.loads(hull_k2_j1.to_json()))
    np.testing.assert_array_equal(back.X, hull_k2_j1.X)
    np.testing.assert_array_equal(back.values, hull_k2_j1.values)
    np.testing.assert_array_equal(np.isnan(back.slopes), np.isnan(hull_k2_j1.slopes))
    assert back.identity == hull_k2_j1.identity
    with pytest.raises(SchemaError):
        BoundCurve.from_dict({"schema": "other"})


def test_curve_csv(hull_k2_j1):
    lines = hull_k2_j1.to_csv().splitlines()
    assert lines[0] == "X,value"
    assert len(lines) == len(hull_k2_j1.X) + 1
    x, v = map(float, lines[3].split(","))
    assert x == hull_k2_j1.X[2] and v == hull_k2_j1.values[2]


# -------------------------------------------------------- symmetric curve

def test_symmetric_curve_spin_one_exact():
    X = np.linspace(0, 0.999, 25)
    c = symmetric_curve(1, X=X)
    np.testing.assert_allclose(c.values, g1_closed(X), atol=1e-9)


def test_symmetric_curve_spin_one_sweep():
    c = symmetric_curve(1)
    np.testing.assert_allclose(c.values, g1_closed(c.X), atol=1e-9)
    Xq = np.linspace(0, 1, 101)
    np.testing.assert_allclose(curve_eval(c, Xq), g1_closed(Xq), atol=2e-6)


def test_symmetric_curve_spin_half():
    c = symmetric_curve("1/2")
    np.testing.assert_allclose(c.values, 1 - c.X**2 / 2)


def test_symmetric_curve_endpoint():
    for J in (2, 3):
        c = symmetric_curve(J)
        assert c.X[-1] == 1.0 and c.values[-1] == pytest.approx(0.5, abs=1e-6)


def test_symmetric_curve_spin_zero():
    with pytest.raises(ValueError):
        symmetric_curve(0)


# ----------------------------------------------------------------- zeta

def test_zeta_spin_one_analytic():
    res = minimize_scalar(lambda x: float(g1_closed(x)) / x, bounds=(0.5, 1 - 1e-12), method="bounded",
                          options=dict(xatol=1e-12))
    p = zeta_point(1)
    assert p.zeta == pytest.approx(res.fun, abs=1e-9)
    assert p.X_min == pytest.approx(res.x, abs=1e-5)


def test_zeta_spin_half():
    assert zeta("1/2") == 0.5


def test_zeta_below_coherent():
    # one squeezed block always beats the coherent ratio 1/2
    for J in (1, 3 / 2, 2, 4):
        assert zeta(J) < 0.5


class TestZetaTable:
    def test_empty(self):
        t = zeta_table(0)
        assert t.entries == {}
        assert t.to_csv() == "J,zeta_squared\n"

    def test_integers_only(self):
        t = zeta_table(3)
        assert [str(s) for s in t.spins()] == ["1", "2", "3"]
        assert t.is_monotone()
        assert t.metadata["source"] == "computed"

    def test_half_integers(self):
        t = zeta_table(2, include_half=True)
        assert [str(s) for s in t.spins()] == ["1/2", "1", "3/2", "2"]
        assert t.is_monotone()

    def test_csv_round_trip(self):
        t = zeta_table(2, include_half=True)
        back = ZetaTable.from_csv(t.to_csv())
        assert back.entries.keys() == t.entries.keys()
        for k in t.entries:
            assert back.entries[k] == pytest.approx(t.entries[k], rel=1e-9)

    def test_missing(self, published):
        with pytest.raises(MissingTableEntryError):
            published[SpinLabel(200)]
        assert SpinLabel(2) in published and SpinLabel(3) not in published

    @pytest.mark.parametrize("text,line", [
        ("J,zeta\n1,0.4\n", 1),
        ("J,zeta_squared\n1,0.4\n2,abc\n", 3),
        ("J,zeta_squared\n1,0.4,9\n", 2),
        ("J,zeta_squared\n1,1.7\n", 2),
        ("J,zeta_squared\nx,0.3\n", 2),
    ])
    def test_csv_diagnostics(self, text, line):
        with pytest.raises(SchemaError, match=f"line {line}"):
            ZetaTable.from_csv(text)

    def test_published_monotone(self, published):
        assert published.is_monotone()
        assert len(published.entries) == 27


# ---------------------------------------------------------------- hulls

def test_group_blocks_by_coupling():
    assert _group_blocks(1, SpinLabel(2)) == [2]
    assert _group_blocks(2, SpinLabel(2)) == [4, 2, 0]
    assert _group_blocks(3, SpinLabel(1)) == [3, 1]
    assert _group_blocks(2, SpinLabel(1)) == [2, 0]


def test_spin_half_single_particle_hull_is_flat():
    # half the spins along +y and half along -y reach var_sum = N/4 at zero
    # polarization, the same as the coherent state at full polarization
    h = producibility_hull(1, "1/2")
    np.testing.assert_allclose(h.values, 0.5, atol=1e-12)


@pytest.mark.parametrize("k,j", [(1, 1), (2, 1), (3, "1/2"), (3, 1)])
def test_hull_shape(k, j):
    h = producibility_hull(k, j)
    assert np.all(h.second_differences() >= -1e-9)
    assert np.all(np.diff(h.values) >= -1e-12)
    assert h.X[0] == 0.0 and h.X[-1] == pytest.approx(1.0)
    assert np.all(h.values >= 0)


def test_hull_below_block_curve(hull_k1_j1):
    X = np.linspace(0, 1, 200)
    assert np.all(curve_lower(hull_k1_j1, X) <= g1_closed(X) + 1e-12)


@pytest.mark.parametrize("X", [0.3, 0.8, 0.95, 0.99])
def test_hull_matches_legendre(hull_k2_j1, X):
    leg = hull_by_legendre(2, 1, X)
    assert curve_eval(hull_k2_j1, X) == pytest.approx(leg, abs=1e-6)
    assert curve_lower(hull_k2_j1, X) <= leg + 1e-10


def test_linear_bound_below_hull(hull_k2_j1):
    line = linear_lower_bound(2, 1)
    X = np.linspace(0, 1, 400)
    assert np.all(line(X) <= curve_lower(hull_k2_j1, X) + 1e-9)
    assert line.slope == pytest.approx(zeta(2))


def test_hull_bad_args():
    with pytest.raises(ValueError):
        producibility_hull(0, 1)
    with pytest.raises(ValueError):
        producibility_hull(2, 0)


# ------------------------------------------------- soundness oracles

@pytest.mark.parametrize("j", ["1/2", 1])
def test_random_products_respect_hull(j):
    rng = np.random.default_rng(11)
    h = producibility_hull(1, j)
    nj1 = SpinLabel.of(j).J
    for n in (1, 2, 3):
        my, mz, var = random_product(rng, j, n, 3000)
        assert hull_violation(curve_lower, h, my, mz, var, n * nj1) <= 1e-9


@pytest.mark.parametrize("j", ["1/2", 1])
def test_optimal_products_respect_hull(j):
    rng = np.random.default_rng(12)
    h = producibility_hull(1, j)
    nj1 = SpinLabel.of(j).J
    for n in (1, 3):
        my, mz, var = near_optimal_product(rng, j, n, 300)
        assert hull_violation(curve_lower, h, my, mz, var, n * nj1) <= 1e-9


@pytest.mark.parametrize("j", ["1/2", 1])
def test_pairs_respect_two_hull(j):
    rng = np.random.default_rng(13)
    h = producibility_hull(2, j)
    nj1 = SpinLabel.of(j).J
    my, mz, var = random_two_producible(rng, j, [2, 1], 2000)
    assert hull_violation(curve_lower, h, my, mz, var, 3 * nj1) <= 1e-9
    my, mz, var = near_optimal_pairs(rng, j, 2, 200)
    assert hull_violation(curve_lower, h, my, mz, var, 4 * nj1) <= 1e-9


def test_optimal_pairs_can_beat_single_particle_hull():
    # the pair oracle is sharp enough to cross the k = 1 bound
    rng = np.random.default_rng(14)
    h1 = producibility_hull(1, 1)
    my, mz, var = near_optimal_pairs(rng, 1, 1, 200)
    assert hull_violation(curve_lower, h1, my, mz, var, 2.0) > 1e-3


# ------------------------------------------------------------ SM curve

def test_sm_curve_shape():
    F = sm_curve(2)
    assert F.values[0] == pytest.approx(0.0, abs=1e-12)
    assert F.X[-1] == 1.0 and F.values[-1] == pytest.approx(0.5)
    assert np.all(F.second_differences() >= -1e-9)
    assert np.all(np.diff(F.values) >= -1e-12)


def test_sm_curve_below_planar_curve():
    # one variance alone is never larger than the sum
    F = sm_curve(2)
    G = symmetric_curve(2)
    X = np.linspace(0, 1, 50)
    assert np.all(curve_eval(F, X) <= curve_eval(G, X) + 1e-6)


# --------------------------------------------------------------- cache

def test_cache_round_trip(tmp_path, monkeypatch):
    monkeypatch.setenv(cache.ENV_VAR, str(tmp_path))
    a = sm_curve("3/2")
    files = list(tmp_path.glob("sm-*.json"))
    assert len(files) == 1
    b = sm_curve("3/2")
    np.testing.assert_array_equal(a.values, b.values)
    files[0].write_text("{broken", encoding="utf-8")
    assert cache.load(("sm", "3/2"), DEFAULT_CONFIG) is None
    c = sm_curve("3/2")
    np.testing.assert_array_equal(a.values, c.values)
