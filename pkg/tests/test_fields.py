import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from amsobolev import catalog
from amsobolev.errors import ConfigError
from amsobolev.fields import (
    EUCLIDEAN,
    SMOOTHSTEP_MAX_SLOPE,
    Bump,
    Constant,
    Coordinate,
    Gaussian,
    NormPlugin,
    Polynomial,
    Tent,
    bump_cutoff,
    combine,
    cut_off,
    field_from_config,
    gradient_check,
    lip,
    smoothstep,
    smoothstep_deriv,
)
from oracles import raw_fd_gradient, sampled_slope

MEASURES = catalog.catalog_measures()
NORMS = [NormPlugin(1.0), NormPlugin(2.0), NormPlugin(math.inf)]
X, Y = Coordinate(2, 0), Coordinate(2, 1)


@st.composite
def measure_and_field(draw):
    name = draw(st.sampled_from(sorted(MEASURES)))
    rng = np.random.default_rng(draw(st.integers(0, 2**31 - 1)))
    mu = MEASURES[name]
    return mu, catalog.random_field(rng, mu), rng


def probe_points(f, rng, n=64):
    box = np.asarray(f.support if f.support is not None else [[-2, 2]] * f.dim, dtype=float)
    return rng.uniform(box[:, 0], box[:, 1], size=(n, f.dim))


def test_combine_examples():
    p = np.array([[2.0, 3.0]])
    assert np.allclose(combine(X, Y, "add").grad(p), [[1, 1]])
    assert np.allclose(combine(X, X, "sub").grad(p), [[0, 0]])
    assert np.allclose(combine(X, None, ("scale", 2.0)).grad(p), [[2, 0]])
    assert np.allclose(combine(X, Y, "mul").grad(p), [[3, 2]])
    assert np.allclose((X * Y).value(p), [6.0])


def test_bump_examples():
    b = bump_cutoff([[0, 1], [0, 1]], [[-1, 2], [-1, 2]])
    assert b.value([0.5, 0.5]) == 1.0
    assert np.all(b.grad([0.5, 0.5]) == 0.0)
    assert b.value([2.5, 0.5]) == 0.0 and np.all(b.grad([2.5, 0.5]) == 0.0)
    assert b.value([1.5, 0.5]) == pytest.approx(0.5, abs=1e-12)
    assert b.value([-0.5, 0.5]) == pytest.approx(0.5, abs=1e-12)


def test_bump_rejects_degenerate_boxes():
    with pytest.raises(ValueError):
        Bump([[0, 1]], [[0, 1]])
    with pytest.raises(ValueError):
        Bump([[0, 1]], [[0.5, 2]])


def test_smoothstep_profile():
    t = np.linspace(0, 1, 1001)
    assert smoothstep(np.array([0.0, 0.5, 1.0])).tolist() == [0.0, 0.5, 1.0]
    assert np.allclose(smoothstep(t), 6 * t**5 - 15 * t**4 + 10 * t**3, atol=1e-15)
    assert smoothstep_deriv(np.array([0.0, 1.0])).tolist() == [0.0, 0.0]
    assert np.max(smoothstep_deriv(t)) == pytest.approx(SMOOTHSTEP_MAX_SLOPE)


def test_lip_examples():
    f = X + Y
    pts = np.array([[0.3, -1.0], [5.0, 2.0]])
    assert np.allclose(lip(f, pts, EUCLIDEAN), math.sqrt(2))
    assert np.allclose(lip(f, pts, NormPlugin(math.inf)), 2.0)
    assert np.allclose(lip(f, pts, NormPlugin(1.0)), 1.0)
    for n in NORMS:
        assert np.all(lip(Constant(2, 3.0), pts, n) == 0.0)


@given(st.integers(0, 2**31 - 1), st.integers(1, 4))
def test_dual_norm_inequality(seed, d):
    rng = np.random.default_rng(seed)
    u, v = rng.standard_normal((2, 50, d))
    for n in NORMS:
        assert np.all(np.abs(np.sum(u * v, axis=1)) <= n.norm(u) * n.dual_norm(v) * (1 + 1e-12) + 1e-12)


@given(measure_and_field())
def test_gradient_matches_finite_differences_with_h2_scaling(case):
    _, f, rng = case
    pts = probe_points(f, rng)
    e3, e4 = gradient_check(f, pts, (1e-3, 1e-4))
    # independent central differences agree with the library's helper
    raw = raw_fd_gradient(f.value, pts, 1e-3)
    assert np.max(np.linalg.norm(raw - f.grad(pts), axis=1)) == pytest.approx(e3, rel=1e-6, abs=1e-12)
    # O(h^2): shrinking h tenfold shrinks the error ~100x until round-off (~1e-11) takes over
    assert e4 <= max(e3 / 50.0, 5e-10)
    assert e3 <= 1e-4 * (1 + f.lipschitz)


@given(measure_and_field())
def test_lipschitz_bound_and_support(case):
    _, f, rng = case
    pts = probe_points(f, rng, 256)
    assert np.all(np.linalg.norm(f.grad(pts), axis=1) <= f.lipschitz * (1 + 1e-12) + 1e-12)
    box = np.asarray(f.support)
    outside = box[:, 1] + rng.uniform(0.01, 1.0, size=(64, f.dim))
    assert np.all(f.value(outside) == 0.0)
    assert np.all(f.grad(outside) == 0.0)


@given(measure_and_field(), st.floats(-3, 3))
def test_lip_homogeneity_and_triangle(case, a):
    mu, f, rng = case
    g = catalog.random_field(rng, mu)
    pts = probe_points(f, rng)
    for n in NORMS:
        assert np.allclose(lip(a * f, pts, n), abs(a) * lip(f, pts, n), atol=1e-12, rtol=1e-12)
        assert np.all(lip(f + g, pts, n) <= lip(f, pts, n) + lip(g, pts, n) + 1e-12)
    assert np.allclose(lip(f, pts, EUCLIDEAN), np.linalg.norm(f.grad(pts), axis=1), atol=0, rtol=0)


@pytest.mark.parametrize("p", [1.0, 2.0, math.inf])
def test_lip_matches_sampled_slope(p):
    rng = np.random.default_rng(7)
    norm = NormPlugin(p)
    checked = 0
    for name, mu in MEASURES.items():
        for _ in range(3):
            f = catalog.random_field(rng, mu)
            for x in probe_points(f, rng, 8):
                exact = float(lip(f, x, norm))
                if exact < 1e-2:
                    continue
                slope = sampled_slope(f.value, x, 1e-4, p=p)
                assert slope == pytest.approx(exact, rel=0.05), (name, f.name, x)
                checked += 1
    assert checked > 50


def test_tent_and_gaussian_values():
    t = Tent([0.0, 0.0], 2.0, 3.0)
    assert t.value([0.0, 0.0]) == 3.0
    assert t.value([2.0, 0.0]) == 0.0
    assert t.value([1.0, 0.0]) == pytest.approx(1.5, abs=1e-12)
    g = Gaussian([1.0, 0.0], 0.5, 2.0)
    assert g.value([1.0, 0.0]) == pytest.approx(2.0)
    assert g.support is None


def test_polynomial_gradient():
    p = Polynomial(2, [(2.0, (2, 1)), (-1.0, (0, 3))])
    x = np.array([[1.5, -2.0]])
    assert np.allclose(p.value(x), 2 * 1.5**2 * -2.0 - (-2.0) ** 3)
    assert np.allclose(p.grad(x), [[4 * 1.5 * -2.0, 2 * 1.5**2 - 3 * 4.0]])


@given(measure_and_field())
def test_config_round_trip(case):
    _, f, rng = case
    g = field_from_config(f.descriptor)
    pts = probe_points(f, rng)
    assert np.array_equal(g.value(pts), f.value(pts))
    assert np.array_equal(g.grad(pts), f.grad(pts))


def test_config_errors_carry_paths():
    with pytest.raises(ConfigError) as exc:
        field_from_config({"type": "add", "left": {"type": "coordinate", "dim": 2, "index": 0},
                           "right": {"type": "gaussian", "center": [0, 0], "width": 1, "colour": 3}})
    assert exc.value.path == "$.right"
    with pytest.raises(ConfigError):
        field_from_config({"type": "no-such-field"})


def test_cut_off_support():
    f = cut_off(X, [[0, 1], [0, 1]], [[-1, 2], [-1, 2]])
    assert np.allclose(np.asarray(f.support), [[-1, 2], [-1, 2]])
    assert f.value([0.5, 0.2]) == 0.5
