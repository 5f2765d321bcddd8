import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from amsobolev import catalog
from amsobolev.errors import ConfigError, EvaluationError, MeasureError
from amsobolev.fields import Constant, Coordinate, Polynomial
from amsobolev.measure import (
    Arc,
    Atoms,
    Cantor,
    Lebesgue,
    Measure,
    PlanePatch,
    Segment,
    fat_cantor_stage_mass_exact,
    integrate,
    l2_norm,
    measure_from_config,
    membership,
    quadrature,
)
from oracles import classic_cantor_intervals, fat_cantor_intervals, interval_moment

MEASURES = catalog.catalog_measures()


def seg():
    return Measure(2, ((1.0, Segment([0, 0], [1, 0])),), "segment")


def test_segment_rule():
    rule = quadrature(seg(), 100)
    assert len(rule.nodes) == 100
    assert np.allclose(rule.weights, 0.01, rtol=0, atol=1e-15)
    assert rule.mass == pytest.approx(1.0, abs=1e-14)


def test_segment_moments():
    rule = quadrature(seg())
    assert integrate(rule, Coordinate(2, 0)) == pytest.approx(0.5, abs=1e-9)
    assert l2_norm(rule, Coordinate(2, 0)) == pytest.approx(math.sqrt(1 / 3), abs=1e-6)
    assert l2_norm(rule, Constant(2, 0.0)) == 0.0
    assert l2_norm(rule, Constant(2, 1.0)) == pytest.approx(1.0, abs=1e-14)


def test_lebesgue_first_moment():
    mu = Measure(1, ((1.0, Lebesgue([[0, 1]])),))
    assert integrate(quadrature(mu, 1000), Coordinate(1, 0)) == pytest.approx(0.5, abs=1e-6)


def test_fat_cantor_depth10_mass():
    mu = Measure(1, ((1.0, Cantor("fat", depth=10, dim=1)),))
    exact = sum(ell for _, ell in fat_cantor_intervals(10))
    assert quadrature(mu).mass == pytest.approx(float(exact), abs=1e-12)
    assert float(exact) == pytest.approx(0.5 + 2.0**-11, abs=1e-15)


@pytest.mark.parametrize("depth", [0, 1, 2, 5, 9, 12, 14])
def test_cantor_stage_mass_closed_form(depth):
    fat = Measure(1, ((1.0, Cantor("fat", dim=1)),))
    rule = quadrature(fat, {"depth": depth})
    assert rule.mass == pytest.approx(float(fat_cantor_stage_mass_exact(depth)), abs=1e-12)
    assert fat_cantor_stage_mass_exact(depth) == sum(ell for _, ell in fat_cantor_intervals(depth))
    classic = Measure(1, ((1.0, Cantor("classic", dim=1)),))
    assert quadrature(classic, {"depth": depth}).mass == pytest.approx(1.0, abs=1e-12)


def test_fat_cantor_second_moment_interval_oracle():
    mu = MEASURES["cantor_fat"]
    value = integrate(quadrature(mu), Polynomial(1, [(1.0, (2,))]))
    oracle = interval_moment(fat_cantor_intervals(12), 2)
    assert value == pytest.approx(float(oracle), abs=1e-9)


def test_classic_cantor_second_moment():
    mu = MEASURES["cantor_classic"]
    value = integrate(quadrature(mu), Polynomial(1, [(1.0, (2,))]))
    assert value == pytest.approx(3 / 8, abs=1e-9)
    # uniform density 2^{-12} / 3^{-12} on each stage-12 interval
    oracle = interval_moment(classic_cantor_intervals(12), 2, density=lambda ell: Fraction(1, 2**12) / ell)
    assert value == pytest.approx(float(oracle), abs=1e-9)


def test_cantor_intervals_match_exact_rationals():
    c = Cantor("fat", dim=1)
    lefts, ell = c.intervals(8)
    exact = fat_cantor_intervals(8)
    assert np.allclose(lefts, [float(a) for a, _ in exact], atol=1e-14)
    assert ell == pytest.approx(float(exact[0][1]), abs=1e-15)


def test_mixture_mass_additivity():
    mu = MEASURES["mixture"]
    rule = quadrature(mu)
    parts = [w * math.fsum(c.nodes_weights(r)[1]) for (w, c), r in zip(mu.components, rule.resolution)]
    assert rule.mass == math.fsum(parts)
    assert rule.mass == pytest.approx(1.0 + 0.5 + 0.25, abs=1e-12)


@pytest.mark.parametrize("name", ["box", "segment", "arc", "graph", "plane3"])
def test_refinement_stability(name):
    mu = MEASURES[name]
    f = catalog.random_field(np.random.default_rng(3), mu)
    base = 16 if name in ("box", "plane3") else 32
    vals = [integrate(quadrature(mu, base * 2**j), f) for j in range(4)]
    diffs = np.abs(np.diff(vals))
    # observed order >= 1: each doubling at least halves the change (up to round-off)
    assert np.all(diffs[1:] <= 0.5 * diffs[:-1] + 1e-13)
    assert diffs[-1] <= 1.0 / (base * 8)


def test_arc_length():
    mu = MEASURES["arc"]
    assert quadrature(mu).mass == pytest.approx(math.pi / 2, abs=1e-12)


def test_graph_length():
    mu = MEASURES["graph"]
    exact = 0.5 * math.sqrt(2) + 0.5 * math.asinh(1.0)  # int_0^1 sqrt(1 + t^2) dt
    assert quadrature(mu, 4096).mass == pytest.approx(exact, abs=1e-7)


def test_rank_deficient_patch_is_rejected():
    with pytest.raises(MeasureError, match="patch:segment"):
        quadrature(Measure(2, ((1.0, Segment([0, 0], [0, 0])),)))
    with pytest.raises(MeasureError, match="patch:plane"):
        quadrature(Measure(3, ((1.0, PlanePatch([0, 0, 0], [[1, 0, 0], [2, 0, 0]])),)))


def test_nonfinite_value_reports_node():
    class Bad(Constant):
        def _value(self, pts):
            out = np.ones(len(pts))
            out[7] = np.nan
            return out

    with pytest.raises(EvaluationError) as exc:
        integrate(quadrature(seg(), 10), Bad(2, 1.0))
    assert exc.value.index == 7


def test_membership():
    mu = MEASURES["mixture"]
    pts = np.array([[0.5, 0.0], [2.5, 0.5], [0.5, 1.5], [0.5, 0.5], [0.5, 1e-6]])
    m = membership(mu, pts)
    assert m.tolist() == [
        [True, False, False],
        [False, True, False],
        [False, False, True],
        [False, False, False],
        [False, False, False],
    ]
    fat = MEASURES["cantor_fat"]
    assert not membership(fat, [[0.5]])[0, 0]  # centre of the first gap
    assert membership(fat, [[0.0]])[0, 0]


@given(st.sampled_from(sorted(MEASURES)))
def test_nodes_lie_on_their_component(name):
    mu = MEASURES[name]
    rule = quadrature(mu)
    m = membership(mu, rule.nodes)
    assert np.all(m[np.arange(len(rule.nodes)), rule.component])
    assert np.all(rule.weights > 0)


@given(st.sampled_from(sorted(MEASURES)), st.floats(0.1, 10))
def test_scaling_scales_integrals(name, c):
    mu = MEASURES[name]
    f = catalog.coordinate_field(mu, 0)
    a = integrate(quadrature(mu), f)
    b = integrate(quadrature(mu.scaled(c)), f)
    assert b == pytest.approx(c * a, rel=1e-12, abs=1e-14)


@given(st.sampled_from(sorted(MEASURES)))
def test_config_round_trip(name):
    mu = MEASURES[name]
    again = measure_from_config(mu.config())
    r1, r2 = quadrature(mu), quadrature(again)
    assert np.array_equal(r1.nodes, r2.nodes) and np.array_equal(r1.weights, r2.weights)


@pytest.mark.parametrize(
    "doc,path",
    [
        ({"dim": 2, "components": [{"type": "blob"}]}, "$.components[0].type"),
        ({"dim": 2, "components": [{"type": "atoms", "points": [[0, 0]], "masses": [1], "extra": 1}]},
         "$.components[0]"),
        ({"dim": 2, "components": []}, "$.components"),
        ({"dim": 0, "components": [{"type": "atoms", "points": [[0]], "masses": [1]}]}, "$.dim"),
        ({"dim": 2, "components": [{"type": "patch", "shape": "spiral"}]}, "$.components[0].shape"),
        ({"dim": 2, "components": [{"type": "atoms", "points": [[0, 0]]}]}, "$.components[0]"),
        ({"dim": 2, "colour": 1, "components": []}, "$"),
    ],
)
def test_config_errors(doc, path):
    with pytest.raises(ConfigError) as exc:
        measure_from_config(doc)
    assert exc.value.path == path


def test_invalid_components():
    with pytest.raises(MeasureError):
        Atoms([[0, 0]], [-1.0])
    with pytest.raises(MeasureError):
        Cantor("thin")
    with pytest.raises(MeasureError):
        Measure(2, ())
    with pytest.raises(MeasureError):
        Measure(2, ((0.0, Segment([0, 0], [1, 0])),))
    with pytest.raises(ValueError):
        Arc([0, 0], 1.0, [0, 1], plane=(0, 0))
