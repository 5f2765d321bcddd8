import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from amsobolev import catalog
from amsobolev.bundle import assign_bundle, component_bases, differentiability_residual
from amsobolev.fields import Coordinate, Polynomial
from amsobolev.grassmann import Subspace, grassmann_distance
from amsobolev.measure import Atoms, Measure, measure_from_config, quadrature

MEASURES = catalog.catalog_measures()


def test_lebesgue_bundle_is_full():
    b = assign_bundle(MEASURES["box"])
    assert np.all(b.dims == 2)
    assert np.allclose(b.projectors, np.eye(2))


def test_segment_bundle_is_tangent():
    b = assign_bundle(MEASURES["segment"])
    assert np.all(b.dims == 1)
    assert b.at([0.3, 0.0]) == Subspace(2, [[1, 0]])


def test_atom_bundle_is_zero():
    mu = Measure(2, ((1.0, Atoms([[0.0, 0.0]], [1.0])),))
    b = assign_bundle(mu)
    assert b.dims.tolist() == [0]
    assert b.at([0, 0]).dim == 0


def test_arc_bundle_follows_the_tangent():
    b = assign_bundle(MEASURES["arc"])
    nodes = b.rule.nodes
    a = np.arctan2(nodes[:, 1], nodes[:, 0])
    tangents = np.stack([-np.sin(a), np.cos(a)], axis=1)
    P = np.einsum("ni,nj->nij", tangents, tangents)
    assert np.max(np.abs(b.projectors - P)) <= 1e-12


@pytest.mark.parametrize(
    "name,dims", [("box", {2}), ("segment", {1}), ("arc", {1}), ("graph", {1}), ("plane3", {2}),
                  ("cantor_classic", {0}), ("cantor_fat", {1}), ("cantor_classic_2d", {0}), ("atoms", {0}),
                  ("mixture", {0, 1, 2})],
)
def test_bundle_dimensions(name, dims):
    b = assign_bundle(MEASURES[name])
    assert set(b.dims.tolist()) == dims
    for i in range(0, len(b.dims), max(1, len(b.dims) // 50)):
        V = b.node_subspace(i)
        assert V.ambient_dim == MEASURES[name].dim and V.dim == b.dims[i]


def test_overlap_takes_the_span_union():
    mu = MEASURES["overlap"]
    b = assign_bundle(mu)
    on_segment = b.rule.component == 1
    assert np.all(b.dims[on_segment] == 2)
    assert np.all(b.dims >= 1)


def test_off_support_points_get_zero_subspace():
    b = assign_bundle(MEASURES["segment"])
    assert b.at([0.5, 0.5]).dim == 0


def test_override_is_flagged_unsound():
    doc = dict(MEASURES["segment"].config(), bundle_override=[{"component": 0, "basis": [[0, 1]]}])
    mu = measure_from_config(doc)
    b = assign_bundle(mu)
    assert b.unsound
    assert b.node_subspace(0) == Subspace(2, [[0, 1]])


@given(st.sampled_from(sorted(MEASURES)))
def test_independent_assignments_agree(name):
    a = assign_bundle(MEASURES[name])
    b = assign_bundle(measure_from_config(MEASURES[name].config()))
    assert a is not b
    for i in range(0, len(a.dims), max(1, len(a.dims) // 40)):
        assert grassmann_distance(a.node_subspace(i), b.node_subspace(i)) <= 1e-12


def test_residual_examples():
    V = Subspace(2, [[1, 0]])
    x = [0.5, 0.0]
    assert differentiability_residual(Coordinate(2, 0), V, x, [0.1, 0.01]) == pytest.approx([0, 0], abs=1e-14)
    sq = Polynomial(2, [(1.0, (2, 0))])
    assert differentiability_residual(sq, V, x, [0.1, 0.01]) == pytest.approx([0.1, 0.01], rel=1e-9)
    assert differentiability_residual(sq, Subspace.zero(2), x, [0.1]) == [0.0]


@given(st.sampled_from(sorted(MEASURES)), st.integers(0, 2**31 - 1))
def test_residual_has_first_order_decay(name, seed):
    mu = MEASURES[name]
    rng = np.random.default_rng(seed)
    f = catalog.random_field(rng, mu)
    b = assign_bundle(mu)
    for i in rng.choice(len(b.dims), size=min(5, len(b.dims)), replace=False):
        V = b.node_subspace(i)
        r1, r2 = differentiability_residual(f, V, b.rule.nodes[i], [1e-2, 1e-3])
        assert r2 <= r1 / 5 + 1e-9


def test_component_bases_shapes():
    mu = MEASURES["plane3"]
    comp = mu.components[0][1]
    pts = quadrature(mu).nodes[:10]
    B = component_bases(comp, pts)
    assert B.shape == (10, 3, 2)
    assert np.allclose(np.einsum("ndk,ndl->nkl", B, B), np.eye(2))


def test_graph_tangent_matches_derivative():
    b = assign_bundle(MEASURES["graph"])
    x = b.rule.nodes[:, 0]
    t = np.stack([np.ones_like(x), x], axis=1) / np.sqrt(1 + x**2)[:, None]
    assert np.max(np.abs(b.projectors - np.einsum("ni,nj->nij", t, t))) <= 1e-9
    assert math.isclose(b.rule.nodes[3, 1], 0.5 * b.rule.nodes[3, 0] ** 2, abs_tol=1e-15)
