"""Decomposability bundle fields for structured measures.

Per-component rules (standard identifications, not computed from scratch):

* lebesgue: the full space (Rademacher).
* rectifiable patch: the tangent space span{d phi / d u_i}.
* fat Cantor: the embedding axis; the measure is absolutely continuous
  with respect to one-dimensional Lebesgue measure on that line.
* classic Cantor and atoms: the zero subspace.

Where several components' supports meet, the subspaces are joined with
:func:`span_union`.  Points outside every support get the zero subspace;
they are null for the measure, so any choice is admissible there.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import MeasureError
from .grassmann import Subspace, project, span_union
from .measure import (
    MEMBERSHIP_TOL,
    RANK_TOL,
    Atoms,
    Cantor,
    Lebesgue,
    RectifiablePatch,
    membership,
    quadrature,
)


def component_bases(comp, points):
    """Orthonormal bundle bases of one component at ``points``: array (n, d, k)."""
    n, d = len(points), comp.dim
    if isinstance(comp, Lebesgue):
        return np.broadcast_to(np.eye(d), (n, d, d)).copy()
    if isinstance(comp, RectifiablePatch):
        u = np.clip(comp.locate(points), 0.0, 1.0)
        J = comp.jacobian(u)
        q, r = np.linalg.qr(J)
        diag = np.abs(np.diagonal(r, axis1=1, axis2=2))
        bad = np.nonzero(diag.min(axis=1) <= RANK_TOL)[0]
        if bad.size:
            raise MeasureError(f"{comp.label}: rank-deficient tangent at node {int(bad[0])}")
        return q
    if isinstance(comp, Cantor):
        if comp.variant == "classic":
            return np.zeros((n, d, 0))
        e = np.zeros(d)
        e[comp.axis] = 1.0
        return np.broadcast_to(e[None, :, None], (n, d, 1)).copy()
    if isinstance(comp, Atoms):
        return np.zeros((n, d, 0))
    raise TypeError(f"no bundle rule for {type(comp).__name__}")


@dataclass(frozen=True, eq=False)
class BundleField:
    """x -> V(mu, x) for a structured measure, sampled at a quadrature rule's nodes."""

    measure: object
    rule: object
    projectors: np.ndarray  # (N, d, d)
    dims: np.ndarray  # (N,)
    unsound: bool = False
    tol: float = MEMBERSHIP_TOL

    def node_subspace(self, i):
        return _subspace_from_projector(self.projectors[i])

    def at(self, x):
        """V(mu, x) at an arbitrary point."""
        P = self.projectors_at(np.atleast_2d(x))[0]
        return _subspace_from_projector(P)

    def projectors_at(self, points):
        points = np.atleast_2d(np.asarray(points, dtype=float))
        P, _ = _projectors(self.measure, points, self.rule.resolution, self.tol)
        return P

    def project_at(self, points, vectors):
        return np.einsum("nij,nj->ni", self.projectors_at(points), vectors)

    def project_nodes(self, vectors):
        """Per-node projection of (N, d) vectors onto the bundle."""
        return np.einsum("nij,nj->ni", self.projectors, vectors)


def _subspace_from_projector(P):
    w, v = np.linalg.eigh(P)
    return Subspace(P.shape[0], [v[:, j] for j in range(len(w)) if w[j] > 0.5])


def _override_bases(measure):
    out = {}
    for idx, basis in measure.bundle_override:
        out[idx] = Subspace(measure.dim, basis)
    return out


def _projectors(measure, points, resolution, tol):
    n, d = points.shape
    fired = membership(measure, points, tol, resolution)
    overrides = _override_bases(measure)
    P = np.zeros((n, d, d))
    per_point = [[] for _ in range(n)]
    for c, (_, comp) in enumerate(measure.components):
        idx = np.nonzero(fired[:, c])[0]
        if idx.size == 0:
            continue
        if c in overrides:
            B = np.broadcast_to(overrides[c].basis.T, (idx.size, d, overrides[c].dim))
        else:
            B = component_bases(comp, points[idx])
        for local, i in enumerate(idx):
            per_point[i].append(B[local])
    dims = np.zeros(n, dtype=int)
    for i, bases in enumerate(per_point):
        if not bases:
            continue
        if len(bases) == 1:
            Q = bases[0]
        else:
            V = Subspace(d, [])
            for Q in bases:
                V = span_union(V, Subspace(d, list(Q.T)))
            Q = V.basis.T
        P[i] = Q @ Q.T
        dims[i] = Q.shape[1]
    return P, dims


_BUNDLE_CACHE = {}


def assign_bundle(mu, resolution=None, tol=MEMBERSHIP_TOL):
    """Bundle field of ``mu`` evaluated at the nodes of its quadrature rule."""
    rule = quadrature(mu, resolution)
    key = (id(mu), rule.resolution, tol)
    hit = _BUNDLE_CACHE.get(key)
    if hit is not None and hit.measure is mu:
        return hit
    P, dims = _projectors(mu, rule.nodes, rule.resolution, tol)
    for arr in (P, dims):
        arr.setflags(write=False)
    field = BundleField(mu, rule, P, dims, unsound=bool(mu.bundle_override), tol=tol)
    if len(_BUNDLE_CACHE) > 64:
        _BUNDLE_CACHE.clear()
    _BUNDLE_CACHE[key] = field
    return field


def _sphere_net(k, n_dirs, seed=0):
    if k == 1:
        return np.array([[1.0], [-1.0]])
    if k == 2:
        a = 2 * np.pi * np.arange(n_dirs) / n_dirs
        return np.stack([np.cos(a), np.sin(a)], axis=1)
    rng = np.random.default_rng(seed)
    g = rng.standard_normal((n_dirs, k))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    return np.concatenate([np.eye(k), -np.eye(k), g])


def differentiability_residual(f, V, x, radii, n_dirs=64):
    """Max over v in V, |v| = r, of |f(x+v) - f(x) - pi_V(grad f(x)).v| / |v|, per radius.

    The zero subspace has an empty net; its residual is 0 by convention.
    """
    x = np.asarray(x, dtype=float)
    if V.dim == 0:
        return [0.0 for _ in radii]
    dirs = _sphere_net(V.dim, n_dirs) @ V.basis
    g = project(V, f.grad(x))
    fx = f.value(x)
    out = []
    for r in radii:
        v = r * dirs
        resid = np.abs(f.value(x + v) - fx - v @ g) / r
        out.append(float(resid.max()))
    return out
