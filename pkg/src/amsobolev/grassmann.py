"""Linear subspaces of R^d stored as orthonormal bases.

Projection, span union and the Hausdorff distance between unit balls
(the Grassmannian distance) all live here.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError

ORTHO_TOL = 1e-12
DROP_TOL = 1e-10


def _orthonormalize(vectors, dim, drop_tol=DROP_TOL):
    """Modified Gram-Schmidt with two passes; drops vectors whose residual is below drop_tol."""
    basis = []
    for v in vectors:
        w = np.array(v, dtype=float).reshape(dim)
        scale = np.linalg.norm(w)
        if scale == 0.0:
            continue
        for _ in range(2):
            for b in basis:
                w = w - (w @ b) * b
        nrm = np.linalg.norm(w)
        if nrm <= drop_tol * max(scale, 1.0):
            continue
        basis.append(w / nrm)
    return basis


@dataclass(frozen=True, eq=False)
class Subspace:
    """A k-dimensional linear subspace of R^d.

    The basis is re-orthonormalized on construction, so callers may pass any
    spanning set; linearly dependent vectors are dropped.
    """

    ambient_dim: int
    basis: np.ndarray = field(repr=False)

    def __init__(self, ambient_dim, basis=()):
        ambient_dim = int(ambient_dim)
        if ambient_dim <= 0:
            raise DimensionError(f"ambient dimension must be positive, got {ambient_dim}")
        vecs = [np.asarray(b, dtype=float) for b in basis]
        for b in vecs:
            if b.shape != (ambient_dim,):
                raise DimensionError(f"basis vector of shape {b.shape} in R^{ambient_dim}")
        ortho = _orthonormalize(vecs, ambient_dim)
        arr = np.array(ortho, dtype=float).reshape(len(ortho), ambient_dim)
        arr.setflags(write=False)
        object.__setattr__(self, "ambient_dim", ambient_dim)
        object.__setattr__(self, "basis", arr)

    @classmethod
    def zero(cls, dim):
        return cls(dim, ())

    @classmethod
    def full(cls, dim):
        return cls(dim, np.eye(dim))

    @classmethod
    def line(cls, direction):
        direction = np.asarray(direction, dtype=float)
        return cls(direction.size, [direction])

    @property
    def dim(self):
        return self.basis.shape[0]

    def projector(self):
        """The d x d orthogonal projection matrix onto the subspace."""
        return self.basis.T @ self.basis

    def contains(self, v, tol=1e-9):
        v = np.asarray(v, dtype=float)
        return np.linalg.norm(v - project(self, v)) <= tol * (1.0 + np.linalg.norm(v))

    def __eq__(self, other):
        if not isinstance(other, Subspace) or other.ambient_dim != self.ambient_dim:
            return NotImplemented
        return self.dim == other.dim and grassmann_distance(self, other) <= 1e-9

    __hash__ = None

    def __repr__(self):
        return f"Subspace(dim={self.dim}, ambient_dim={self.ambient_dim})"


def _check_same(V, W):
    if V.ambient_dim != W.ambient_dim:
        raise DimensionError(f"ambient dimensions differ: {V.ambient_dim} vs {W.ambient_dim}")


def project(V, v):
    """Orthogonal projection of ``v`` onto ``V``.

    ``v`` may be a single vector of shape (d,) or a stack of shape (n, d).
    """
    v = np.asarray(v, dtype=float)
    if v.shape[-1] != V.ambient_dim:
        raise DimensionError(f"vector of length {v.shape[-1]} projected in R^{V.ambient_dim}")
    if V.dim == 0:
        return np.zeros_like(v)
    return (v @ V.basis.T) @ V.basis


def span_union(V, W):
    """Orthonormal basis of V + W."""
    _check_same(V, W)
    return Subspace(V.ambient_dim, list(V.basis) + list(W.basis))


def grassmann_distance(V, W):
    """Hausdorff distance between the closed unit balls of V and W.

    For |x| <= 1 in V, the nearest point of the unit ball of W is the
    projection of x onto W (it already has norm <= 1), so the one-sided
    distance is the operator norm of (I - P_W) P_V.  This is exact for any
    pair of dimensions and reduces to the sine of the largest principal
    angle when dim V = dim W.
    """
    _check_same(V, W)
    d = V.ambient_dim
    PV, PW = V.projector(), W.projector()
    eye = np.eye(d)
    a = np.linalg.norm((eye - PW) @ PV, 2) if V.dim else 0.0
    b = np.linalg.norm((eye - PV) @ PW, 2) if W.dim else 0.0
    return float(min(max(a, b), 1.0))


def principal_angles(V, W):
    """Principal angles (radians, ascending) between two subspaces of equal dimension."""
    _check_same(V, W)
    if V.dim != W.dim:
        raise DimensionError("principal angles need equal subspace dimensions")
    if V.dim == 0:
        return np.zeros(0)
    s = np.linalg.svd(V.basis @ W.basis.T, compute_uv=False)
    return np.sort(np.arccos(np.clip(s, -1.0, 1.0)))


def orthogonal_complement(V):
    """Orthonormal basis of the orthogonal complement of V."""
    d = V.ambient_dim
    resid = np.eye(d) - V.projector()
    return Subspace(d, list(resid))
