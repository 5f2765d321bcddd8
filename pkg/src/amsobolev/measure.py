"""Structured Radon measures on R^d and their quadrature rules.

A :class:`Measure` is a finite positive combination of cataloged
components.  Each component knows its own quadrature rule, exact mass
(when available) and a membership oracle used to resolve mixture
overlaps in the bundle assignment.

Resolution conventions, per component:

* ``Lebesgue``: midpoint cells per axis (``n**d`` nodes).
* ``RectifiablePatch``: midpoint cells per parameter axis (``n**k`` nodes).
* ``Cantor``: construction depth (``2**n`` nodes, one per surviving interval).
* ``Atoms``: ignored, the rule is exact.

Masses are never normalized.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .errors import ConfigError, DimensionError, EvaluationError, MeasureError
from .fields import Constant, ScalarField, field_from_config

MEMBERSHIP_TOL = 1e-9
RANK_TOL = 1e-8


def _midpoints(n):
    return (np.arange(n) + 0.5) / n


def _grid(n, k):
    """Midpoint grid of [0,1]^k with n cells per axis, lexicographic order."""
    axes = [_midpoints(n)] * k
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


class Component:
    """Base class for measure components."""

    kind = "component"
    dim: int
    default_resolution: int = 1

    def nodes_weights(self, resolution):
        raise NotImplementedError

    def contains(self, points, tol=MEMBERSHIP_TOL):
        raise NotImplementedError

    def analytic_mass(self):
        """Closed-form mass, or ``None`` when only the quadrature knows it."""
        return None

    def bounding_box(self):
        raise NotImplementedError

    @property
    def label(self):
        return self.kind


# --------------------------------------------------------------- lebesgue


class Lebesgue(Component):
    """Lebesgue measure on a box, optionally weighted by a catalog density field."""

    kind = "lebesgue"
    default_resolution = 64

    def __init__(self, box, density=None):
        self.box = np.array(box, dtype=float)
        if self.box.ndim != 2 or self.box.shape[1] != 2:
            raise MeasureError("lebesgue box must have shape (d, 2)")
        if np.any(self.box[:, 1] <= self.box[:, 0]):
            raise MeasureError("lebesgue box has zero volume")
        self.dim = self.box.shape[0]
        if density is not None and density.dim != self.dim:
            raise DimensionError("density field dimension differs from the box")
        self.density = density

    def nodes_weights(self, resolution):
        n = int(resolution)
        lo, hi = self.box[:, 0], self.box[:, 1]
        nodes = lo + _grid(n, self.dim) * (hi - lo)
        cell = float(np.prod((hi - lo) / n))
        if self.density is None:
            weights = np.full(len(nodes), cell)
        else:
            dens = self.density.value(nodes)
            if np.any(dens < 0) or not np.all(np.isfinite(dens)):
                raise MeasureError("lebesgue density must be finite and non-negative")
            weights = cell * dens
        return nodes, weights

    def contains(self, points, tol=MEMBERSHIP_TOL):
        pts = np.atleast_2d(points)
        return np.all((pts >= self.box[:, 0] - tol) & (pts <= self.box[:, 1] + tol), axis=1)

    def analytic_mass(self):
        if self.density is None or isinstance(self.density, Constant):
            c = 1.0 if self.density is None else self.density.c
            return c * float(np.prod(self.box[:, 1] - self.box[:, 0]))
        return None

    def bounding_box(self):
        return self.box.copy()

    def config(self):
        out = {"type": "lebesgue", "box": self.box.tolist()}
        if self.density is not None:
            out["density"] = self.density.descriptor
        return out


# ----------------------------------------------------------------- patches


class RectifiablePatch(Component):
    """k-dimensional parametrized patch phi: [0,1]^k -> R^d with k < d, weighted by the
    k-dimensional area element times an optional density on parameter space."""

    kind = "patch"
    shape = "patch"
    k: int

    @property
    def default_resolution(self):
        # per parameter axis: curves are cheap, surfaces square the count
        return 1024 if self.k == 1 else 64

    def __init__(self, density=None):
        if density is not None and density.dim != self.k:
            raise DimensionError("patch density must live on the k-dimensional parameter space")
        if self.k >= self.dim:
            raise MeasureError(f"patch dimension {self.k} must be below ambient dimension {self.dim}")
        self.density = density

    def phi(self, u):
        raise NotImplementedError

    def jacobian(self, u):
        """Array of shape (n, d, k)."""
        raise NotImplementedError

    def locate(self, points):
        """Parameter of the nearest patch point (approximate for graphs), shape (n, k)."""
        raise NotImplementedError

    def area_factor(self, u):
        J = self.jacobian(u)
        s = np.linalg.svd(J, compute_uv=False)
        return np.prod(s, axis=1), s

    def nodes_weights(self, resolution):
        n = int(resolution)
        u = _grid(n, self.k)
        factor, sing = self.area_factor(u)
        bad = np.nonzero(sing.min(axis=1) <= RANK_TOL)[0]
        if bad.size:
            raise MeasureError(f"{self.label}: rank-deficient Jacobian at parameter node {int(bad[0])}")
        dens = np.ones(len(u)) if self.density is None else self.density.value(u)
        return self.phi(u), factor * dens / n**self.k

    def contains(self, points, tol=MEMBERSHIP_TOL):
        pts = np.atleast_2d(points)
        u = np.clip(self.locate(pts), 0.0, 1.0)
        return np.linalg.norm(self.phi(u) - pts, axis=1) <= tol

    def bounding_box(self):
        u = _grid(64, self.k)
        p = np.concatenate([self.phi(u), self.phi(np.array(list(itertools.product([0.0, 1.0], repeat=self.k))))])
        return np.stack([p.min(axis=0), p.max(axis=0)], axis=1)

    @property
    def label(self):
        return f"patch:{self.shape}"

    def _density_config(self, out):
        if self.density is not None:
            out["density"] = self.density.descriptor
        return out


class Segment(RectifiablePatch):
    shape = "segment"
    k = 1

    def __init__(self, start, end, density=None):
        self.start = np.array(start, dtype=float)
        self.end = np.array(end, dtype=float)
        self.dim = self.start.size
        super().__init__(density)
        self.direction = self.end - self.start

    def phi(self, u):
        return self.start + u[:, :1] * self.direction

    def jacobian(self, u):
        return np.broadcast_to(self.direction[None, :, None], (len(u), self.dim, 1)).copy()

    def locate(self, points):
        t = (points - self.start) @ self.direction / (self.direction @ self.direction)
        return t[:, None]

    def analytic_mass(self):
        return float(np.linalg.norm(self.direction)) if self.density is None else None

    def config(self):
        return self._density_config(
            {"type": "patch", "shape": "segment", "start": self.start.tolist(), "end": self.end.tolist()}
        )


class Arc(RectifiablePatch):
    """Circular arc center + radius*(cos a, sin a) in the coordinate plane ``plane``."""

    shape = "arc"
    k = 1

    def __init__(self, center, radius, angles, plane=(0, 1), density=None):
        self.center = np.array(center, dtype=float)
        self.dim = self.center.size
        self.radius = float(radius)
        self.angles = (float(angles[0]), float(angles[1]))
        self.plane = (int(plane[0]), int(plane[1]))
        if self.radius <= 0:
            raise MeasureError("arc radius must be positive")
        if not self.angles[1] > self.angles[0] or self.angles[1] - self.angles[0] > 2 * math.pi:
            raise MeasureError("arc angles must satisfy a0 < a1 <= a0 + 2 pi")
        i, j = self.plane
        if i == j or not (0 <= i < self.dim and 0 <= j < self.dim):
            raise MeasureError(f"arc plane {self.plane} must name two distinct axes of R^{self.dim}")
        super().__init__(density)

    def _angle(self, u):
        return self.angles[0] + u[:, 0] * (self.angles[1] - self.angles[0])

    def phi(self, u):
        a = self._angle(u)
        out = np.tile(self.center, (len(u), 1))
        i, j = self.plane
        out[:, i] += self.radius * np.cos(a)
        out[:, j] += self.radius * np.sin(a)
        return out

    def jacobian(self, u):
        a = self._angle(u)
        span = self.angles[1] - self.angles[0]
        J = np.zeros((len(u), self.dim, 1))
        i, j = self.plane
        J[:, i, 0] = -self.radius * np.sin(a) * span
        J[:, j, 0] = self.radius * np.cos(a) * span
        return J

    def locate(self, points):
        i, j = self.plane
        a = np.arctan2(points[:, j] - self.center[j], points[:, i] - self.center[i])
        a0 = self.angles[0]
        a = a0 + np.mod(a - a0, 2 * math.pi)
        span = self.angles[1] - self.angles[0]
        u = (a - a0) / span
        # points past the end of a partial arc: pick the nearer endpoint
        past = u > 1.0
        wrap = (a - 2 * math.pi - a0) / span
        u = np.where(past & (np.abs(wrap) < np.abs(u - 1.0)), wrap, u)
        return u[:, None]

    def normal(self, points):
        """Outward unit normal of the full circle, in the arc's plane."""
        diff = np.zeros_like(points)
        i, j = self.plane
        diff[:, i] = points[:, i] - self.center[i]
        diff[:, j] = points[:, j] - self.center[j]
        return diff / np.linalg.norm(diff, axis=1, keepdims=True)

    def analytic_mass(self):
        return self.radius * (self.angles[1] - self.angles[0]) if self.density is None else None

    def config(self):
        return self._density_config(
            {
                "type": "patch",
                "shape": "arc",
                "center": self.center.tolist(),
                "radius": self.radius,
                "angles": list(self.angles),
                "plane": list(self.plane),
            }
        )


class Graph(RectifiablePatch):
    """Graph {x_a = s, x_b = h(s)} for s in [lo, hi], other coordinates fixed at ``base``."""

    shape = "graph"
    k = 1

    def __init__(self, height, interval, axes=(0, 1), base=None, dim=2, density=None):
        if height.dim != 1:
            raise DimensionError("graph height must be a field on R^1")
        self.height = height
        self.interval = (float(interval[0]), float(interval[1]))
        if not self.interval[1] > self.interval[0]:
            raise MeasureError("graph interval is empty")
        self.axes = (int(axes[0]), int(axes[1]))
        self.dim = int(dim) if base is None else len(base)
        self.base = np.zeros(self.dim) if base is None else np.array(base, dtype=float)
        super().__init__(density)

    def _s(self, u):
        lo, hi = self.interval
        return lo + u[:, :1] * (hi - lo)

    def phi(self, u):
        s = self._s(u)
        out = np.tile(self.base, (len(u), 1))
        a, b = self.axes
        out[:, a] = s[:, 0]
        out[:, b] = self.height.value(s)
        return out

    def jacobian(self, u):
        s = self._s(u)
        lo, hi = self.interval
        J = np.zeros((len(u), self.dim, 1))
        a, b = self.axes
        J[:, a, 0] = hi - lo
        J[:, b, 0] = self.height.grad(s)[:, 0] * (hi - lo)
        return J

    def locate(self, points):
        # vertical projection; exact for points on the graph
        lo, hi = self.interval
        return ((points[:, self.axes[0]] - lo) / (hi - lo))[:, None]

    def config(self):
        return self._density_config(
            {
                "type": "patch",
                "shape": "graph",
                "height": self.height.descriptor,
                "interval": list(self.interval),
                "axes": list(self.axes),
                "base": self.base.tolist(),
            }
        )


class PlanePatch(RectifiablePatch):
    """Affine patch origin + sum_i u_i vectors[i], u in [0,1]^k."""

    shape = "plane"

    def __init__(self, origin, vectors, density=None):
        self.origin = np.array(origin, dtype=float)
        self.dim = self.origin.size
        self.vectors = np.array(vectors, dtype=float).reshape(-1, self.dim)
        self.k = self.vectors.shape[0]
        super().__init__(density)

    def phi(self, u):
        return self.origin + u @ self.vectors

    def jacobian(self, u):
        return np.broadcast_to(self.vectors.T[None], (len(u), self.dim, self.k)).copy()

    def locate(self, points):
        sol, *_ = np.linalg.lstsq(self.vectors.T, (points - self.origin).T, rcond=None)
        return sol.T

    def analytic_mass(self):
        if self.density is not None:
            return None
        return float(np.sqrt(np.linalg.det(self.vectors @ self.vectors.T)))

    def config(self):
        return self._density_config(
            {"type": "patch", "shape": "plane", "origin": self.origin.tolist(), "vectors": self.vectors.tolist()}
        )


# ------------------------------------------------------------------ cantor


class Cantor(Component):
    """Two-piece self-similar Cantor construction on a segment of R^d.

    The segment is ``origin + t * e_axis`` for t in [0, length].  At every
    stage each surviving interval is split into two equal children:

    * ``classic``: children of relative length ``ratio``; every stage-n
      interval carries mass ``mass / 2**n`` (the Cantor measure, singular
      with respect to Lebesgue).
    * ``fat``: the open middle gap of length ``length * gap_base**-j`` is
      removed at stage j; the measure is Lebesgue measure restricted to the
      limit set, so stage-n interval masses are the interval lengths.  With
      ``gap_base = 4`` the limit mass is ``length / 2``.
    """

    kind = "cantor"
    default_resolution = 12

    def __init__(self, variant="fat", origin=None, axis=0, length=1.0, ratio=1.0 / 3.0, gap_base=4.0,
                 mass=1.0, depth=12, dim=None):
        if variant not in ("classic", "fat"):
            raise MeasureError(f"unknown cantor variant {variant!r}")
        self.variant = variant
        self.dim = int(dim) if origin is None else len(origin)
        self.origin = np.zeros(self.dim) if origin is None else np.array(origin, dtype=float)
        self.axis = int(axis)
        if not 0 <= self.axis < self.dim:
            raise MeasureError("cantor axis out of range")
        self.length = float(length)
        self.ratio = float(ratio)
        self.gap_base = float(gap_base)
        self.mass = float(mass)
        self.default_resolution = int(depth)
        if self.length <= 0:
            raise MeasureError("cantor length must be positive")
        if variant == "classic" and not 0.0 < self.ratio < 0.5:
            raise MeasureError("classic cantor ratio must lie in (0, 1/2)")
        if variant == "classic" and self.mass <= 0:
            raise MeasureError("classic cantor mass must be positive")
        if variant == "fat" and not self.gap_base > 3.0:
            raise MeasureError("fat cantor needs gap_base > 3 for positive limit mass")

    def child_length(self, stage, parent_length):
        """Length of the stage-``stage`` children of an interval of length ``parent_length``."""
        if self.variant == "classic":
            return self.ratio * parent_length
        gap = self.length * self.gap_base ** (-stage)
        if gap >= parent_length:
            raise MeasureError(f"fat cantor gap at stage {stage} swallows the interval")
        return 0.5 * (parent_length - gap)

    def intervals(self, depth):
        """Left endpoints (array) and common length of the stage-``depth`` intervals, in t."""
        lefts = np.zeros(1)
        ell = self.length
        for j in range(1, int(depth) + 1):
            c = self.child_length(j, ell)
            lefts = np.stack([lefts, lefts + ell - c], axis=1).ravel()
            ell = c
        return lefts, ell

    def interval_mass(self, depth):
        _, ell = self.intervals(depth)
        return self.mass * 0.5**depth if self.variant == "classic" else ell

    def stage_mass(self, depth):
        """Closed-form total mass of the stage-``depth`` rule."""
        if self.variant == "classic":
            return self.mass
        b = self.gap_base
        removed = (1.0 - (2.0 / b) ** depth) / (b - 2.0)
        return self.length * (1.0 - removed)

    def analytic_mass(self):
        if self.variant == "classic":
            return self.mass
        return self.length * (self.gap_base - 3.0) / (self.gap_base - 2.0)

    def embed(self, t):
        pts = np.tile(self.origin, (len(t), 1))
        pts[:, self.axis] += t
        return pts

    def nodes_weights(self, resolution):
        depth = int(resolution)
        if depth < 0:
            raise MeasureError("cantor depth must be non-negative")
        lefts, ell = self.intervals(depth)
        nodes = self.embed(lefts + 0.5 * ell)
        return nodes, np.full(len(lefts), self.interval_mass(depth))

    def contains(self, points, tol=MEMBERSHIP_TOL, depth=None):
        pts = np.atleast_2d(points)
        off = np.delete(pts - self.origin, self.axis, axis=1)
        on_line = np.all(np.abs(off) <= tol, axis=1)
        t = pts[:, self.axis] - self.origin[self.axis]
        lefts, ell = self.intervals(self.default_resolution if depth is None else depth)
        idx = np.clip(np.searchsorted(lefts, t, side="right") - 1, 0, len(lefts) - 1)
        inside = (t >= lefts[idx] - tol) & (t <= lefts[idx] + ell + tol)
        return on_line & inside

    def bounding_box(self):
        lo = self.origin.copy()
        hi = self.origin.copy()
        hi[self.axis] += self.length
        return np.stack([lo, hi], axis=1)

    @property
    def label(self):
        return f"cantor:{self.variant}"

    def config(self):
        out = {
            "type": "cantor",
            "variant": self.variant,
            "origin": self.origin.tolist(),
            "axis": self.axis,
            "length": self.length,
            "depth": self.default_resolution,
        }
        if self.variant == "classic":
            out.update(ratio=self.ratio, mass=self.mass)
        else:
            out["gap_base"] = self.gap_base
        return out


def fat_cantor_stage_mass_exact(depth, gap_base=4, length=1):
    """Exact rational stage mass of the fat construction (independent of floating point)."""
    ell = Fraction(length)
    for j in range(1, depth + 1):
        ell = (ell - Fraction(length) / Fraction(gap_base) ** j) / 2
    return ell * 2**depth


# ------------------------------------------------------------------- atoms


class Atoms(Component):
    kind = "atoms"
    default_resolution = 0

    def __init__(self, points, masses):
        self.points = np.array(points, dtype=float)
        if self.points.ndim != 2:
            raise MeasureError("atoms need a list of points")
        self.masses = np.array(masses, dtype=float)
        if self.masses.shape != (len(self.points),):
            raise MeasureError("atoms need one mass per point")
        if np.any(self.masses <= 0):
            raise MeasureError("atom masses must be positive")
        self.dim = self.points.shape[1]

    def nodes_weights(self, resolution):
        return self.points.copy(), self.masses.copy()

    def contains(self, points, tol=MEMBERSHIP_TOL):
        pts = np.atleast_2d(points)
        dist = np.linalg.norm(pts[:, None, :] - self.points[None, :, :], axis=2)
        return np.any(dist <= tol, axis=1)

    def analytic_mass(self):
        return float(self.masses.sum())

    def bounding_box(self):
        return np.stack([self.points.min(axis=0), self.points.max(axis=0)], axis=1)

    def config(self):
        return {"type": "atoms", "points": self.points.tolist(), "masses": self.masses.tolist()}


# ------------------------------------------------------------ measure & rule


@dataclass(frozen=True, eq=False)
class Measure:
    """Finite positive mixture ``sum_i weight_i * component_i`` on R^dim."""

    dim: int
    components: tuple
    name: str = "measure"
    bundle_override: tuple = ()

    def __post_init__(self):
        comps = tuple((float(w), c) for w, c in self.components)
        if not comps:
            raise MeasureError("a measure needs at least one component")
        for i, (w, c) in enumerate(comps):
            if not (w > 0 and math.isfinite(w)):
                raise MeasureError(f"component {i}: weight must be positive and finite, got {w}")
            if c.dim != self.dim:
                raise DimensionError(f"component {i} lives in R^{c.dim}, measure in R^{self.dim}")
        object.__setattr__(self, "components", comps)

    def resolve(self, resolution=None):
        """Normalize a resolution spec to one integer per component.

        ``None`` uses each component's default; an int sets the grid size of
        lebesgue/patch components (Cantor depths keep their defaults); a
        sequence gives one value per component; a dict may carry ``grid`` and
        ``depth`` entries.
        """
        out = []
        for i, (_, c) in enumerate(self.components):
            r = c.default_resolution
            if isinstance(resolution, (list, tuple)):
                if len(resolution) != len(self.components):
                    raise ValueError("resolution list length differs from the component count")
                r = resolution[i]
            elif isinstance(resolution, dict):
                key = "depth" if isinstance(c, Cantor) else "grid"
                r = resolution.get(key, r)
            elif resolution is not None and not isinstance(c, (Cantor, Atoms)):
                r = resolution
            r = int(r)
            if r <= 0 and not isinstance(c, (Atoms, Cantor)):
                raise ValueError(f"component {i}: resolution must be positive")
            out.append(r)
        return tuple(out)

    def refine(self, resolution, factor):
        """Grid sizes times ``factor``; Cantor depths plus log2(factor)."""
        res = self.resolve(resolution)
        out = []
        for r, (_, c) in zip(res, self.components):
            if isinstance(c, Cantor):
                out.append(r + int(round(math.log2(factor))))
            elif isinstance(c, Atoms):
                out.append(r)
            else:
                out.append(max(1, int(round(r * factor))))
        return tuple(out)

    def total_mass(self, resolution=None):
        return quadrature(self, resolution).mass

    def scaled(self, c):
        return Measure(self.dim, tuple((w * c, comp) for w, comp in self.components), self.name, self.bundle_override)

    def config(self):
        out = {
            "dim": self.dim,
            "name": self.name,
            "components": [dict(comp.config(), weight=w) for w, comp in self.components],
        }
        if self.bundle_override:
            out["bundle_override"] = [{"component": i, "basis": b} for i, b in self.bundle_override]
        return out


@dataclass(frozen=True, eq=False)
class QuadratureRule:
    nodes: np.ndarray
    weights: np.ndarray
    component: np.ndarray
    resolution: tuple
    descriptor: dict = field(default_factory=dict)

    @property
    def mass(self):
        return math.fsum(self.weights)

    def __len__(self):
        return len(self.weights)


_RULE_CACHE = {}


def quadrature(mu, resolution=None):
    """Concatenated per-component rules (weights include the mixture weights)."""
    res = mu.resolve(resolution)
    key = (id(mu), res)
    hit = _RULE_CACHE.get(key)
    if hit is not None and hit[0] is mu:
        return hit[1]
    nodes, weights, owner = [], [], []
    for i, ((w, c), r) in enumerate(zip(mu.components, res)):
        x, wt = c.nodes_weights(r)
        nodes.append(x)
        weights.append(w * wt)
        owner.append(np.full(len(wt), i))
    descriptor = {
        "components": [
            {"index": i, "type": c.label, "resolution": r, "nodes": int(len(o))}
            for i, ((_, c), r, o) in enumerate(zip(mu.components, res, owner))
        ]
    }
    rule = QuadratureRule(np.concatenate(nodes), np.concatenate(weights), np.concatenate(owner), res, descriptor)
    for arr in (rule.nodes, rule.weights, rule.component):
        arr.setflags(write=False)
    if len(_RULE_CACHE) > 64:
        _RULE_CACHE.clear()
    _RULE_CACHE[key] = (mu, rule)
    return rule


def _samples(rule, g):
    if isinstance(g, ScalarField):
        vals = g.value(rule.nodes)
    elif callable(g):
        vals = np.asarray(g(rule.nodes), dtype=float)
    else:
        vals = np.asarray(g, dtype=float)
    if vals.shape[0] != len(rule):
        raise ValueError(f"{vals.shape[0]} samples for a rule with {len(rule)} nodes")
    bad = np.nonzero(~np.isfinite(vals.reshape(len(rule), -1)).all(axis=1))[0]
    if bad.size:
        raise EvaluationError(f"non-finite field value at node {int(bad[0])}", int(bad[0]))
    return vals


def integrate(rule, g):
    """sum_i w_i g(x_i); ``g`` is a field, a callable on node arrays, or node samples."""
    vals = _samples(rule, g)
    return math.fsum(rule.weights * vals)


def l2_norm(rule, g):
    """(int |g|^2 dmu)^(1/2) for scalar fields or (n, d) vector samples."""
    vals = _samples(rule, g)
    sq = vals**2 if vals.ndim == 1 else np.sum(vals**2, axis=1)
    return math.sqrt(math.fsum(rule.weights * sq))


def membership(mu, points, tol=MEMBERSHIP_TOL, resolution=None):
    """Boolean matrix (n_points, n_components) of component membership."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    res = mu.resolve(resolution)
    cols = []
    for (_, c), r in zip(mu.components, res):
        if isinstance(c, Cantor):
            cols.append(c.contains(pts, tol, depth=r))
        else:
            cols.append(c.contains(pts, tol))
    return np.stack(cols, axis=1)


# ------------------------------------------------------------------- config

_COMMON = {"type", "weight"}
_COMPONENT_KEYS = {
    "lebesgue": {"box", "density"},
    "cantor": {"variant", "origin", "axis", "length", "ratio", "gap_base", "mass", "depth"},
    "atoms": {"points", "masses"},
}
_PATCH_KEYS = {
    "segment": {"start", "end"},
    "arc": {"center", "radius", "angles", "plane"},
    "graph": {"height", "interval", "axes", "base"},
    "plane": {"origin", "vectors"},
}


def component_from_config(doc, dim, path="$"):
    if not isinstance(doc, dict):
        raise ConfigError("component must be an object", path)
    kind = doc.get("type")
    if kind == "patch":
        shape = doc.get("shape")
        if shape not in _PATCH_KEYS:
            raise ConfigError(f"unknown patch shape {shape!r}", path + ".shape")
        allowed = _COMMON | {"shape", "density"} | _PATCH_KEYS[shape]
    elif kind in _COMPONENT_KEYS:
        allowed = _COMMON | _COMPONENT_KEYS[kind]
    else:
        raise ConfigError(f"unknown component type {kind!r}", path + ".type")
    unknown = set(doc) - allowed
    if unknown:
        raise ConfigError(f"unknown keys {sorted(unknown)}", path)
    density = field_from_config(doc["density"], path + ".density") if "density" in doc else None
    try:
        if kind == "lebesgue":
            return Lebesgue(doc["box"], density)
        if kind == "cantor":
            kw = {k: doc[k] for k in ("variant", "origin", "axis", "length", "ratio", "gap_base", "mass", "depth") if k in doc}
            return Cantor(dim=dim, **kw)
        if kind == "atoms":
            return Atoms(doc["points"], doc["masses"])
        shape = doc["shape"]
        if shape == "segment":
            return Segment(doc["start"], doc["end"], density)
        if shape == "arc":
            return Arc(doc["center"], doc["radius"], doc["angles"], doc.get("plane", (0, 1)), density)
        if shape == "graph":
            height = field_from_config(doc["height"], path + ".height")
            return Graph(height, doc["interval"], doc.get("axes", (0, 1)), doc.get("base"), dim, density)
        return PlanePatch(doc["origin"], doc["vectors"], density)
    except KeyError as exc:
        raise ConfigError(f"missing key {exc.args[0]!r}", path) from None
    except (MeasureError, DimensionError, ValueError, TypeError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc), path) from None


def measure_from_config(doc, path="$"):
    """Parse ``{"dim": d, "components": [...], "name"?: str, "bundle_override"?: [...]}``."""
    if not isinstance(doc, dict):
        raise ConfigError("measure config must be an object", path)
    unknown = set(doc) - {"dim", "components", "name", "bundle_override"}
    if unknown:
        raise ConfigError(f"unknown keys {sorted(unknown)}", path)
    if not isinstance(doc.get("dim"), int) or doc["dim"] <= 0:
        raise ConfigError("'dim' must be a positive integer", path + ".dim")
    comps = doc.get("components")
    if not isinstance(comps, list) or not comps:
        raise ConfigError("'components' must be a non-empty list", path + ".components")
    parsed = []
    for i, c in enumerate(comps):
        cpath = f"{path}.components[{i}]"
        comp = component_from_config(c, doc["dim"], cpath)
        if comp.dim != doc["dim"]:
            raise ConfigError(f"component lives in R^{comp.dim}", cpath)
        parsed.append((c.get("weight", 1.0), comp))
    overrides = []
    for j, o in enumerate(doc.get("bundle_override", [])):
        opath = f"{path}.bundle_override[{j}]"
        if set(o) - {"component", "basis"}:
            raise ConfigError("unknown keys in bundle override", opath)
        overrides.append((int(o["component"]), [list(map(float, b)) for b in o.get("basis", [])]))
    try:
        return Measure(doc["dim"], tuple(parsed), doc.get("name", "measure"), tuple(overrides))
    except (MeasureError, DimensionError) as exc:
        raise ConfigError(str(exc), path) from None
