"""Scalar fields on R^d with analytic value and gradient oracles.

Every field evaluates on a single point of shape (d,) or on a stack of
points of shape (n, d).  Gradients are always analytic; finite differences
only appear in the verification helpers at the bottom of the module.

Each field carries a JSON-able ``descriptor`` so that experiments and
certificates can be replayed from disk via :func:`field_from_config`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DimensionError

# Quintic smoothstep S(t) = 6t^5 - 15t^4 + 10t^3 on [0, 1]; S, S', S'' vanish
# appropriately at both ends.  max S' = S'(1/2) = 15/8.
SMOOTHSTEP_MAX_SLOPE = 15.0 / 8.0


def smoothstep(t):
    t = np.clip(t, 0.0, 1.0)
    return t * t * t * (t * (6.0 * t - 15.0) + 10.0)


def smoothstep_deriv(t):
    inside = (t > 0.0) & (t < 1.0)
    tc = np.clip(t, 0.0, 1.0)
    return np.where(inside, 30.0 * tc * tc * (1.0 - tc) * (1.0 - tc), 0.0)


def _as_points(x, dim):
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    pts = x.reshape(1, -1) if single else x
    if pts.shape[-1] != dim:
        raise DimensionError(f"points of dimension {pts.shape[-1]} passed to a field on R^{dim}")
    return pts, single


def _box(box, dim=None):
    arr = np.array(box, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise ValueError(f"box must have shape (d, 2), got {arr.shape}")
    if dim is not None and arr.shape[0] != dim:
        raise DimensionError(f"box of dimension {arr.shape[0]} in R^{dim}")
    if np.any(arr[:, 0] > arr[:, 1]):
        raise ValueError("box has lower bound above upper bound")
    return arr


def _box_abs_max(box):
    return np.max(np.abs(box), axis=1)


class ScalarField:
    """Base class.  Subclasses implement ``_value`` and ``_grad`` on (n, d) arrays."""

    dim: int
    lipschitz: float = math.inf
    support: np.ndarray | None = None
    descriptor: dict

    def _value(self, pts):
        raise NotImplementedError

    def _grad(self, pts):
        raise NotImplementedError

    def _value_grad(self, pts):
        # composites call this to share work between value and gradient
        return self._value(pts), self._grad(pts)

    def value(self, x):
        pts, single = _as_points(x, self.dim)
        out = self._value(pts)
        return float(out[0]) if single else out

    def grad(self, x):
        pts, single = _as_points(x, self.dim)
        out = self._grad(pts)
        return out[0] if single else out

    __call__ = value

    def sup_on(self, box):
        """Upper bound of |f| on ``box``."""
        return math.inf

    def lipschitz_on(self, box):
        """Upper bound of |grad f| on ``box``."""
        return self.lipschitz

    def __add__(self, other):
        return combine(self, other, "add")

    def __sub__(self, other):
        return combine(self, other, "sub")

    def __mul__(self, other):
        if isinstance(other, ScalarField):
            return combine(self, other, "mul")
        return combine(self, None, ("scale", float(other)))

    __rmul__ = __mul__

    def __neg__(self):
        return combine(self, None, ("scale", -1.0))

    @property
    def name(self):
        return _describe(self.descriptor)


def _describe(desc):
    kind = desc["type"]
    if kind in ("add", "sub", "mul"):
        sym = {"add": "+", "sub": "-", "mul": "*"}[kind]
        return f"({_describe(desc['left'])}{sym}{_describe(desc['right'])})"
    if kind == "scale":
        return f"{desc['factor']:g}*{_describe(desc['field'])}"
    if kind == "coordinate":
        return f"x{desc['index']}"
    if kind == "constant":
        return f"{desc['value']:g}"
    return kind


class Constant(ScalarField):
    def __init__(self, dim, value=0.0):
        self.dim = int(dim)
        self.c = float(value)
        self.lipschitz = 0.0
        self.descriptor = {"type": "constant", "dim": self.dim, "value": self.c}

    def _value(self, pts):
        return np.full(len(pts), self.c)

    def _grad(self, pts):
        return np.zeros_like(pts)

    def sup_on(self, box):
        return abs(self.c)

    def lipschitz_on(self, box):
        return 0.0


class Coordinate(ScalarField):
    """f(x) = x[index]."""

    def __init__(self, dim, index):
        self.dim = int(dim)
        self.index = int(index)
        if not 0 <= self.index < self.dim:
            raise DimensionError(f"coordinate index {index} out of range for R^{dim}")
        self.lipschitz = 1.0
        self.descriptor = {"type": "coordinate", "dim": self.dim, "index": self.index}

    def _value(self, pts):
        return pts[:, self.index].copy()

    def _grad(self, pts):
        g = np.zeros_like(pts)
        g[:, self.index] = 1.0
        return g

    def sup_on(self, box):
        return float(_box_abs_max(box)[self.index])

    def lipschitz_on(self, box):
        return 1.0


class Polynomial(ScalarField):
    """Sum of monomials ``coef * prod_j x_j**e_j``; ``terms`` is a list of (coef, exponents)."""

    def __init__(self, dim, terms):
        self.dim = int(dim)
        self.terms = []
        for coef, exps in terms:
            exps = tuple(int(e) for e in exps)
            if len(exps) != self.dim or min(exps, default=0) < 0:
                raise ValueError(f"bad exponent tuple {exps} for R^{dim}")
            self.terms.append((float(coef), exps))
        degree = max((sum(e) for c, e in self.terms if c != 0.0), default=0)
        self.lipschitz = math.inf if degree > 1 else float(
            np.linalg.norm(self._linear_part()) if degree == 1 else 0.0
        )
        self.descriptor = {
            "type": "polynomial",
            "dim": self.dim,
            "terms": [[c, list(e)] for c, e in self.terms],
        }

    def _linear_part(self):
        g = np.zeros(self.dim)
        for c, e in self.terms:
            if sum(e) == 1:
                g[e.index(1)] += c
        return g

    def _powers(self, pts):
        top = max((max(e, default=0) for _, e in self.terms), default=0)
        pw = [np.ones_like(pts)]
        for _ in range(top):
            pw.append(pw[-1] * pts)
        return pw

    @staticmethod
    def _monomial(pw, exps, n):
        out = np.ones(n)
        for i, e in enumerate(exps):
            if e:
                out = out * pw[e][:, i]
        return out

    def _value(self, pts):
        return self._value_grad(pts)[0]

    def _grad(self, pts):
        return self._value_grad(pts)[1]

    def _value_grad(self, pts):
        n = len(pts)
        pw = self._powers(pts)
        val = np.zeros(n)
        g = np.zeros_like(pts)
        for c, e in self.terms:
            val += c * self._monomial(pw, e, n)
            for i, ei in enumerate(e):
                if ei:
                    e2 = list(e)
                    e2[i] -= 1
                    g[:, i] += c * ei * self._monomial(pw, e2, n)
        return val, g

    def sup_on(self, box):
        m = _box_abs_max(box)
        return float(sum(abs(c) * np.prod(m ** np.array(e)) for c, e in self.terms))

    def lipschitz_on(self, box):
        m = _box_abs_max(box)
        g = np.zeros(self.dim)
        for c, e in self.terms:
            for i, ei in enumerate(e):
                if ei:
                    e2 = np.array(e)
                    e2[i] -= 1
                    g[i] += abs(c) * ei * np.prod(m**e2)
        return float(np.linalg.norm(g))


class Gaussian(ScalarField):
    """amplitude * exp(-|x - center|^2 / (2 width^2))."""

    def __init__(self, center, width=1.0, amplitude=1.0):
        self.center = np.array(center, dtype=float)
        self.dim = self.center.size
        self.width = float(width)
        self.amplitude = float(amplitude)
        if self.width <= 0:
            raise ValueError("gaussian width must be positive")
        self.lipschitz = abs(self.amplitude) / self.width * math.exp(-0.5)
        self.descriptor = {
            "type": "gaussian",
            "center": self.center.tolist(),
            "width": self.width,
            "amplitude": self.amplitude,
        }

    def _value(self, pts):
        r2 = np.sum((pts - self.center) ** 2, axis=1)
        return self.amplitude * np.exp(-0.5 * r2 / self.width**2)

    def _grad(self, pts):
        return self._value_grad(pts)[1]

    def _value_grad(self, pts):
        v = self._value(pts)
        return v, -(pts - self.center) / self.width**2 * v[:, None]

    def sup_on(self, box):
        return abs(self.amplitude)


class Bump(ScalarField):
    """Tensor-product smoothstep cutoff: 1 on ``inner``, 0 outside ``outer``.

    Along axis i the profile rises as S((x - a_out)/(a_in - a_out)) on the
    lower shell and falls as 1 - S((x - b_in)/(b_out - b_in)) on the upper
    shell, with S the quintic smoothstep.
    """

    def __init__(self, inner, outer):
        self.inner = _box(inner)
        self.outer = _box(outer, self.inner.shape[0])
        self.dim = self.inner.shape[0]
        if np.any(self.outer[:, 0] >= self.inner[:, 0]) or np.any(self.outer[:, 1] <= self.inner[:, 1]):
            raise ValueError("inner box must lie strictly inside the outer box")
        self.support = self.outer
        self._lo_w = self.inner[:, 0] - self.outer[:, 0]
        self._hi_w = self.outer[:, 1] - self.inner[:, 1]
        widths = np.minimum(self._lo_w, self._hi_w)
        self.lipschitz = float(np.linalg.norm(SMOOTHSTEP_MAX_SLOPE / widths))
        self.descriptor = {"type": "bump", "inner": self.inner.tolist(), "outer": self.outer.tolist()}

    def _profiles(self, pts):
        # the falling shell is the mirrored rising one: 1 - S(u) = S(1 - u)
        upper = pts > self.inner[:, 1]
        t = np.where(upper, (self.outer[:, 1] - pts) / self._hi_w, (pts - self.outer[:, 0]) / self._lo_w)
        t = np.clip(t, 0.0, 1.0)
        val = t * t * t * (t * (6.0 * t - 15.0) + 10.0)
        slope = 30.0 * t * t * (1.0 - t) * (1.0 - t)
        der = slope * np.where(upper, -1.0 / self._hi_w, 1.0 / self._lo_w)
        return val, der

    def _value(self, pts):
        val, _ = self._profiles(pts)
        return np.prod(val, axis=1)

    def _grad(self, pts):
        return self._value_grad(pts)[1]

    def _value_grad(self, pts):
        val, der = self._profiles(pts)
        g = np.empty_like(pts)
        for i in range(self.dim):
            others = np.prod(np.delete(val, i, axis=1), axis=1)
            g[:, i] = der[:, i] * others
        return np.prod(val, axis=1), g

    def sup_on(self, box):
        return 1.0


def bump_cutoff(box_inner, box_outer):
    """Smooth cutoff equal to 1 on ``box_inner`` and 0 outside ``box_outer``."""
    return Bump(box_inner, box_outer)


class Tent(ScalarField):
    """Radial smoothed tent ``height * (1 - S(|x - center| / radius))``, zero outside the ball.

    Using the quintic smoothstep S makes the profile C^1 at the apex and at
    the rim, unlike the piecewise-linear tent.
    """

    def __init__(self, center, radius=1.0, height=1.0):
        self.center = np.array(center, dtype=float)
        self.dim = self.center.size
        self.radius = float(radius)
        self.height = float(height)
        if self.radius <= 0:
            raise ValueError("tent radius must be positive")
        self.support = np.stack([self.center - self.radius, self.center + self.radius], axis=1)
        self.lipschitz = abs(self.height) * SMOOTHSTEP_MAX_SLOPE / self.radius
        self.descriptor = {
            "type": "tent",
            "center": self.center.tolist(),
            "radius": self.radius,
            "height": self.height,
        }

    def _value(self, pts):
        r = np.linalg.norm(pts - self.center, axis=1) / self.radius
        return self.height * (1.0 - smoothstep(r))

    def _grad(self, pts):
        diff = pts - self.center
        rr = np.linalg.norm(diff, axis=1)
        r = rr / self.radius
        safe = np.where(rr > 0, rr, 1.0)
        coef = -self.height * smoothstep_deriv(r) / self.radius / safe
        return coef[:, None] * diff

    def sup_on(self, box):
        return abs(self.height)


# ---------------------------------------------------------------- combinators


def _intersect(a, b):
    if a is None:
        return b
    if b is None:
        return a
    lo = np.maximum(a[:, 0], b[:, 0])
    hi = np.maximum(np.minimum(a[:, 1], b[:, 1]), lo)
    return np.stack([lo, hi], axis=1)


def _hull(a, b):
    if a is None or b is None:
        return None
    return np.stack([np.minimum(a[:, 0], b[:, 0]), np.maximum(a[:, 1], b[:, 1])], axis=1)


class _Sum(ScalarField):
    def __init__(self, f, g, sign):
        self.f, self.g, self.sign = f, g, sign
        self.dim = f.dim
        self.support = _hull(f.support, g.support)
        self.lipschitz = f.lipschitz + g.lipschitz
        self.descriptor = {
            "type": "add" if sign > 0 else "sub",
            "left": f.descriptor,
            "right": g.descriptor,
        }

    def _value(self, pts):
        return self.f._value(pts) + self.sign * self.g._value(pts)

    def _grad(self, pts):
        return self.f._grad(pts) + self.sign * self.g._grad(pts)

    def _value_grad(self, pts):
        fv, fg = self.f._value_grad(pts)
        gv, gg = self.g._value_grad(pts)
        return fv + self.sign * gv, fg + self.sign * gg

    def sup_on(self, box):
        return self.f.sup_on(box) + self.g.sup_on(box)

    def lipschitz_on(self, box):
        return self.f.lipschitz_on(box) + self.g.lipschitz_on(box)


class _Scale(ScalarField):
    def __init__(self, f, a):
        self.f, self.a = f, float(a)
        self.dim = f.dim
        self.support = f.support
        self.lipschitz = abs(self.a) * f.lipschitz if self.a else 0.0
        self.descriptor = {"type": "scale", "factor": self.a, "field": f.descriptor}

    def _value(self, pts):
        return self.a * self.f._value(pts)

    def _grad(self, pts):
        return self.a * self.f._grad(pts)

    def _value_grad(self, pts):
        v, g = self.f._value_grad(pts)
        return self.a * v, self.a * g

    def sup_on(self, box):
        return abs(self.a) * self.f.sup_on(box) if self.a else 0.0

    def lipschitz_on(self, box):
        return abs(self.a) * self.f.lipschitz_on(box) if self.a else 0.0


class _Product(ScalarField):
    def __init__(self, f, g):
        self.f, self.g = f, g
        self.dim = f.dim
        self.support = _intersect(f.support, g.support)
        if self.support is not None:
            self.lipschitz = self.lipschitz_on(self.support)
        else:
            self.lipschitz = math.inf
        self.descriptor = {"type": "mul", "left": f.descriptor, "right": g.descriptor}

    def _value(self, pts):
        return self.f._value(pts) * self.g._value(pts)

    def _grad(self, pts):
        return self._value_grad(pts)[1]

    def _value_grad(self, pts):
        fv, fg = self.f._value_grad(pts)
        gv, gg = self.g._value_grad(pts)
        return fv * gv, fg * gv[:, None] + gg * fv[:, None]

    def _restrict(self, box):
        return box if self.support is None else _intersect(box, self.support)

    def sup_on(self, box):
        box = self._restrict(box)
        return self.f.sup_on(box) * self.g.sup_on(box)

    def lipschitz_on(self, box):
        box = self._restrict(box)
        terms = []
        for a, b in ((self.f, self.g), (self.g, self.f)):
            la, sb = a.lipschitz_on(box), b.sup_on(box)
            terms.append(0.0 if la == 0.0 or sb == 0.0 else la * sb)
        return float(sum(terms))


def combine(f, g, op):
    """Combine fields: ``op`` is "add", "sub", "mul" or ("scale", a) (``g`` ignored)."""
    if isinstance(op, tuple):
        kind, a = op
        if kind != "scale":
            raise ValueError(f"unknown combinator {op!r}")
        return _Scale(f, a)
    if op == "scale":
        raise ValueError("scale needs a factor: use ('scale', a)")
    if f.dim != g.dim:
        raise DimensionError(f"cannot combine fields on R^{f.dim} and R^{g.dim}")
    if op == "add":
        return _Sum(f, g, 1.0)
    if op == "sub":
        return _Sum(f, g, -1.0)
    if op == "mul":
        return _Product(f, g)
    raise ValueError(f"unknown combinator {op!r}")


def cut_off(f, inner, outer):
    """``f`` multiplied by the bump cutoff for (inner, outer)."""
    return combine(f, Bump(inner, outer), "mul")


# ----------------------------------------------------------------- norms & lip


@dataclass(frozen=True)
class NormPlugin:
    """An l^p norm on R^d, p in {1, 2, inf}, together with its dual norm."""

    p: float = 2.0

    def __post_init__(self):
        if self.p not in (1.0, 2.0, math.inf):
            raise ValueError(f"unsupported norm p={self.p}")

    @property
    def q(self):
        return {1.0: math.inf, 2.0: 2.0, math.inf: 1.0}[self.p]

    @staticmethod
    def _lp(v, p):
        return np.linalg.norm(np.asarray(v, dtype=float), ord=p, axis=-1)

    def norm(self, v):
        return self._lp(v, self.p)

    def dual_norm(self, v):
        return self._lp(v, self.q)

    @property
    def label(self):
        return "inf" if self.p == math.inf else str(int(self.p))

    @classmethod
    def parse(cls, p):
        if isinstance(p, str):
            p = math.inf if p.lower() in ("inf", "infinity") else float(p)
        return cls(float(p))


EUCLIDEAN = NormPlugin(2.0)


def lip(f, x, norm=EUCLIDEAN):
    """Local Lipschitz constant of a C^1 field w.r.t. the l^p distance.

    For C^1 fields the limsup of difference quotients equals the dual norm
    of the gradient.  Every point of R^d is an accumulation point, so no
    zero convention is applied anywhere (atoms included).
    """
    return norm.dual_norm(f.grad(x))


# ---------------------------------------------------------- verification aids


def finite_difference_gradient(f, x, h):
    """Central-difference gradient of ``f`` at the points ``x`` with step ``h``."""
    pts, single = _as_points(x, f.dim)
    g = np.empty_like(pts)
    for i in range(f.dim):
        e = np.zeros(f.dim)
        e[i] = h
        g[:, i] = (f._value(pts + e) - f._value(pts - e)) / (2.0 * h)
    return g[0] if single else g


def gradient_check(f, points, steps=(1e-3, 1e-4)):
    """Max |analytic - FD| gradient errors at each step size."""
    pts, _ = _as_points(points, f.dim)
    exact = f._grad(pts)
    return [float(np.max(np.linalg.norm(exact - finite_difference_gradient(f, pts, h), axis=1))) for h in steps]


# ------------------------------------------------------------------- catalog

FIELD_TYPES = {
    "constant": {"dim", "value"},
    "coordinate": {"dim", "index"},
    "polynomial": {"dim", "terms"},
    "gaussian": {"center", "width", "amplitude"},
    "bump": {"inner", "outer"},
    "tent": {"center", "radius", "height"},
    "add": {"left", "right"},
    "sub": {"left", "right"},
    "mul": {"left", "right"},
    "scale": {"factor", "field"},
    "cutoff": {"field", "inner", "outer"},
}

# Fields defined in other modules register builders here (plateau, transversal).
EXTRA_BUILDERS = {}


def _check_keys(desc, allowed, path):
    unknown = set(desc) - allowed - {"type"}
    if unknown:
        raise ConfigError(f"unknown keys {sorted(unknown)}", path)


def field_from_config(desc, path="$"):
    """Build a field from its JSON descriptor; unknown keys are rejected."""
    if not isinstance(desc, dict) or "type" not in desc:
        raise ConfigError("field descriptor must be an object with a 'type'", path)
    kind = desc["type"]
    if kind in EXTRA_BUILDERS:
        return EXTRA_BUILDERS[kind](desc, path)
    if kind not in FIELD_TYPES:
        raise ConfigError(f"unknown field type {kind!r}", path)
    _check_keys(desc, FIELD_TYPES[kind], path)
    try:
        if kind == "constant":
            return Constant(desc["dim"], desc.get("value", 0.0))
        if kind == "coordinate":
            return Coordinate(desc["dim"], desc["index"])
        if kind == "polynomial":
            return Polynomial(desc["dim"], desc["terms"])
        if kind == "gaussian":
            return Gaussian(desc["center"], desc.get("width", 1.0), desc.get("amplitude", 1.0))
        if kind == "bump":
            return Bump(desc["inner"], desc["outer"])
        if kind == "tent":
            return Tent(desc["center"], desc.get("radius", 1.0), desc.get("height", 1.0))
        if kind in ("add", "sub", "mul"):
            left = field_from_config(desc["left"], f"{path}.left")
            right = field_from_config(desc["right"], f"{path}.right")
            return combine(left, right, kind)
        if kind == "scale":
            return combine(field_from_config(desc["field"], f"{path}.field"), None, ("scale", desc["factor"]))
        if kind == "cutoff":
            return cut_off(field_from_config(desc["field"], f"{path}.field"), desc["inner"], desc["outer"])
    except KeyError as exc:
        raise ConfigError(f"missing key {exc.args[0]!r}", path) from None
    except (ValueError, TypeError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc), path) from None
    raise AssertionError(kind)
