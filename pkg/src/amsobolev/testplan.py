"""Finitely supported test plans and the checks built on them.

A :class:`CurveEnsemble` is a finite list of weighted curves with analytic
velocities, a uniform midpoint time grid on [0, 1], and a *declared*
compression constant.  The declaration is never trusted: it is falsified
empirically by :func:`check_compression` through binned density ratios.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .bundle import assign_bundle
from .errors import CertificateError, ConfigError
from .measure import MEMBERSHIP_TOL, Atoms, Measure, RectifiablePatch, membership, quadrature

COMPRESSION_SLACK = 0.1
TANGENCY_TOL = 1e-9
WUG_PASS_FRACTION = 0.99
WUG_VIOLATION_TOL = 1e-9
DEFAULT_BINS = (4, 8, 16)
DEFAULT_TIMES = (0.0, 0.25, 0.5, 0.75, 1.0)


# ------------------------------------------------------------------ curves


class Curve:
    dim: int

    def position(self, t):
        raise NotImplementedError

    def velocity(self, t):
        raise NotImplementedError

    def config(self):
        raise NotImplementedError


class LinearCurve(Curve):
    """t -> start + t * velocity (a constant-speed segment; stationary when velocity = 0)."""

    def __init__(self, start, velocity):
        self.start = np.array(start, dtype=float)
        self.vel = np.array(velocity, dtype=float)
        self.dim = self.start.size

    def position(self, t):
        return self.start + np.asarray(t, dtype=float)[:, None] * self.vel

    def velocity(self, t):
        return np.tile(self.vel, (len(t), 1))

    def config(self):
        return {"type": "linear", "start": self.start.tolist(), "velocity": self.vel.tolist()}


class PatchPath(Curve):
    """t -> phi(u0 + t (u1 - u0)) inside a rectifiable patch."""

    def __init__(self, patch, u0, u1):
        self.patch = patch
        self.u0 = np.array(u0, dtype=float).reshape(patch.k)
        self.u1 = np.array(u1, dtype=float).reshape(patch.k)
        self.dim = patch.dim

    def _u(self, t):
        return self.u0 + np.asarray(t, dtype=float)[:, None] * (self.u1 - self.u0)

    def position(self, t):
        return self.patch.phi(self._u(t))

    def velocity(self, t):
        return np.einsum("ndk,k->nd", self.patch.jacobian(self._u(t)), self.u1 - self.u0)

    def config(self):
        return {"type": "patch_path", "u0": self.u0.tolist(), "u1": self.u1.tolist()}


class Reparametrized(Curve):
    """t -> base(t**power); velocity by the chain rule."""

    def __init__(self, base, power=2.0):
        self.base = base
        self.power = float(power)
        if self.power < 1.0:
            raise ValueError("reparametrization power must be >= 1 to keep finite speed")
        self.dim = base.dim

    def position(self, t):
        return self.base.position(np.asarray(t, dtype=float) ** self.power)

    def velocity(self, t):
        t = np.asarray(t, dtype=float)
        return self.base.velocity(t**self.power) * (self.power * t ** (self.power - 1.0))[:, None]

    def config(self):
        return {"type": "reparametrized", "power": self.power, "base": self.base.config()}


# ---------------------------------------------------------------- ensemble


@dataclass(frozen=True, eq=False)
class CurveEnsemble:
    curves: tuple
    weights: np.ndarray
    comp: float
    note: str = ""
    n_times: int = 64
    descriptor: dict = field(default_factory=dict)

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if len(w) != len(self.curves) or not len(w):
            raise ValueError("one weight per curve, at least one curve")
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
            raise ValueError("ensemble weights must be non-negative and sum to 1")
        if not self.comp > 0:
            raise ValueError("declared compression constant must be positive")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "curves", tuple(self.curves))

    @property
    def dim(self):
        return self.curves[0].dim

    @property
    def times(self):
        return (np.arange(self.n_times) + 0.5) / self.n_times

    @property
    def name(self):
        return self.descriptor.get("type", "ensemble")

    def positions(self, t):
        """Array (n_curves, len(t), d)."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        return np.stack([c.position(t) for c in self.curves])

    def velocities(self, t):
        t = np.atleast_1d(np.asarray(t, dtype=float))
        return np.stack([c.velocity(t) for c in self.curves])

    def reparametrized(self, power=2.0):
        desc = {"type": "reparametrized", "power": power, "base": self.descriptor}
        return CurveEnsemble(
            tuple(Reparametrized(c, power) for c in self.curves), self.weights, self.comp, self.note, self.n_times, desc
        )


def kinetic_energy(plan):
    """sum_gamma w_gamma * (1/m) sum_t |gamma'_t|^2 on the midpoint time grid."""
    v = plan.velocities(plan.times)
    per_curve = np.mean(np.sum(v * v, axis=2), axis=1)
    return math.fsum(plan.weights * per_curve)


def endpoint_increment(f, plan):
    """int (f(gamma_1) - f(gamma_0)) dpi."""
    ends = plan.positions([0.0, 1.0])
    return math.fsum(plan.weights * (f.value(ends[:, 1]) - f.value(ends[:, 0])))


# ------------------------------------------------------------ compression


@dataclass
class CompressionReport:
    passed: bool
    declared: float
    max_ratio: float
    table: list
    witness: dict | None = None

    def to_dict(self):
        return {
            "passed": self.passed,
            "declared": self.declared,
            "max_ratio": self.max_ratio,
            "table": self.table,
            "witness": self.witness,
        }


def _bin_index(points, lo, hi, bins):
    extent = hi - lo
    nb = np.where(extent > 1e-12, bins, 1)
    rel = np.where(extent > 1e-12, (points - lo) / np.where(extent > 1e-12, extent, 1.0), 0.0)
    idx = np.clip(np.floor(rel * nb).astype(int), 0, nb - 1)
    shape = tuple(int(b) for b in nb)
    return np.ravel_multi_index(tuple(idx.T), shape), int(np.prod(shape))


def _measure_box(mu):
    boxes = np.stack([c.bounding_box() for _, c in mu.components])
    return boxes[:, :, 0].min(axis=0), boxes[:, :, 1].max(axis=0)


def check_compression(plan, mu, times=DEFAULT_TIMES, bins=DEFAULT_BINS, resolution=None,
                      tol=MEMBERSHIP_TOL, refine=8):
    """Falsify (e_t)_* pi <= Comp * mu through binned mass ratios.

    The measure side uses the quadrature refined ``refine`` times so that bin
    masses are resolved well below the declared slack.  PASS iff every curve
    stays on the support at every probe time and every binned ratio is at
    most Comp * (1 + 0.1).
    """
    fine = mu.refine(resolution, refine)
    rule = quadrature(mu, fine)
    lo, hi = _measure_box(mu)
    table, witness = [], None
    max_ratio = 0.0
    for t in times:
        pos = plan.positions([t])[:, 0, :]
        on = membership(mu, pos, tol, fine).any(axis=1)
        if witness is None and not on.all():
            i = int(np.nonzero(~on)[0][0])
            witness = {"reason": "curve leaves the support", "curve": i, "t": float(t),
                       "point": pos[i].tolist()}
        inside = np.all((pos >= lo - tol) & (pos <= hi + tol), axis=1)
        for nb in bins:
            fl_mu, total = _bin_index(rule.nodes, lo, hi, nb)
            mu_mass = np.bincount(fl_mu, weights=rule.weights, minlength=total)
            fl_pi, _ = _bin_index(pos[inside], lo, hi, nb)
            pi_mass = np.bincount(fl_pi, weights=plan.weights[inside], minlength=total)
            occupied = pi_mass > 0
            with np.errstate(divide="ignore"):
                ratios = np.where(mu_mass[occupied] > 0, pi_mass[occupied] / np.where(mu_mass[occupied] > 0, mu_mass[occupied], 1.0), np.inf)
            ratio = float(ratios.max()) if ratios.size else 0.0
            if not inside.all():
                ratio = math.inf
            table.append({"t": float(t), "bins": int(nb), "max_ratio": ratio})
            max_ratio = max(max_ratio, ratio)
            if witness is None and ratio > plan.comp * (1 + COMPRESSION_SLACK):
                witness = {"reason": "binned density ratio exceeds the declared constant",
                           "t": float(t), "bins": int(nb), "ratio": ratio}
    passed = witness is None
    return CompressionReport(passed, float(plan.comp), max_ratio, table, witness)


# -------------------------------------------------------------- tangency


@dataclass
class TangencyReport:
    passed: bool
    max_residual: float
    witness: dict | None

    def to_dict(self):
        return {"passed": self.passed, "max_residual": self.max_residual, "witness": self.witness}


def _pairs(plan):
    t = plan.times
    pos = plan.positions(t)
    vel = plan.velocities(t)
    n, m, d = pos.shape
    return t, pos.reshape(n * m, d), vel.reshape(n * m, d), n, m


def check_tangency(plan, mu, resolution=None, tol=TANGENCY_TOL):
    """Residual |v - pi_{V(mu, gamma_t)} v| at every (curve, time) pair."""
    bundle = assign_bundle(mu, resolution)
    t, pos, vel, n, m = _pairs(plan)
    resid = np.linalg.norm(vel - bundle.project_at(pos, vel), axis=1)
    excess = resid - tol * (1.0 + np.linalg.norm(vel, axis=1))
    k = int(np.argmax(excess))
    passed = bool(excess[k] <= 0.0)
    witness = None if passed else {"curve": k // m, "t": float(t[k % m]), "residual": float(resid[k])}
    return TangencyReport(passed, float(resid.max()), witness)


# ------------------------------------------------------- upper gradients


@dataclass
class WugReport:
    passed: bool
    fraction_ok: float
    max_violation: float
    n_pairs: int
    violations: list

    def to_dict(self):
        return {
            "passed": self.passed,
            "fraction_ok": self.fraction_ok,
            "max_violation": self.max_violation,
            "n_pairs": self.n_pairs,
            "violations": self.violations[:20],
        }


class NodeSamples:
    """Per-node samples of G, extended off the nodes by nearest-node interpolation."""

    def __init__(self, nodes, values):
        from scipy.spatial import cKDTree

        self.nodes = np.asarray(nodes, dtype=float)
        self.values = np.asarray(values, dtype=float)
        self._tree = cKDTree(self.nodes)

    def __call__(self, points):
        _, idx = self._tree.query(np.atleast_2d(points))
        return self.values[idx]


def am_gradient_norm(f, mu, resolution=None):
    """Callable x -> |pi_x grad f(x)| usable as an upper-gradient candidate."""
    bundle = assign_bundle(mu, resolution)

    def G(points):
        points = np.atleast_2d(points)
        return np.linalg.norm(bundle.project_at(points, f.grad(points)), axis=1)

    return G


def curve_derivative(f, plan):
    """(f o gamma)'_t = grad f(gamma_t) . gamma'_t at all pairs; shape (n_curves * m,)."""
    _, pos, vel, _, _ = _pairs(plan)
    return np.sum(f.grad(pos) * vel, axis=1)


def check_wug(f, G, plan):
    """Check |(f o gamma)'_t| <= G(gamma_t) |gamma'_t| at the quadrature pairs.

    PASS iff the inequality holds (up to round-off) at >= 99% of pairs and
    every violation is at most 1e-9.
    """
    t, pos, vel, n, m = _pairs(plan)
    lhs = np.abs(np.sum(f.grad(pos) * vel, axis=1))
    g = G(pos) if callable(G) else np.asarray(G, dtype=float)
    if np.any(g < 0):
        raise ValueError("upper gradient candidate must be non-negative")
    rhs = g * np.linalg.norm(vel, axis=1)
    excess = lhs - rhs
    ok = excess <= 1e-12 * (1.0 + rhs)
    bad = np.nonzero(~ok)[0]
    violations = [{"curve": int(k // m), "t": float(t[k % m]), "excess": float(excess[k])} for k in bad]
    frac = float(ok.mean())
    max_violation = float(max(excess.max(), 0.0))
    passed = frac >= WUG_PASS_FRACTION and max_violation <= WUG_VIOLATION_TOL
    return WugReport(passed, frac, max_violation, int(len(ok)), violations)


def chain_rule_residual(f, plan, mu, resolution=None):
    """max |(f o gamma)'_t - grad_AM f(gamma_t) . gamma'_t| over pairs."""
    bundle = assign_bundle(mu, resolution)
    _, pos, vel, _, _ = _pairs(plan)
    grad = f.grad(pos)
    am = bundle.project_at(pos, grad)
    return float(np.max(np.abs(np.sum((grad - am) * vel, axis=1))))


def curve_derivative_fd_error(f, plan, h=1e-5):
    """Max gap between the analytic (f o gamma)' and a central difference in t."""
    t = plan.times
    exact = curve_derivative(f, plan)
    plus = np.concatenate([f.value(c.position(t + h)) for c in plan.curves])
    minus = np.concatenate([f.value(c.position(t - h)) for c in plan.curves])
    return float(np.max(np.abs(exact - (plus - minus) / (2 * h))))


# -------------------------------------------------------- lower bound


def cheeger_lower_bound(f, plan, mu, resolution=None, compression=None):
    """|int (f(gamma_1) - f(gamma_0)) dpi| / (Comp * KE)^(1/2).

    Integrating |(f o gamma)'| <= G(gamma_t)|gamma'_t| and applying
    Cauchy-Schwarz with (e_t)_* pi <= Comp * mu bounds this by ||G||_{L^2(mu)}
    for every weak upper gradient G, hence by || |Df| ||.  Refused (raises
    :class:`CertificateError`) unless the compression certificate passes and
    the kinetic energy is positive.
    """
    report = compression if compression is not None else check_compression(plan, mu, resolution=resolution)
    if not report.passed:
        raise CertificateError(f"compression certificate failed: {report.witness}")
    ke = kinetic_energy(plan)
    if not ke > 0.0:
        raise CertificateError("kinetic energy is zero: the bound is undefined")
    return abs(endpoint_increment(f, plan)) / math.sqrt(plan.comp * ke)


# ---------------------------------------------------------------- catalog

_ENSEMBLE_KEYS = {
    "sliding_segment": {"start", "direction", "shift", "travel", "curves", "comp"},
    "sliding_sheet": {"start", "direction", "shift", "travel", "transverse", "width", "curves", "rows", "comp"},
    "transversal": {"start", "direction", "normal", "shift", "speed", "curves", "comp"},
    "dirac": {"start", "velocity", "comp"},
    "stationary": {"points", "comp"},
    "patch_slide": {"component", "shift", "travel", "curves", "comp"},
    "curves": {"curves", "weights", "comp"},
    "reparametrized": {"base", "power"},
}


def _uniform(n):
    return np.full(n, 1.0 / n)


def _linear_from(doc, path):
    if doc.get("type") != "linear" or set(doc) - {"type", "start", "velocity"}:
        raise ConfigError("custom curves must be {'type': 'linear', 'start', 'velocity'}", path)
    return LinearCurve(doc["start"], doc["velocity"])


def ensemble_from_config(doc, mu=None, path="$", n_times=64):
    """Build an ensemble from its catalog descriptor (see README for the schema)."""
    if not isinstance(doc, dict) or doc.get("type") not in _ENSEMBLE_KEYS:
        raise ConfigError(f"unknown ensemble type {doc.get('type') if isinstance(doc, dict) else doc!r}", path)
    kind = doc["type"]
    unknown = set(doc) - _ENSEMBLE_KEYS[kind] - {"type", "note"}
    if unknown:
        raise ConfigError(f"unknown keys {sorted(unknown)}", path)
    note = doc.get("note", "")
    try:
        if kind == "reparametrized":
            base = ensemble_from_config(doc["base"], mu, path + ".base", n_times)
            return base.reparametrized(doc.get("power", 2.0))
        if kind == "sliding_segment":
            n = int(doc.get("curves", 200))
            start = np.array(doc["start"], dtype=float)
            e = np.array(doc["direction"], dtype=float)
            shift, travel = float(doc["shift"]), float(doc["travel"])
            s = (np.arange(n) + 0.5) / n * shift
            curves = [LinearCurve(start + si * e, travel * e) for si in s]
            return CurveEnsemble(tuple(curves), _uniform(n), doc["comp"], note, n_times, dict(doc))
        if kind == "sliding_sheet":
            n, rows = int(doc.get("curves", 200)), int(doc.get("rows", 32))
            start = np.array(doc["start"], dtype=float)
            e = np.array(doc["direction"], dtype=float)
            tv = np.array(doc["transverse"], dtype=float)
            shift, travel, width = float(doc["shift"]), float(doc["travel"]), float(doc["width"])
            s = (np.arange(n) + 0.5) / n * shift
            y = (np.arange(rows) + 0.5) / rows * width
            curves = [LinearCurve(start + yj * tv + si * e, travel * e) for yj in y for si in s]
            return CurveEnsemble(tuple(curves), _uniform(n * rows), doc["comp"], note, n_times, dict(doc))
        if kind == "transversal":
            n = int(doc.get("curves", 50))
            start = np.array(doc["start"], dtype=float)
            e = np.array(doc["direction"], dtype=float)
            nv = np.array(doc["normal"], dtype=float)
            s = (np.arange(n) + 0.5) / n * float(doc["shift"])
            curves = [LinearCurve(start + si * e, float(doc.get("speed", 1.0)) * nv) for si in s]
            return CurveEnsemble(tuple(curves), _uniform(n), doc["comp"], note, n_times, dict(doc))
        if kind == "dirac":
            vel = doc.get("velocity", [0.0] * len(doc["start"]))
            return CurveEnsemble((LinearCurve(doc["start"], vel),), np.ones(1), doc["comp"], note, n_times, dict(doc))
        if kind == "stationary":
            pts = np.array(doc["points"], dtype=float)
            curves = [LinearCurve(p, np.zeros_like(p)) for p in pts]
            return CurveEnsemble(tuple(curves), _uniform(len(pts)), doc["comp"], note, n_times, dict(doc))
        if kind == "patch_slide":
            if mu is None:
                raise ConfigError("patch_slide needs the measure", path)
            comp = mu.components[int(doc["component"])][1]
            if not isinstance(comp, RectifiablePatch) or comp.k != 1:
                raise ConfigError("patch_slide needs a one-dimensional patch component", path + ".component")
            n = int(doc.get("curves", 200))
            shift, travel = float(doc["shift"]), float(doc["travel"])
            s = (np.arange(n) + 0.5) / n * shift
            curves = [PatchPath(comp, [si], [si + travel]) for si in s]
            return CurveEnsemble(tuple(curves), _uniform(n), doc["comp"], note, n_times, dict(doc))
        curves = [_linear_from(c, f"{path}.curves[{i}]") for i, c in enumerate(doc["curves"])]
        weights = np.array(doc.get("weights", _uniform(len(curves))), dtype=float)
        return CurveEnsemble(tuple(curves), weights, doc["comp"], note, n_times, dict(doc))
    except KeyError as exc:
        raise ConfigError(f"missing key {exc.args[0]!r}", path) from None
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc), path) from None


def empirical_measure(plan, t=0.0, name="empirical"):
    """The pushforward (e_t)_* pi as an atoms measure."""
    pos = plan.positions([t])[:, 0, :]
    return Measure(plan.dim, ((1.0, Atoms(pos, plan.weights)),), name)
