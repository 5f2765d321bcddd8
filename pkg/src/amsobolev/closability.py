"""Closability verdicts with replayable counterexample certificates.

Only refutations are certified.  The verdict vocabulary is
``NOT_CLOSABLE`` (with a witness) or ``NO_COUNTEREXAMPLE_FOUND``; the
absence of a counterexample is never promoted to a closability claim.

Sequence witnesses use

    f_n(x) = eta(x) * theta(n * s(x)) / n,
    theta(t) = t * exp(1 - 1 / (1 - t^2)) on (-1, 1), 0 elsewhere,

with s a transversal coordinate vanishing on the component (theta(0) = 0,
theta'(0) = 1), so f_n = 0 and grad f_n = eta * grad s on the support.
"""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass
from dataclasses import field as dc_field

import numpy as np

from .bundle import assign_bundle, component_bases
from .energy import energy_lip
from .errors import ConfigError
from .fields import EXTRA_BUILDERS, Bump, Coordinate, ScalarField, combine, cut_off, field_from_config
from .grassmann import Subspace, orthogonal_complement
from .measure import (
    Arc,
    Atoms,
    Cantor,
    Graph,
    PlanePatch,
    Segment,
    component_from_config,
    l2_norm,
    membership,
    quadrature,
)
from .relax import PlateauField, assemble_cheeger_interval

NOT_CLOSABLE = "NOT_CLOSABLE"
NO_COUNTEREXAMPLE_FOUND = "NO_COUNTEREXAMPLE_FOUND"

F_TOL = 1e-6
GRAD_TOL = 1e-9
V_MIN = 0.1
GAP_MARGIN = 0.5
CONSISTENCY_RTOL = 1e-3
DEFAULT_STAGES = (2, 4, 8, 16, 32)


def theta(t):
    t = np.asarray(t, dtype=float)
    inside = np.abs(t) < 1.0
    tt = np.where(inside, t, 0.0)
    return np.where(inside, tt * np.exp(1.0 - 1.0 / (1.0 - tt * tt)), 0.0)


def theta_deriv(t):
    t = np.asarray(t, dtype=float)
    inside = np.abs(t) < 1.0
    tt = np.where(inside, t, 0.0)
    q = 1.0 - tt * tt
    return np.where(inside, np.exp(1.0 - 1.0 / q) * (1.0 - 2.0 * tt * tt / (q * q)), 0.0)


# -------------------------------------------------- transversal coordinates


def _coord_eval(spec, pts):
    """Value and gradient of a transversal coordinate s described by ``spec``."""
    kind = spec["kind"]
    if kind == "flat":
        p = np.array(spec["point"])
        v = np.array(spec["direction"])
        return (pts - p) @ v, np.tile(v, (len(pts), 1))
    if kind == "circle":
        c = np.array(spec["center"])
        i, j = spec["plane"]
        dx, dy = pts[:, i] - c[i], pts[:, j] - c[j]
        r = np.hypot(dx, dy)
        safe = np.where(r > 0, r, 1.0)
        g = np.zeros_like(pts)
        g[:, i], g[:, j] = dx / safe, dy / safe
        return r - spec["radius"], g
    if kind == "graph":
        h = field_from_config(spec["height"])
        a, b = spec["axes"]
        xa = pts[:, [a]]
        g = np.zeros_like(pts)
        g[:, b] = 1.0
        g[:, a] = -h.grad(xa)[:, 0]
        return pts[:, b] - h.value(xa), g
    raise ValueError(f"unknown transversal coordinate {kind!r}")


class TransversalField(ScalarField):
    """sum_j eta_j(x) * theta(n * s(x)) / n over the cutoffs eta_j (one per atom, or one overall)."""

    def __init__(self, coordinate, cutoffs, stage):
        self.coordinate = coordinate
        self.cutoffs = [c if isinstance(c, Bump) else Bump(c["inner"], c["outer"]) for c in cutoffs]
        self.stage = float(stage)
        self.dim = self.cutoffs[0].dim
        lo = np.min([c.support[:, 0] for c in self.cutoffs], axis=0)
        hi = np.max([c.support[:, 1] for c in self.cutoffs], axis=0)
        self.support = np.stack([lo, hi], axis=1)
        self.lipschitz = math.inf
        self.descriptor = {
            "type": "transversal",
            "coordinate": coordinate,
            "cutoffs": [c.descriptor for c in self.cutoffs],
            "stage": self.stage,
        }

    def _eta(self, pts):
        val = np.zeros(len(pts))
        grad = np.zeros_like(pts)
        for c in self.cutoffs:
            val += c._value(pts)
            grad += c._grad(pts)
        return val, grad

    def _value(self, pts):
        s, _ = _coord_eval(self.coordinate, pts)
        eta, _ = self._eta(pts)
        return eta * theta(self.stage * s) / self.stage

    def _grad(self, pts):
        s, ds = _coord_eval(self.coordinate, pts)
        eta, deta = self._eta(pts)
        n = self.stage
        return deta * (theta(n * s) / n)[:, None] + (eta * theta_deriv(n * s))[:, None] * ds

    def limit_samples(self, pts):
        """eta * grad s: the limit of grad f_n on {s = 0}."""
        _, ds = _coord_eval(self.coordinate, pts)
        eta, _ = self._eta(pts)
        return eta[:, None] * ds

    def sup_on(self, box):
        return 1.0 / self.stage


def _transversal_from_config(desc, path):
    if set(desc) - {"type", "coordinate", "cutoffs", "stage"}:
        raise ConfigError("unknown keys in transversal field", path)
    return TransversalField(desc["coordinate"], desc["cutoffs"], desc["stage"])


EXTRA_BUILDERS["transversal"] = _transversal_from_config


# ------------------------------------------------------------ certificate


@dataclass
class ClosabilityCertificate:
    verdict: str
    witness_kind: str | None
    measure: dict
    resolution: tuple
    component: int | None = None
    constructor: dict | None = None
    stages: list = dc_field(default_factory=list)
    v_norm: float | None = None
    field: dict | None = None
    e_ch_upper: float | None = None
    e_lip: float | None = None
    gap: float | None = None
    attempts: list = dc_field(default_factory=list)
    notes: str = ""

    def to_dict(self):
        out = {k: getattr(self, k) for k in self.__dataclass_fields__}
        out["resolution"] = list(self.resolution)
        return out

    @classmethod
    def from_dict(cls, doc):
        doc = dict(doc)
        doc["resolution"] = tuple(doc["resolution"])
        return cls(**doc)

    def rows(self):
        name = self.measure.get("name", "measure")
        return [dict(measure=name, verdict=self.verdict, **s) for s in self.stages]


# ----------------------------------------------------------- construction


def _foreign_nodes(mu, rule, c):
    """Nodes of other components that are not also on component ``c``."""
    others = rule.component != c
    if not np.any(others):
        return np.zeros((0, mu.dim))
    pts = rule.nodes[others]
    on_c = membership(mu, pts, resolution=rule.resolution)[:, c]
    return pts[~on_c]


def _isolating_cutoff(box, foreign, scale, tries=8):
    """Bump equal to 1 near ``box`` whose outer box holds no foreign node."""
    pad = 0.25 * scale
    for _ in range(tries):
        outer = np.stack([box[:, 0] - 2 * pad, box[:, 1] + 2 * pad], axis=1)
        inside = np.all((foreign >= outer[:, 0]) & (foreign <= outer[:, 1]), axis=1) if len(foreign) else []
        if not np.any(inside):
            inner = np.stack([box[:, 0] - pad, box[:, 1] + pad], axis=1)
            return Bump(inner, outer)
        pad *= 0.5
    return None


def _coordinate_for(comp, mu):
    """Transversal coordinate choices for a component, most robust last."""
    d = mu.dim
    if isinstance(comp, (Segment, PlanePatch)):
        u0 = np.zeros((1, comp.k))
        T = Subspace(d, list(component_bases(comp, comp.phi(u0))[0].T))
        v = orthogonal_complement(T).basis[0]
        return [{"kind": "flat", "point": comp.phi(u0)[0].tolist(), "direction": v.tolist()}]
    if isinstance(comp, Arc):
        mid = comp.phi(np.array([[0.5]]))
        v = comp.normal(mid)[0]
        frozen = {"kind": "flat", "point": mid[0].tolist(), "direction": v.tolist()}
        circle = {"kind": "circle", "center": comp.center.tolist(), "radius": comp.radius,
                  "plane": list(comp.plane)}
        return [frozen, circle]
    if isinstance(comp, Graph):
        return [{"kind": "graph", "height": comp.height.descriptor, "axes": list(comp.axes)}]
    if isinstance(comp, Cantor) and d >= 2:
        j = 1 if comp.axis == 0 else 0
        v = np.zeros(d)
        v[j] = 1.0
        return [{"kind": "flat", "point": comp.origin.tolist(), "direction": v.tolist()}]
    if isinstance(comp, Atoms):
        v = np.zeros(d)
        v[0] = 1.0
        return [{"kind": "flat_atoms", "direction": v.tolist()}]
    return []


def _stage_records(fields, mu, rule, c, limit):
    """Per-stage ||f_n||, ||grad f_n - v|| and ||v|| in L^2(mu)."""
    v_norm = l2_norm(rule, limit)
    records = []
    for stage, fn in fields:
        records.append(
            {
                "stage": stage,
                "f_l2": l2_norm(rule, fn),
                "grad_err": l2_norm(rule, fn.grad(rule.nodes) - limit),
            }
        )
    return records, v_norm


def _limit_on(rule, c, samples):
    out = np.zeros_like(rule.nodes)
    mask = rule.component == c
    out[mask] = samples[mask]
    return out


def _sequence_ok(records, v_norm, f_tol=F_TOL, grad_tol=GRAD_TOL, v_min=V_MIN):
    if not records:
        return False
    f_vals = [r["f_l2"] for r in records]
    decreasing = all(b <= a * (1 + 1e-12) + 1e-300 for a, b in zip(f_vals, f_vals[1:]))
    return decreasing and f_vals[-1] < f_tol and records[-1]["grad_err"] <= grad_tol and v_norm >= v_min


def build_sequence(constructor, stage):
    """Rebuild the stage-``stage`` member of a stored sequence constructor."""
    kind = constructor["kind"]
    if kind == "transversal":
        return TransversalField(constructor["coordinate"], constructor["cutoffs"], stage)
    if kind == "cantor_axis":
        cantor = component_from_config(constructor["cantor"], len(constructor["cantor"]["origin"]))
        base = field_from_config(constructor["base"])
        return combine(base, PlateauField(base, cantor, stage), "sub")
    raise ValueError(f"unknown sequence constructor {kind!r}")


def limit_field(constructor, mu, rule):
    """Node samples of the limit vector field v for a stored constructor."""
    c = constructor["component"]
    if constructor["kind"] == "transversal":
        probe = TransversalField(constructor["coordinate"], constructor["cutoffs"], 1.0)
        return _limit_on(rule, c, probe.limit_samples(rule.nodes))
    if constructor["kind"] == "cantor_axis":
        e = np.zeros(mu.dim)
        e[constructor["cantor"]["axis"]] = 1.0
        return _limit_on(rule, c, np.tile(e, (len(rule), 1)))
    raise ValueError(f"unknown sequence constructor {constructor['kind']!r}")


def _constructors_for(comp, c, mu, rule, foreign):
    """Candidate constructors for component ``c`` (may be several, tried in order)."""
    out = []
    box = comp.bounding_box()
    scale = float(max(np.max(box[:, 1] - box[:, 0]), 1.0))
    for coord in _coordinate_for(comp, mu):
        if coord["kind"] == "flat_atoms":
            cutoffs = []
            pts = comp.points
            for i, p in enumerate(pts):
                others = np.concatenate([np.delete(pts, i, axis=0), foreign])
                gap = np.min(np.linalg.norm(others - p, axis=1)) if len(others) else 1.0
                r = 0.2 * min(gap, 1.0)
                cutoffs.append(Bump(np.stack([p - r, p + r], 1), np.stack([p - 2 * r, p + 2 * r], 1)).descriptor)
            coords = [{"kind": "flat", "point": p.tolist(), "direction": coord["direction"]} for p in pts]
            out.append({"kind": "transversal_atoms", "component": c, "coordinates": coords, "cutoffs": cutoffs})
            continue
        eta = _isolating_cutoff(box, foreign, scale)
        if eta is None:
            continue
        out.append({"kind": "transversal", "component": c, "coordinate": coord, "cutoffs": [eta.descriptor]})
    if isinstance(comp, Cantor) and comp.variant == "classic" and mu.dim == 1:
        eta = _isolating_cutoff(box, foreign, scale)
        if eta is not None:
            base = cut_off(Coordinate(1, comp.axis), eta.inner.tolist(), eta.outer.tolist())
            out.append({"kind": "cantor_axis", "component": c, "cantor": comp.config(), "base": base.descriptor})
    return out


class _AtomSum(ScalarField):
    """Sum of per-atom transversal fields with disjoint cutoffs."""

    def __init__(self, parts):
        self.parts = parts
        self.dim = parts[0].dim
        lo = np.min([p.support[:, 0] for p in parts], axis=0)
        hi = np.max([p.support[:, 1] for p in parts], axis=0)
        self.support = np.stack([lo, hi], axis=1)
        self.lipschitz = math.inf
        self.descriptor = {"type": "atom_sum", "parts": [p.descriptor for p in parts]}

    def _value(self, pts):
        return sum(p._value(pts) for p in self.parts)

    def _grad(self, pts):
        return sum(p._grad(pts) for p in self.parts)

    def limit_samples(self, pts):
        return sum(p.limit_samples(pts) for p in self.parts)


def _atom_sum_from_config(desc, path):
    return _AtomSum([_transversal_from_config(p, f"{path}.parts[{i}]") for i, p in enumerate(desc["parts"])])


EXTRA_BUILDERS["atom_sum"] = _atom_sum_from_config


def _member(constructor, stage):
    if constructor["kind"] == "transversal_atoms":
        return _AtomSum(
            [TransversalField(co, [cu], stage) for co, cu in zip(constructor["coordinates"], constructor["cutoffs"])]
        )
    return build_sequence(constructor, stage)


def _limit(constructor, mu, rule):
    if constructor["kind"] == "transversal_atoms":
        probe = _member(constructor, 1.0)
        return _limit_on(rule, constructor["component"], probe.limit_samples(rule.nodes))
    return limit_field(constructor, mu, rule)


def _stages_for(constructor, mu, rule, stages):
    if constructor["kind"] == "cantor_axis":
        depth = rule.resolution[constructor["component"]]
        picks = [s for s in stages if s < depth] + [depth]
        return sorted(set(picks))
    if constructor.get("coordinate", {}).get("kind") == "circle":
        reach = constructor["coordinate"]["radius"]
        return [s for s in stages if s * reach > 1.0]
    return list(stages)


def _evaluate(constructor, mu, rule, stages):
    limit = _limit(constructor, mu, rule)
    members = [(s, _member(constructor, s)) for s in stages]
    return _stage_records(members, mu, rule, constructor["component"], limit)


def transversal_counterexample(mu, resolution=None, stages=DEFAULT_STAGES, component=None):
    """Explicit non-closability sequence on a component whose bundle is not the full space.

    Returns ``NO_COUNTEREXAMPLE_FOUND`` when no component qualifies or no
    construction meets the certificate thresholds; this is never a proof
    of closability.
    """
    bundle = assign_bundle(mu, resolution)
    rule = bundle.rule
    attempts = []
    indices = range(len(mu.components)) if component is None else [component]
    for c in indices:
        mask = rule.component == c
        deficient = mask & (bundle.dims < mu.dim)
        if not np.any(deficient) or math.fsum(rule.weights[deficient]) <= 0:
            continue
        comp = mu.components[c][1]
        foreign = _foreign_nodes(mu, rule, c)
        for constructor in _constructors_for(comp, c, mu, rule, foreign):
            picks = _stages_for(constructor, mu, rule, stages)
            records, v_norm = _evaluate(constructor, mu, rule, picks)
            constructor = dict(constructor, stages=picks)
            if _sequence_ok(records, v_norm):
                return ClosabilityCertificate(
                    NOT_CLOSABLE, "sequence", mu.config(), rule.resolution, c, constructor, records, v_norm,
                    attempts=attempts,
                    notes="f_n -> 0 in L^2(mu) while grad f_n -> v != 0 in L^2_mu",
                )
            attempts.append({"constructor": constructor, "stages": records, "v_norm": v_norm})
    return ClosabilityCertificate(
        NO_COUNTEREXAMPLE_FOUND, None, mu.config(), rule.resolution, attempts=attempts,
        notes="no component with a deficient bundle admitted a certified sequence",
    )


def identity_gap_check(f, mu, resolution=None, ensembles=(), constructors=("trivial", "plateau"), stages=None):
    """Refute closability through E_Ch_upper(f) < (1 - 0.5) * E_lip(f, p=2)."""
    interval = assemble_cheeger_interval(f, mu, ensembles, constructors, resolution, stages)
    e_lip = energy_lip(f, mu, resolution=resolution).value
    rule = quadrature(mu, resolution)
    used = [c.to_dict() for c in interval.certificates if c.applicable]
    best = min(used, key=lambda c: c["e_ch_upper"])
    constructor = {"kind": "relaxation", "constructor": best["constructor"],
                   "stages": [s["stage"] for s in best["stages"]]}
    gap = e_lip - interval.upper
    if interval.upper < e_lip * (1.0 - GAP_MARGIN):
        verdict, kind = NOT_CLOSABLE, "identity_gap"
    else:
        verdict, kind = NO_COUNTEREXAMPLE_FOUND, None
    return ClosabilityCertificate(
        verdict, kind, mu.config(), rule.resolution, constructor=constructor, stages=best["stages"],
        field=f.descriptor, e_ch_upper=interval.upper, e_lip=e_lip, gap=gap,
        notes="|Df| = |grad f| fails on positive mass" if kind else "",
    )


# ---------------------------------------------------------- verification


@dataclass
class Verification:
    passed: bool
    reasons: list
    recomputed: dict

    def to_dict(self):
        return {"passed": self.passed, "reasons": self.reasons, "recomputed": self.recomputed}


def _close(a, b, rtol=CONSISTENCY_RTOL):
    return abs(a - b) <= rtol * max(1.0, abs(a), abs(b))


def verify_certificate(cert, mu, resolution=None, factor=2):
    """Re-evaluate a NOT_CLOSABLE certificate from its stored constructors at a finer resolution.

    PASS iff every certificate invariant re-verifies within twice its
    tolerance and the stored headline numbers agree with the recomputation.
    """
    if cert.verdict != NOT_CLOSABLE:
        return Verification(False, ["only NOT_CLOSABLE certificates carry checkable claims"], {})
    base = cert.resolution if resolution is None else resolution
    fine = mu.refine(base, factor)
    reasons = []
    try:
        if cert.witness_kind == "sequence":
            constructor = cert.constructor
            rule = quadrature(mu, fine)
            stages = constructor["stages"]
            if constructor["kind"] == "cantor_axis":
                # the finest plateau stage tracks the depth of the rule
                stages = _stages_for(constructor, mu, rule, stages)
            records, v_norm = _evaluate(constructor, mu, rule, stages)
            recomputed = {"resolution": list(fine), "stages": records, "v_norm": v_norm}
            if not _sequence_ok(records, v_norm, 2 * F_TOL, 2 * GRAD_TOL, V_MIN / 2):
                reasons.append("sequence invariants fail at the finer resolution")
            if cert.v_norm is None or not _close(cert.v_norm, v_norm):
                reasons.append(f"stored |v| = {cert.v_norm} differs from recomputed {v_norm}")
        elif cert.witness_kind == "identity_gap":
            f = field_from_config(cert.field)
            c = cert.constructor or {}
            interval = assemble_cheeger_interval(f, mu, (), ("trivial", c.get("constructor", "trivial")), fine)
            e_lip = energy_lip(f, mu, resolution=fine).value
            gap = e_lip - interval.upper
            recomputed = {"resolution": list(fine), "e_ch_upper": interval.upper, "e_lip": e_lip, "gap": gap}
            if not interval.upper < e_lip * (1.0 - GAP_MARGIN):
                reasons.append("identity gap does not persist at the finer resolution")
            if cert.gap is None or not _close(cert.gap, gap):
                reasons.append(f"stored gap {cert.gap} differs from recomputed {gap}")
        else:
            return Verification(False, [f"unknown witness kind {cert.witness_kind!r}"], {})
    except (ValueError, KeyError, TypeError) as exc:
        return Verification(False, [f"constructor not reproducible: {exc}"], {})
    return Verification(not reasons, reasons, recomputed)


def tampered(cert, **changes):
    """Copy of ``cert`` with fields overwritten (used to exercise verification)."""
    out = copy.deepcopy(cert)
    for k, v in changes.items():
        setattr(out, k, v)
    return out
