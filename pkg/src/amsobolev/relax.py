"""Relaxing sequences and the two-sided bracket on the Cheeger energy.

Upper bounds come from explicit sequences f_n -> f in L^2(mu):

* ``trivial``: f_n = f, giving E_AM(f).
* ``plateau``: for measures carried by a Cantor construction, f_n is
  frozen to f(center of I) on every stage-n interval I and interpolated
  across the gaps with the quintic smoothstep, so its gradient vanishes on
  the whole construction.

Lower bounds come from test plans via :func:`testplan.cheeger_lower_bound`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .energy import energy_am, energy_lip
from .errors import CertificateError, InvariantViolation
from .fields import EXTRA_BUILDERS, Bump, ScalarField, field_from_config, smoothstep, smoothstep_deriv
from .measure import Cantor, component_from_config, l2_norm, quadrature
from .testplan import cheeger_lower_bound, check_compression

SANDWICH_SLACK = 1e-10


def _cantor_cutoff(cantor):
    """Bump equal to 1 on a neighbourhood of the construction's segment."""
    box = cantor.bounding_box()
    pad = 0.25 * cantor.length
    inner = np.stack([box[:, 0] - pad, box[:, 1] + pad], axis=1)
    outer = np.stack([box[:, 0] - 2 * pad, box[:, 1] + 2 * pad], axis=1)
    return Bump(inner, outer)


class PlateauField(ScalarField):
    """Smooth field frozen to f(center) on each stage-``stage`` interval of a Cantor construction.

    Along the construction's axis the profile is constant on every
    surviving interval and rises through the quintic smoothstep across each
    gap; it is extended by constants past the ends and multiplied by a bump
    that is 1 near the construction.
    """

    def __init__(self, f, cantor, stage):
        if f.dim != cantor.dim:
            raise ValueError("field and Cantor component live in different dimensions")
        self.f = f
        self.cantor = cantor
        self.stage = int(stage)
        self.dim = f.dim
        lefts, ell = cantor.intervals(self.stage)
        self._lefts = lefts
        self._rights = lefts + ell
        self._levels = f.value(cantor.embed(lefts + 0.5 * ell))
        self._eta = _cantor_cutoff(cantor)
        self.support = self._eta.support
        jumps = np.abs(np.diff(self._levels))
        gaps = self._lefts[1:] - self._rights[:-1]
        slope = float(np.max(jumps / gaps) * 1.875) if len(gaps) else 0.0
        top = float(np.max(np.abs(self._levels)))
        self.lipschitz = slope + top * self._eta.lipschitz
        self.descriptor = {
            "type": "plateau",
            "field": f.descriptor,
            "cantor": cantor.config(),
            "stage": self.stage,
        }

    def _profile(self, pts):
        t = pts[:, self.cantor.axis] - self.cantor.origin[self.cantor.axis]
        j = np.clip(np.searchsorted(self._lefts, t, side="right") - 1, 0, len(self._lefts) - 1)
        val = self._levels[j].copy()
        der = np.zeros_like(t)
        in_gap = (t > self._rights[j]) & (j + 1 < len(self._lefts))
        if np.any(in_gap):
            jg = j[in_gap]
            width = self._lefts[jg + 1] - self._rights[jg]
            s = (t[in_gap] - self._rights[jg]) / width
            jump = self._levels[jg + 1] - self._levels[jg]
            val[in_gap] = self._levels[jg] + jump * smoothstep(s)
            der[in_gap] = jump * smoothstep_deriv(s) / width
        return val, der

    def _value(self, pts):
        val, _ = self._profile(pts)
        return val * self._eta._value(pts)

    def _grad(self, pts):
        val, der = self._profile(pts)
        eta = self._eta._value(pts)
        g = self._eta._grad(pts) * val[:, None]
        g[:, self.cantor.axis] += der * eta
        return g

    def sup_on(self, box):
        return float(np.max(np.abs(self._levels)))


def _plateau_from_config(desc, path):
    from .errors import ConfigError

    if set(desc) - {"type", "field", "cantor", "stage"}:
        raise ConfigError("unknown keys in plateau field", path)
    f = field_from_config(desc["field"], path + ".field")
    cantor = component_from_config(desc["cantor"], f.dim, path + ".cantor")
    if not isinstance(cantor, Cantor):
        raise ConfigError("plateau needs a cantor component", path + ".cantor")
    return PlateauField(f, cantor, desc["stage"])


EXTRA_BUILDERS["plateau"] = _plateau_from_config


def plateau_sequence(f, cantor, n, max_depth=None):
    """Stage-``n`` plateau field of ``f`` over ``cantor``."""
    max_depth = cantor.default_resolution if max_depth is None else max_depth
    if not 0 <= n <= max_depth:
        raise ValueError(f"plateau stage {n} outside [0, {max_depth}]")
    return PlateauField(f, cantor, n)


# ------------------------------------------------------------ certificates


@dataclass
class RelaxationCertificate:
    """Stage table of one relaxing sequence and the upper bound it certifies."""

    target: dict
    constructor: str
    stages: list
    e_ch_upper: float
    resolution: tuple
    applicable: bool = True
    reason: str = ""

    def to_dict(self):
        return {
            "target": self.target,
            "constructor": self.constructor,
            "stages": self.stages,
            "e_ch_upper": self.e_ch_upper,
            "resolution": list(self.resolution),
            "applicable": self.applicable,
            "reason": self.reason,
        }

    def rows(self):
        return [dict(constructor=self.constructor, **s) for s in self.stages]


def _single_cantor(mu):
    cantors = [c for _, c in mu.components if isinstance(c, Cantor)]
    if len(cantors) != len(mu.components) or len(cantors) != 1:
        return None
    return cantors[0]


def relax_sequence(f, mu, constructor="trivial", resolution=None, stages=None):
    """Run one constructor and record per-stage L^2 errors and energies."""
    rule = quadrature(mu, resolution)
    if constructor == "trivial":
        e = energy_am(f, mu, resolution).value
        stage = {"stage": 0, "l2_error": 0.0, "e_am": e, "e_lip": energy_lip(f, mu, resolution=resolution).value}
        return RelaxationCertificate(f.descriptor, "trivial", [stage], e, rule.resolution)
    if constructor != "plateau":
        raise ValueError(f"unknown constructor {constructor!r}")
    cantor = _single_cantor(mu)
    if cantor is None:
        return RelaxationCertificate(
            f.descriptor, "plateau", [], math.inf, rule.resolution, False,
            "plateau sequences need a measure made of a single Cantor component",
        )
    c_idx = 0
    depth = rule.resolution[c_idx]
    stages = list(range(1, depth + 1)) if stages is None else [int(s) for s in stages if s <= depth]
    records = []
    for n in stages:
        fn = plateau_sequence(f, cantor, n, max_depth=depth)
        records.append(
            {
                "stage": n,
                "l2_error": l2_norm(rule, fn - f),
                "e_am": energy_am(fn, mu, resolution).value,
                "e_lip": energy_lip(fn, mu, resolution=resolution).value,
            }
        )
    upper = min(r["e_am"] for r in records) if records else math.inf
    return RelaxationCertificate(f.descriptor, "plateau", records, upper, rule.resolution)


@dataclass
class CheegerInterval:
    lower: float
    upper: float
    e_am: float
    certificates: list = field(default_factory=list)
    lower_bounds: list = field(default_factory=list)

    def to_dict(self):
        return {
            "e_ch_lower": self.lower,
            "e_ch_upper": self.upper,
            "e_am": self.e_am,
            "certificates": [c.to_dict() for c in self.certificates],
            "lower_bounds": self.lower_bounds,
        }


def assemble_cheeger_interval(f, mu, ensembles=(), constructors=("trivial", "plateau"), resolution=None,
                              stages=None):
    """Bracket [E_Ch_lower, E_Ch_upper] for the Cheeger energy of ``f``.

    The trivial constructor is always included, so the upper bound never
    exceeds E_AM(f).  Ensembles whose compression check fails are recorded
    and skipped.  A lower bound above the upper bound means a broken
    certificate and raises :class:`InvariantViolation`.
    """
    e_am = energy_am(f, mu, resolution).value
    names = ["trivial"] + [c for c in constructors if c != "trivial"]
    certs = [relax_sequence(f, mu, c, resolution, stages) for c in names]
    upper = min(c.e_ch_upper for c in certs if c.applicable)
    lower, bounds = 0.0, []
    for plan in ensembles:
        rep = check_compression(plan, mu, resolution=resolution)
        entry = {"ensemble": plan.name, "compression_passed": rep.passed}
        try:
            lb = cheeger_lower_bound(f, plan, mu, resolution, compression=rep)
        except CertificateError as exc:
            entry["refused"] = str(exc)
        else:
            entry["bound"] = lb
            entry["energy_bound"] = 0.5 * lb * lb
            lower = max(lower, 0.5 * lb * lb)
        bounds.append(entry)
    if lower > upper + SANDWICH_SLACK * (1.0 + upper):
        raise InvariantViolation(f"E_Ch lower bound {lower} exceeds upper bound {upper}")
    return CheegerInterval(lower, upper, e_am, certs, bounds)
