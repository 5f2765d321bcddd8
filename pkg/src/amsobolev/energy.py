"""Energy functionals on structured measures and the parallelogram defect.

* ``E_lip(f) = 1/2 int lip(f)^2 dmu`` under any :class:`NormPlugin`.
* ``E_AM(f) = 1/2 int |pi_x grad f(x)|^2 dmu`` with pi_x the orthogonal
  projection onto the bundle V(mu, x).

Both require a compactly supported field (declared support box).
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .bundle import assign_bundle
from .fields import EUCLIDEAN, NormPlugin
from .measure import l2_norm, quadrature

CSV_COLUMNS = ("measure", "field", "functional", "p", "resolution", "value")


def resolution_label(res):
    return "x".join(str(r) for r in res)


@dataclass(frozen=True)
class EnergyReport:
    measure: str
    field: str
    functional: str
    value: float
    resolution: tuple
    p: str = "2"

    def __post_init__(self):
        if not self.value >= 0.0:
            raise ValueError(f"negative energy {self.value} for {self.functional}")

    def row(self):
        return {
            "measure": self.measure,
            "field": self.field,
            "functional": self.functional,
            "p": self.p,
            "resolution": resolution_label(self.resolution),
            "value": self.value,
        }

    def to_dict(self):
        out = asdict(self)
        out["resolution"] = list(self.resolution)
        return out


@dataclass(frozen=True)
class DefectReport:
    """E(f+g) + E(f-g) - 2E(f) - 2E(g) and its relative size."""

    functional: str
    measure: str
    f: str
    g: str
    p: str
    resolution: tuple
    e_plus: float
    e_minus: float
    e_f: float
    e_g: float
    defect: float
    relative: float

    def rows(self):
        base = {
            "measure": self.measure,
            "field": f"{self.f}|{self.g}",
            "p": self.p,
            "resolution": resolution_label(self.resolution),
        }
        return [
            dict(base, functional=f"{self.functional}.defect", value=self.defect),
            dict(base, functional=f"{self.functional}.relative_defect", value=self.relative),
        ]

    def to_dict(self):
        out = asdict(self)
        out["resolution"] = list(self.resolution)
        return out


def _require_compact(f):
    if f.support is None:
        raise ValueError(
            f"field {f.name!r} has no support box: the Lipschitz energy is +inf "
            "outside LIP_c, so compactly supported fields are required"
        )


def _half_sum(rule, sq):
    return 0.5 * math.fsum(rule.weights * sq)


def lip_samples(f, mu, norm=EUCLIDEAN, resolution=None):
    rule = quadrature(mu, resolution)
    return norm.dual_norm(f.grad(rule.nodes))


def energy_lip(f, mu, norm=EUCLIDEAN, resolution=None):
    """1/2 sum_i w_i lip(f, x_i)^2 with lip the dual norm of the gradient."""
    _require_compact(f)
    norm = norm if isinstance(norm, NormPlugin) else NormPlugin.parse(norm)
    rule = quadrature(mu, resolution)
    lips = norm.dual_norm(f.grad(rule.nodes))
    return EnergyReport(mu.name, f.name, f"E_lip({norm.label})", _half_sum(rule, lips**2), rule.resolution, norm.label)


def am_gradient_field(f, mu, resolution=None):
    """Per-node pi_x(grad f(x)) at the quadrature nodes; shape (N, d)."""
    bundle = assign_bundle(mu, resolution)
    return bundle.project_nodes(f.grad(bundle.rule.nodes))


def energy_am(f, mu, resolution=None):
    """1/2 sum_i w_i |pi_{x_i} grad f(x_i)|^2."""
    _require_compact(f)
    bundle = assign_bundle(mu, resolution)
    g = bundle.project_nodes(f.grad(bundle.rule.nodes))
    value = _half_sum(bundle.rule, np.sum(g * g, axis=1))
    return EnergyReport(mu.name, f.name, "E_AM", value, bundle.rule.resolution, "2")


def energy(functional, f, mu, resolution=None, p=2):
    """Dispatch on a functional tag: "E_AM" or "E_lip" (with ``p``)."""
    if functional == "E_AM":
        return energy_am(f, mu, resolution)
    if functional == "E_lip":
        return energy_lip(f, mu, NormPlugin.parse(p), resolution)
    raise ValueError(f"unknown functional {functional!r}")


def parallelogram_defect(functional, f, g, mu, resolution=None, p=2):
    """Parallelogram defect of E_AM or E_lip(p) on the pair (f, g).

    The relative defect is normalized by 2E(f) + 2E(g); 0/0 is reported as 0.
    """
    E = lambda h: energy(functional, h, mu, resolution, p).value  # noqa: E731
    ep, em, ef, eg = E(f + g), E(f - g), E(f), E(g)
    defect = (ep + em) - (2.0 * ef + 2.0 * eg)
    denom = 2.0 * ef + 2.0 * eg
    if denom == 0.0:
        relative = 0.0 if defect == 0.0 else math.inf
    else:
        relative = abs(defect) / denom
    label = "E_AM" if functional == "E_AM" else f"E_lip({NormPlugin.parse(p).label})"
    return DefectReport(
        label, mu.name, f.name, g.name, NormPlugin.parse(p).label if functional != "E_AM" else "2",
        quadrature(mu, resolution).resolution, ep, em, ef, eg, defect, relative,
    )


def sobolev_norm(f, mu, energy_for_gradient="E_AM", resolution=None):
    """(||f||^2_{L^2(mu)} + 2 E(f))^(1/2), with E a surrogate for the Cheeger energy.

    E_AM (default) and E_lip are upper-bound surrogates; the true Cheeger
    energy is only bracketed, see :mod:`amsobolev.relax`.
    """
    rule = quadrature(mu, resolution)
    e = energy(energy_for_gradient, f, mu, resolution).value
    return math.sqrt(l2_norm(rule, f) ** 2 + 2.0 * e)
