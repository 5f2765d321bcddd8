"""Curated measures, fields and ensembles used by the presets and the test-suite."""

from __future__ import annotations

import math

import numpy as np

from .fields import Constant, Coordinate, Gaussian, Polynomial, Tent, combine, cut_off
from .measure import Arc, Atoms, Cantor, Graph, Lebesgue, Measure, PlanePatch, Segment
from .testplan import ensemble_from_config


def _m(dim, comps, name):
    return Measure(dim, tuple(comps), name)


def catalog_measures():
    """Name -> Measure.  Mixtures keep singular pieces away from absolutely continuous ones,
    except ``overlap`` which exercises the span-union rule."""
    return {
        "box": _m(2, [(1.0, Lebesgue([[0, 1], [0, 1]]))], "box"),
        "segment": _m(2, [(1.0, Segment([0, 0], [1, 0]))], "segment"),
        "arc": _m(2, [(1.0, Arc([0, 0], 1.0, [0.0, math.pi / 2]))], "arc"),
        "graph": _m(2, [(1.0, Graph(Polynomial(1, [(0.5, (2,))]), [0.0, 1.0]))], "graph"),
        "plane3": _m(3, [(1.0, PlanePatch([0, 0, 0], [[1, 0, 0], [0, 1, 0]]))], "plane3"),
        "cantor_classic": _m(1, [(1.0, Cantor("classic", dim=1))], "cantor_classic"),
        "cantor_fat": _m(1, [(1.0, Cantor("fat", dim=1))], "cantor_fat"),
        "cantor_classic_2d": _m(2, [(1.0, Cantor("classic", origin=[0.0, 0.0], depth=10))], "cantor_classic_2d"),
        "atoms": _m(2, [(1.0, Atoms([[0, 0], [1, 0], [0.5, 1]], [1.0, 2.0, 1.0]))], "atoms"),
        "mixture": _m(
            2,
            [
                (1.0, Segment([0, 0], [1, 0])),
                (0.5, Lebesgue([[2, 3], [0, 1]])),
                (1.0, Atoms([[0.5, 1.5]], [0.25])),
            ],
            "mixture",
        ),
        "overlap": _m(2, [(1.0, Lebesgue([[0, 1], [0, 1]])), (1.0, Segment([0, 0.5], [1, 0.5]))], "overlap"),
    }


def support_box(mu):
    boxes = np.stack([c.bounding_box() for _, c in mu.components])
    return np.stack([boxes[:, :, 0].min(axis=0), boxes[:, :, 1].max(axis=0)], axis=1)


def cutoff_boxes(mu, pad=0.25):
    """Inner/outer boxes whose smoothstep shell lies strictly off the support."""
    box = support_box(mu)
    inner = np.stack([box[:, 0] - pad, box[:, 1] + pad], axis=1)
    outer = np.stack([box[:, 0] - 3 * pad, box[:, 1] + 3 * pad], axis=1)
    return inner.tolist(), outer.tolist()


def chi(f, mu):
    """``f`` times the standard cutoff of ``mu``."""
    inner, outer = cutoff_boxes(mu)
    return cut_off(f, inner, outer)


def coordinate_field(mu, i):
    return chi(Coordinate(mu.dim, i), mu)


def constant_field(mu, c=1.0):
    return chi(Constant(mu.dim, c), mu)


def random_field(rng, mu):
    """A random smooth compactly supported field adapted to ``mu``'s support."""
    d = mu.dim
    box = support_box(mu)
    kind = rng.integers(4)
    if kind == 0:
        n_terms = int(rng.integers(1, 4))
        terms = [(float(rng.normal()), tuple(int(e) for e in rng.integers(0, 3, size=d))) for _ in range(n_terms)]
        base = Polynomial(d, terms)
    elif kind == 1:
        center = rng.uniform(box[:, 0], box[:, 1])
        base = Gaussian(center, float(rng.uniform(0.2, 1.0)), float(rng.normal()))
    elif kind == 2:
        center = rng.uniform(box[:, 0], box[:, 1])
        return Tent(center, float(rng.uniform(0.3, 1.5)), float(rng.normal()))
    else:
        i = int(rng.integers(d))
        center = rng.uniform(box[:, 0], box[:, 1])
        base = combine(Coordinate(d, i), Gaussian(center, float(rng.uniform(0.3, 1.0))), "mul")
    return chi(base, mu)


def random_pairs(mu, n, seed=0):
    rng = np.random.default_rng(seed)
    return [(random_field(rng, mu), random_field(rng, mu)) for _ in range(n)]


# ---------------------------------------------------------------- ensembles

SLIDING_SEGMENT = {
    "type": "sliding_segment", "start": [0.0, 0.0], "direction": [1.0, 0.0],
    "shift": 0.5, "travel": 0.5, "curves": 200, "comp": 2.0,
    "note": "pushforward at time t is uniform on [t/2, 1/2 + t/2]: density 2",
}
TRANSVERSAL = {
    "type": "transversal", "start": [0.0, 0.0], "direction": [1.0, 0.0], "normal": [0.0, 1.0],
    "shift": 1.0, "speed": 1.0, "curves": 50, "comp": 1.0,
}
DIRAC_SEGMENT = {"type": "dirac", "start": [0.25, 0.0], "velocity": [0.5, 0.0], "comp": 2.0}
ARC_SLIDE = {
    "type": "patch_slide", "component": 0, "shift": 0.5, "travel": 0.5, "curves": 200,
    "comp": 4.0 / math.pi, "note": "parameter density 2 against arc-length density pi/2",
}
FAT_SLIDE = {
    "type": "sliding_segment", "start": [0.0], "direction": [1.0], "shift": 0.5, "travel": 0.5,
    "curves": 200, "comp": 2.0, "note": "crosses the removed gaps: must be refused",
}


SLIDING_SHEET = {
    "type": "sliding_sheet", "start": [0.0, 0.0], "direction": [1.0, 0.0], "transverse": [0.0, 1.0],
    "shift": 0.5, "travel": 0.5, "width": 1.0, "curves": 200, "rows": 32, "comp": 2.0,
    "note": "horizontal sliding segments stacked over [0,1]^2: density 2 against Lebesgue",
}
BOX_TRANSVERSAL = {
    "type": "transversal", "start": [0.0, 0.5], "direction": [1.0, 0.0], "normal": [0.0, 1.0],
    "shift": 1.0, "speed": 1.0, "curves": 50, "comp": 1.0,
    "note": "leaves the box: must be refused",
}

ENSEMBLES = {
    "sliding_segment": SLIDING_SEGMENT,
    "transversal": TRANSVERSAL,
    "dirac_segment": DIRAC_SEGMENT,
    "arc_slide": ARC_SLIDE,
    "fat_slide": FAT_SLIDE,
    "sliding_sheet": SLIDING_SHEET,
    "box_transversal": BOX_TRANSVERSAL,
}


def curated_cases():
    """(measure, field, ensembles) triples for the sandwich experiments."""
    ms = catalog_measures()
    seg, arc, box, fat = ms["segment"], ms["arc"], ms["box"], ms["cantor_fat"]
    return [
        ("segment", seg, coordinate_field(seg, 0), [ensemble_from_config(SLIDING_SEGMENT)]),
        ("segment", seg, coordinate_field(seg, 1), [ensemble_from_config(SLIDING_SEGMENT)]),
        ("arc", arc, coordinate_field(arc, 0), [ensemble_from_config(ARC_SLIDE, arc)]),
        ("box", box, coordinate_field(box, 0), [ensemble_from_config(SLIDING_SHEET)]),
        ("cantor_fat", fat, coordinate_field(fat, 0), [ensemble_from_config(FAT_SLIDE)]),
        ("cantor_fat", fat, constant_field(fat, 1.0), []),
        ("atoms", ms["atoms"], coordinate_field(ms["atoms"], 0), []),
    ]
