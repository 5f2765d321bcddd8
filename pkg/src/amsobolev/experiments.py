"""Experiment configs, runners, presets and deterministic report writing."""

from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np

from . import catalog
from .closability import (
    NOT_CLOSABLE,
    identity_gap_check,
    transversal_counterexample,
    verify_certificate,
)
from .energy import CSV_COLUMNS, energy_am, energy_lip, parallelogram_defect, sobolev_norm
from .errors import CertificateError, ConfigError, EvaluationError, InvariantViolation
from .fields import NormPlugin, field_from_config
from .measure import measure_from_config
from .relax import SANDWICH_SLACK, assemble_cheeger_interval, relax_sequence
from .testplan import (
    am_gradient_norm,
    chain_rule_residual,
    check_compression,
    check_tangency,
    check_wug,
    ensemble_from_config,
    kinetic_energy,
)

KINDS = ("energy", "defect", "sandwich", "plan-check", "relax", "closability")
HILBERT_TOL = 1e-10

_KEYS = {
    "kind", "name", "measure", "fields", "functional", "p", "resolution", "ensembles",
    "constructors", "stages", "sweep", "seed", "expect",
}
_BATCH_KEYS = {"experiments", "seed", "resolution_scale", "name"}


@dataclass(frozen=True)
class ExperimentConfig:
    """Fully resolved experiment: every catalog reference expanded, resolution explicit."""

    kind: str
    name: str
    measure: dict
    fields: tuple
    functional: str
    p: str
    resolution: tuple
    ensembles: tuple
    constructors: tuple
    stages: tuple | None
    sweep: int
    seed: int
    expect: dict

    def to_dict(self):
        out = asdict(self)
        out["resolution"] = list(self.resolution)
        out["fields"] = list(self.fields)
        out["ensembles"] = list(self.ensembles)
        out["constructors"] = list(self.constructors)
        out["stages"] = None if self.stages is None else list(self.stages)
        return out


class ConfigErrors(ConfigError):
    """Several schema violations at once."""

    def __init__(self, errors):
        self.errors = list(errors)
        ValueError.__init__(self, "; ".join(str(e) for e in self.errors))
        self.path = self.errors[0].path if self.errors else "$"


# ----------------------------------------------------------------- parsing


def _resolve_measure(ref, path):
    if isinstance(ref, str):
        ms = catalog.catalog_measures()
        if ref not in ms:
            raise ConfigError(f"unknown catalog measure {ref!r} (known: {', '.join(ms)})", path)
        return ms[ref]
    return measure_from_config(ref, path)


def _resolve_field(ref, mu, path):
    """Field references: 'x<i>' is the coordinate times the measure's cutoff, 'one' the cutoff."""
    if isinstance(ref, str):
        if ref == "one":
            return catalog.constant_field(mu)
        if ref.startswith("x") and ref[1:].isdigit() and int(ref[1:]) < mu.dim:
            return catalog.coordinate_field(mu, int(ref[1:]))
        raise ConfigError(f"unknown field reference {ref!r}", path)
    f = field_from_config(ref, path)
    if f.dim != mu.dim:
        raise ConfigError(f"field lives in R^{f.dim}, measure in R^{mu.dim}", path)
    if f.support is None:
        raise ConfigError("field must be compactly supported (wrap it in a cutoff)", path)
    return f


def _resolve_ensemble(ref, mu, path):
    if isinstance(ref, str):
        if ref not in catalog.ENSEMBLES:
            raise ConfigError(f"unknown catalog ensemble {ref!r}", path)
        ref = catalog.ENSEMBLES[ref]
    plan = ensemble_from_config(ref, mu, path)
    if plan.dim != mu.dim:
        raise ConfigError(f"ensemble lives in R^{plan.dim}, measure in R^{mu.dim}", path)
    return dict(ref)


def parse_experiment(doc, path="$", seed=0, scale=1.0):
    if not isinstance(doc, dict):
        raise ConfigError("experiment must be an object", path)
    unknown = set(doc) - _KEYS
    if unknown:
        raise ConfigError(f"unknown keys {sorted(unknown)}", path)
    kind = doc.get("kind")
    if kind not in KINDS:
        raise ConfigError(f"kind must be one of {KINDS}, got {kind!r}", path + ".kind")
    if "measure" not in doc:
        raise ConfigError("missing key 'measure'", path)
    mu = _resolve_measure(doc["measure"], path + ".measure")
    fields = tuple(
        _resolve_field(r, mu, f"{path}.fields[{i}]").descriptor for i, r in enumerate(doc.get("fields", []))
    )
    functional = doc.get("functional", "E_AM")
    if functional not in ("E_AM", "E_lip"):
        raise ConfigError("functional must be 'E_AM' or 'E_lip'", path + ".functional")
    try:
        p = NormPlugin.parse(doc.get("p", 2)).label
    except ValueError as exc:
        raise ConfigError(str(exc), path + ".p") from None
    try:
        res = mu.resolve(doc.get("resolution"))
        if scale != 1.0:
            res = mu.refine(res, scale)
    except ValueError as exc:
        raise ConfigError(str(exc), path + ".resolution") from None
    ensembles = tuple(
        _resolve_ensemble(r, mu, f"{path}.ensembles[{i}]") for i, r in enumerate(doc.get("ensembles", []))
    )
    constructors = tuple(doc.get("constructors", ["trivial", "plateau"]))
    bad = [c for c in constructors if c not in ("trivial", "plateau")]
    if bad:
        raise ConfigError(f"unknown constructors {bad}", path + ".constructors")
    stages = doc.get("stages")
    if stages is not None:
        if not all(isinstance(s, int) and s >= 0 for s in stages):
            raise ConfigError("stages must be non-negative integers", path + ".stages")
        stages = tuple(stages)
    sweep = doc.get("sweep", 0)
    if not isinstance(sweep, int) or sweep < 0:
        raise ConfigError("sweep must be a non-negative integer", path + ".sweep")
    if kind == "defect" and len(fields) % 2:
        raise ConfigError("defect experiments take fields in pairs", path + ".fields")
    if kind in ("energy", "sandwich", "relax") and not fields:
        raise ConfigError(f"{kind} experiments need at least one field", path + ".fields")
    expect = doc.get("expect", {})
    if not isinstance(expect, dict):
        raise ConfigError("expect must be an object", path + ".expect")
    return ExperimentConfig(
        kind, doc.get("name", f"{kind}-{mu.name}"), mu.config(), fields, functional, p, res, ensembles,
        constructors, stages, sweep, int(doc.get("seed", seed)), expect,
    )


def parse_batch(doc, seed=None, scale=None):
    """Accept either one experiment or ``{"experiments": [...]}``; collect every schema error."""
    if isinstance(doc, dict) and "experiments" in doc:
        unknown = set(doc) - _BATCH_KEYS
        errors = [ConfigError(f"unknown keys {sorted(unknown)}", "$")] if unknown else []
        items = [(f"$.experiments[{i}]", e) for i, e in enumerate(doc["experiments"])]
        batch_seed = doc.get("seed", 0) if seed is None else seed
        batch_scale = doc.get("resolution_scale", 1.0) if scale is None else scale
    else:
        errors, items = [], [("$", doc)]
        batch_seed = 0 if seed is None else seed
        batch_scale = 1.0 if scale is None else scale
    out = []
    for path, e in items:
        try:
            exp = parse_experiment(e, path, batch_seed, float(batch_scale))
            if seed is not None:
                exp = ExperimentConfig(**{**exp.__dict__, "seed": seed})
            out.append(exp)
        except ConfigError as exc:
            errors.append(exc)
        except (TypeError, KeyError, ValueError) as exc:
            errors.append(ConfigError(f"invalid value: {exc}", path))
    if errors:
        raise ConfigErrors(errors)
    names = [e.name for e in out]
    dupes = sorted({n for n in names if names.count(n) > 1})
    if dupes:
        raise ConfigErrors([ConfigError(f"duplicate experiment names {dupes}", "$.experiments")])
    return out, int(batch_seed), float(batch_scale)


# ----------------------------------------------------------------- results


@dataclass
class ExperimentResult:
    name: str
    kind: str
    status: str  # PASS, COMPLETE, VIOLATION, ERROR
    summary: str
    report: dict
    tables: dict  # table name -> (columns, rows)

    @property
    def failed(self):
        return self.status in ("VIOLATION", "ERROR")


class _Checks:
    def __init__(self):
        self.failures = []

    def require(self, ok, message):
        if not ok:
            self.failures.append(message)
        return ok


def _fields(cfg, mu):
    return [field_from_config(d) for d in cfg.fields]


def _energy_rows(mu, f, cfg):
    res = cfg.resolution
    reps = [energy_am(f, mu, res), energy_lip(f, mu, resolution=res)]
    if cfg.p != "2":
        reps.append(energy_lip(f, mu, NormPlugin.parse(cfg.p), res))
    return reps


def _run_energy(cfg, mu, checks):
    rows, entries = [], []
    for f in _fields(cfg, mu):
        reps = _energy_rows(mu, f, cfg)
        e_am, e_lip2 = reps[0].value, reps[1].value
        checks.require(e_am <= e_lip2 + SANDWICH_SLACK * (1 + e_lip2), f"E_AM > E_lip(2) for {f.name}")
        rows.extend(r.row() for r in reps)
        entries.append({"field": f.descriptor, "energies": [r.to_dict() for r in reps],
                        "sobolev_norm": sobolev_norm(f, mu, resolution=cfg.resolution)})
    return {"results": entries}, {"energies": (CSV_COLUMNS, rows)}, f"{len(entries)} field(s)"


def _run_defect(cfg, mu, checks):
    fs = _fields(cfg, mu)
    pairs = [(fs[i], fs[i + 1], False) for i in range(0, len(fs), 2)]
    pairs += [(f, g, True) for f, g in catalog.random_pairs(mu, cfg.sweep, cfg.seed)]
    rows, entries, worst = [], [], 0.0
    exp = cfg.expect
    for f, g, swept in pairs:
        rep = parallelogram_defect(cfg.functional, f, g, mu, cfg.resolution, cfg.p)
        rows.extend(rep.rows())
        entries.append(dict(rep.to_dict(), swept=swept))
        worst = max(worst, rep.relative)
        if cfg.functional == "E_AM":
            checks.require(rep.relative <= HILBERT_TOL, f"E_AM relative defect {rep.relative:.3e} on {rep.f}|{rep.g}")
        if "defect" in exp and not swept:
            tol = exp.get("atol", 1e-9)
            checks.require(abs(rep.defect - exp["defect"]) <= tol,
                           f"defect {rep.defect!r} differs from expected {exp['defect']} (atol {tol})")
    report = {"pairs": entries, "max_relative_defect": worst}
    return report, {"defects": (CSV_COLUMNS, rows)}, f"{len(pairs)} pair(s), max relative defect {worst:.3e}"


def _plans(cfg, mu):
    return [ensemble_from_config(doc, mu) for doc in cfg.ensembles]


def _run_sandwich(cfg, mu, checks):
    plans = _plans(cfg, mu)
    cols = ("field", "e_ch_lower", "e_ch_upper", "e_am", "e_lip")
    rows, entries = [], []
    for f in _fields(cfg, mu):
        iv = assemble_cheeger_interval(f, mu, plans, cfg.constructors, cfg.resolution, cfg.stages)
        e_lip = energy_lip(f, mu, resolution=cfg.resolution).value
        chain = [iv.lower, iv.upper, iv.e_am, e_lip]
        for a, b in zip(chain, chain[1:]):
            checks.require(a <= b + SANDWICH_SLACK * (1 + abs(b)), f"sandwich order broken for {f.name}: {chain}")
        rows.append({"field": f.name, "e_ch_lower": iv.lower, "e_ch_upper": iv.upper, "e_am": iv.e_am, "e_lip": e_lip})
        entries.append(dict(iv.to_dict(), field=f.descriptor, e_lip=e_lip))
    exp = cfg.expect
    if "interval" in exp and rows:
        lo, hi = exp["interval"]
        tol = exp.get("atol", 1e-9)
        checks.require(abs(rows[0]["e_ch_lower"] - lo) <= tol and abs(rows[0]["e_ch_upper"] - hi) <= tol,
                       f"interval [{rows[0]['e_ch_lower']}, {rows[0]['e_ch_upper']}] differs from {exp['interval']}")
    summary = "; ".join(f"{r['field']}: [{r['e_ch_lower']:.6g}, {r['e_ch_upper']:.6g}]" for r in rows)
    return {"results": entries}, {"sandwich": (cols, rows)}, summary


def _run_plan_check(cfg, mu, checks):
    cols = ("ensemble", "field", "check", "passed", "value")
    rows, entries = [], []
    fs = _fields(cfg, mu)
    for k, plan in enumerate(_plans(cfg, mu)):
        comp = check_compression(plan, mu, resolution=cfg.resolution)
        tang = check_tangency(plan, mu, cfg.resolution)
        ke = kinetic_energy(plan)
        label = cfg.ensembles[k]["type"] + f"#{k}"
        rows += [
            {"ensemble": label, "field": "", "check": "compression", "passed": comp.passed, "value": comp.max_ratio},
            {"ensemble": label, "field": "", "check": "tangency", "passed": tang.passed, "value": tang.max_residual},
            {"ensemble": label, "field": "", "check": "kinetic_energy", "passed": True, "value": ke},
        ]
        entry = {"ensemble": cfg.ensembles[k], "compression": comp.to_dict(), "tangency": tang.to_dict(),
                 "kinetic_energy": ke, "fields": []}
        admissible = comp.passed and tang.passed
        for f in fs:
            wug = check_wug(f, am_gradient_norm(f, mu, cfg.resolution), plan)
            chain = chain_rule_residual(f, plan, mu, cfg.resolution) if tang.passed else None
            rows.append({"ensemble": label, "field": f.name, "check": "wug", "passed": wug.passed,
                         "value": wug.max_violation})
            if admissible:
                checks.require(wug.passed, f"|grad_AM f| is not a weak upper gradient along {label} for {f.name}")
            entry["fields"].append({"field": f.descriptor, "wug": wug.to_dict(), "chain_rule_residual": chain})
        want = cfg.expect.get(str(k), {})
        for key, rep in (("compression", comp), ("tangency", tang)):
            if key in want:
                checks.require(rep.passed == want[key], f"{label}: {key} passed={rep.passed}, expected {want[key]}")
        entries.append(entry)
    n_ok = sum(1 for e in entries if e["compression"]["passed"] and e["tangency"]["passed"])
    return {"ensembles": entries}, {"plan_checks": (cols, rows)}, f"{n_ok}/{len(entries)} ensemble(s) admissible"


def _decay_ratio(stages):
    errs = [s["l2_error"] for s in stages]
    ratios = [b / a for a, b in zip(errs, errs[1:]) if a > 0]
    return max(ratios) if ratios else 0.0


def _run_relax(cfg, mu, checks):
    cols = ("field", "constructor", "stage", "l2_error", "e_am", "e_lip")
    rows, entries = [], []
    for f in _fields(cfg, mu):
        for name in cfg.constructors:
            cert = relax_sequence(f, mu, name, cfg.resolution, cfg.stages)
            entry = dict(cert.to_dict(), decay_ratio=_decay_ratio(cert.stages))
            entries.append(entry)
            rows += [dict(field=f.name, **r) for r in cert.rows()]
            exp = cfg.expect.get(name, {})
            if "e_ch_upper" in exp:
                checks.require(cert.e_ch_upper <= exp["e_ch_upper"] + exp.get("atol", 0.0),
                               f"{name}: E_Ch_upper {cert.e_ch_upper} above {exp['e_ch_upper']}")
            if "decay_ratio_max" in exp:
                checks.require(entry["decay_ratio"] <= exp["decay_ratio_max"],
                               f"{name}: L2 decay ratio {entry['decay_ratio']:.3f} above {exp['decay_ratio_max']}")
    ups = [e["e_ch_upper"] for e in entries if e["applicable"]]
    return {"certificates": entries}, {"stages": (cols, rows)}, f"E_Ch_upper = {min(ups) if ups else math.inf:.6g}"


def _run_closability(cfg, mu, checks):
    plans = _plans(cfg, mu)
    certs = [("transversal", None, transversal_counterexample(mu, cfg.resolution))]
    for f in _fields(cfg, mu):
        certs.append(("identity_gap", f.name, identity_gap_check(f, mu, cfg.resolution, plans, cfg.constructors,
                                                                  cfg.stages)))
    cols = ("check", "field", "verdict", "witness", "v_norm", "e_ch_upper", "e_lip", "gap", "verified")
    scols = ("check", "stage", "f_l2", "grad_err", "l2_error", "e_am", "e_lip")
    rows, stage_rows, entries = [], [], []
    for check, fname, cert in certs:
        ver = verify_certificate(cert, mu) if cert.verdict == NOT_CLOSABLE else None
        if ver is not None:
            checks.require(ver.passed, f"{check} certificate fails verification: {ver.reasons}")
        rows.append({"check": check, "field": fname or "", "verdict": cert.verdict, "witness": cert.witness_kind or "",
                     "v_norm": cert.v_norm, "e_ch_upper": cert.e_ch_upper, "e_lip": cert.e_lip, "gap": cert.gap,
                     "verified": "" if ver is None else ver.passed})
        for s in cert.stages:
            stage_rows.append({"check": check, **{k: s.get(k) for k in scols if k != "check"}})
        entries.append({"check": check, "certificate": cert.to_dict(),
                        "verification": None if ver is None else ver.to_dict()})
    want = cfg.expect.get("verdicts", {})
    for check, _, cert in certs:
        if check in want:
            checks.require(cert.verdict == want[check], f"{check}: verdict {cert.verdict}, expected {want[check]}")
    summary = ", ".join(f"{c}={cert.verdict}" for c, _, cert in certs)
    return {"certificates": entries}, {"certificates": (cols, rows), "certificate_stages": (scols, stage_rows)}, summary


_RUNNERS = {
    "energy": _run_energy,
    "defect": _run_defect,
    "sandwich": _run_sandwich,
    "plan-check": _run_plan_check,
    "relax": _run_relax,
    "closability": _run_closability,
}


def run_experiment(cfg):
    mu = measure_from_config(cfg.measure)
    checks = _Checks()
    base = {"config": cfg.to_dict()}
    try:
        report, tables, summary = _RUNNERS[cfg.kind](cfg, mu, checks)
    except InvariantViolation as exc:
        return ExperimentResult(cfg.name, cfg.kind, "VIOLATION", str(exc), dict(base, violations=[str(exc)]), {})
    except (EvaluationError, CertificateError) as exc:
        witness = {"error": str(exc), "index": getattr(exc, "index", None)}
        return ExperimentResult(cfg.name, cfg.kind, "ERROR", str(exc), dict(base, witness=witness), {})
    # relax runs without expectations have nothing to pass or fail
    if checks.failures:
        status = "VIOLATION"
    elif cfg.kind == "relax" and not cfg.expect:
        status = "COMPLETE"
    else:
        status = "PASS"
    if checks.failures:
        summary = f"{summary} | " + "; ".join(checks.failures)
    report = dict(base, **report, status=status, violations=checks.failures)
    return ExperimentResult(cfg.name, cfg.kind, status, summary, report, tables)


def run_batch(configs, workers=None):
    """Run experiments concurrently; results keep the input order."""
    workers = workers or min(4, max(1, len(configs)))
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(run_experiment, configs))


# ----------------------------------------------------------------- presets


def preset_hilbertianity_defect():
    exps = []
    for name, mu in catalog.catalog_measures().items():
        pair = ["x0", "x1"] if mu.dim >= 2 else ["x0", "one"]
        exps.append({"kind": "defect", "name": f"defect-am-{name}", "measure": name, "fields": pair,
                     "functional": "E_AM", "sweep": 10})
    exps.append({"kind": "defect", "name": "defect-lipinf-box", "measure": "box", "fields": ["x0", "x1"],
                 "functional": "E_lip", "p": "inf", "expect": {"defect": 2.0, "atol": 1e-9}})
    exps.append({"kind": "defect", "name": "defect-lip2-box", "measure": "box", "fields": ["x0", "x1"],
                 "functional": "E_lip", "p": 2, "expect": {"defect": 0.0, "atol": 1e-9}})
    return {"name": "hilbertianity-defect", "experiments": exps}


def preset_cantor_gap():
    return {"name": "cantor-gap", "experiments": [
        {"kind": "relax", "name": "cantor-gap-fat", "measure": "cantor_fat", "fields": ["x0"],
         "constructors": ["trivial", "plateau"],
         "expect": {"plateau": {"e_ch_upper": 0.0, "decay_ratio_max": 0.6}}},
        {"kind": "relax", "name": "cantor-gap-classic", "measure": "cantor_classic", "fields": ["x0"],
         "constructors": ["trivial", "plateau"],
         "expect": {"plateau": {"e_ch_upper": 0.0, "decay_ratio_max": 0.6}}},
    ]}


def preset_fukushima():
    return {"name": "fukushima", "experiments": [
        {"kind": "closability", "name": "fukushima-segment", "measure": "segment",
         "expect": {"verdicts": {"transversal": "NOT_CLOSABLE"}}},
        {"kind": "closability", "name": "fukushima-cantor-fat", "measure": "cantor_fat", "fields": ["x0"],
         "expect": {"verdicts": {"identity_gap": "NOT_CLOSABLE"}}},
        {"kind": "closability", "name": "fukushima-box", "measure": "box", "fields": ["x0"],
         "expect": {"verdicts": {"transversal": "NO_COUNTEREXAMPLE_FOUND",
                                 "identity_gap": "NO_COUNTEREXAMPLE_FOUND"}}},
    ]}


PRESETS = {
    "hilbertianity-defect": preset_hilbertianity_defect,
    "cantor-gap": preset_cantor_gap,
    "fukushima": preset_fukushima,
}


# ----------------------------------------------------------------- output


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if math.isfinite(x) else repr(x)
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    return x


def _cell(v):
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def csv_text(columns, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_cell(r.get(c)) for c in columns])
    return buf.getvalue()


def atomic_write(path, text):
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_outputs(results, out_dir, batch_info):
    """report.json plus one CSV per (experiment, table).  Returns the written paths."""
    paths = []
    for r in results:
        for tname, (cols, rows) in r.tables.items():
            p = os.path.join(out_dir, f"{r.name}.{tname}.csv")
            atomic_write(p, csv_text(cols, rows))
            paths.append(p)
    doc = dict(batch_info, experiments=[dict(r.report, name=r.name, kind=r.kind, status=r.status,
                                             summary=r.summary) for r in results])
    p = os.path.join(out_dir, "report.json")
    atomic_write(p, json.dumps(_jsonable(doc), indent=2) + "\n")
    paths.append(p)
    return paths


def exit_status(results):
    return 2 if any(r.failed for r in results) else 0


__all__ = [
    "ExperimentConfig", "ExperimentResult", "KINDS", "PRESETS", "parse_batch", "parse_experiment",
    "run_batch", "run_experiment", "write_outputs", "exit_status", "csv_text", "atomic_write",
]
