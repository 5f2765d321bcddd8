"""One test per acceptance criterion; each prints a PASS/FAIL line."""

import math
import time
from pathlib import Path

import numpy as np
import pytest

import conftest
from amsobolev import catalog
from amsobolev.bundle import assign_bundle
from amsobolev.cli import main
from amsobolev.closability import (
    NO_COUNTEREXAMPLE_FOUND,
    NOT_CLOSABLE,
    build_sequence,
    identity_gap_check,
    transversal_counterexample,
    verify_certificate,
)
from amsobolev.energy import energy_am, energy_lip, parallelogram_defect
from amsobolev.experiments import PRESETS
from amsobolev.fields import Bump, NormPlugin, gradient_check, lip
from amsobolev.measure import l2_norm, quadrature
from amsobolev.relax import assemble_cheeger_interval, plateau_sequence, relax_sequence
from amsobolev.testplan import am_gradient_norm, check_compression, check_tangency, check_wug, ensemble_from_config
from oracles import (
    classic_cantor_intervals,
    fat_cantor_intervals,
    interval_moment,
    sampled_slope,
)

MS = catalog.catalog_measures()
SLACK = 1e-10


@pytest.fixture
def criterion(request):
    """Collects (ok, detail) checks and reports one PASS/FAIL line at teardown."""
    checks = []
    t0 = time.perf_counter()

    def check(ok, detail):
        checks.append((bool(ok), detail))
        return ok

    check.t0 = t0
    yield check
    failed = [d for ok, d in checks if not ok]
    status = "PASS" if checks and not failed else "FAIL"
    label = request.node.function.__doc__.strip().splitlines()[0]
    elapsed = time.perf_counter() - t0
    line = f"{status} {label} [{elapsed:.2f}s]" + (f" :: {failed[0]}" if failed else "")
    print(line)
    conftest.ACCEPTANCE_LINES.append(line)


def finish(check, budget):
    elapsed = time.perf_counter() - check.t0
    assert check(elapsed < budget, f"runtime {elapsed:.2f}s >= {budget}s")


def test_criterion_1_projection_linearity(criterion):
    """1 projection/linearity exactness"""
    worst_lin, worst_dom = 0.0, 0.0
    for name, mu in MS.items():
        bundle = assign_bundle(mu)
        nodes = bundle.rule.nodes
        for f, g in catalog.random_pairs(mu, 100, seed=1):
            gf, gg = f.grad(nodes), g.grad(nodes)
            a = bundle.project_nodes(gf)
            b = bundle.project_nodes(gg)
            s = bundle.project_nodes((f + g).grad(nodes))
            scale = 1.0 + np.abs(a).max() + np.abs(b).max()
            worst_lin = max(worst_lin, float(np.abs(s - a - b).max()) / scale)
            excess = np.linalg.norm(a, axis=1) - lip(f, nodes, NormPlugin(2.0))
            worst_dom = max(worst_dom, float(excess.max()))
    criterion(worst_lin <= 1e-12, f"linearity residual {worst_lin:.3e}")
    criterion(worst_dom <= 1e-12, f"|grad_AM f| - lip excess {worst_dom:.3e}")
    finish(criterion, 5.0)
    assert worst_lin <= 1e-12 and worst_dom <= 1e-12


def test_criterion_2_quadratic_form(criterion):
    """2 E_AM parallelogram defect on every catalog measure"""
    worst = 0.0
    for name, mu in MS.items():
        for f, g in catalog.random_pairs(mu, 100, seed=2):
            worst = max(worst, parallelogram_defect("E_AM", f, g, mu).relative)
    criterion(worst <= 1e-10, f"max relative defect {worst:.3e}")
    finish(criterion, 10.0)
    assert worst <= 1e-10


def test_criterion_3_non_hilbertian_contrast(criterion):
    """3 E_lip(inf) defect 2 on the box, E_lip(2) defect 0"""
    box = MS["box"]
    f, g = catalog.coordinate_field(box, 0), catalog.coordinate_field(box, 1)
    d_inf = parallelogram_defect("E_lip", f, g, box, p="inf").defect
    d_two = parallelogram_defect("E_lip", f, g, box, p=2).defect
    criterion(abs(d_inf - 2.0) <= 1e-9, f"p=inf defect {d_inf!r}")
    criterion(abs(d_two) <= 1e-9, f"p=2 defect {d_two!r}")
    assert abs(d_inf - 2.0) <= 1e-9 and abs(d_two) <= 1e-9


def test_criterion_4_cantor_gap(criterion):
    """4 fat Cantor gap at depth 12"""
    fat = MS["cantor_fat"]
    f = catalog.coordinate_field(fat, 0)
    cert = relax_sequence(f, fat, "plateau")
    errs = [s["l2_error"] for s in cert.stages]
    ratios = [b / a for a, b in zip(errs, errs[1:]) if a > 0 and b > 0]
    e_am = energy_am(f, fat).value
    # derived: sum over stage intervals of (1/2) * length, stage mass 1/2 + 2^(-13)
    derived = 0.5 * float(sum(ell for _, ell in fat_cantor_intervals(12)))
    ok = [
        criterion(cert.e_ch_upper == 0.0, f"E_Ch_upper {cert.e_ch_upper!r}"),
        criterion(ratios and max(ratios) <= 0.6, f"decay ratios {ratios}"),
        criterion(0.2 <= e_am <= 0.26, f"E_AM {e_am!r}"),
        criterion(abs(e_am - derived) <= 1e-12, f"E_AM {e_am!r} vs derived {derived!r}"),
        criterion(abs(e_am - 0.25) <= 1e-4, f"E_AM {e_am!r} not near 0.25"),
    ]
    finish(criterion, 5.0)
    assert all(ok)


def test_criterion_5_sandwich(criterion):
    """5 sandwich E_Ch_lower <= E_Ch_upper <= E_AM <= E_lip(2)"""
    ok = True
    for name, mu, f, plans in catalog.curated_cases():
        iv = assemble_cheeger_interval(f, mu, plans)
        e_lip = energy_lip(f, mu).value
        chain = [iv.lower, iv.upper, iv.e_am, e_lip]
        ordered = all(b - a >= -SLACK * (1 + abs(b)) for a, b in zip(chain, chain[1:]))
        ok &= bool(criterion(ordered, f"{name} {f.name}: {chain}"))
    seg = MS["segment"]
    iv = assemble_cheeger_interval(
        catalog.coordinate_field(seg, 0), seg, [ensemble_from_config(catalog.SLIDING_SEGMENT)]
    )
    exact = abs(iv.lower - 0.25) <= SLACK and abs(iv.upper - 0.5) <= SLACK
    ok &= bool(criterion(exact, f"segment interval [{iv.lower!r}, {iv.upper!r}]"))
    finish(criterion, 5.0)
    assert ok


def test_criterion_6_test_plans(criterion):
    """6 sliding ensemble admissible, transversal ensemble refused"""
    seg = MS["segment"]
    plan = ensemble_from_config(catalog.SLIDING_SEGMENT)
    comp = check_compression(plan, seg)
    tang = check_tangency(plan, seg)
    ok = [
        criterion(comp.passed and abs(comp.max_ratio - 2.0) <= 0.2, f"compression ratio {comp.max_ratio}"),
        criterion(tang.passed and tang.max_residual <= 1e-9, f"tangency residual {tang.max_residual}"),
    ]
    fields = [f for name, _, f, _ in catalog.curated_cases() if name == "segment"]
    rng = np.random.default_rng(6)
    fields += [catalog.random_field(rng, seg) for _ in range(10)]
    for f in fields:
        wug = check_wug(f, am_gradient_norm(f, seg), plan)
        ok.append(criterion(wug.passed, f"WUG fails for {f.name}: {wug.fraction_ok}"))
    bad = ensemble_from_config(catalog.TRANSVERSAL)
    bt, bc = check_tangency(bad, seg), check_compression(bad, seg)
    ok.append(criterion(not bt.passed and bt.witness, "transversal tangency not refused"))
    ok.append(criterion(not bc.passed and bc.witness, "transversal compression not refused"))
    finish(criterion, 5.0)
    assert all(ok)


def test_criterion_7_closability(criterion):
    """7 closability certificates and re-verification"""
    seg, fat, box = MS["segment"], MS["cantor_fat"], MS["box"]
    c_seg = transversal_counterexample(seg)
    last = c_seg.stages[-1] if c_seg.stages else {}
    ok = [
        criterion(c_seg.verdict == NOT_CLOSABLE and c_seg.witness_kind == "sequence", "segment verdict"),
        criterion(all(s["f_l2"] == 0.0 for s in c_seg.stages), "segment ||f_n|| != 0"),
        criterion(last.get("grad_err", 1.0) <= 1e-12, f"segment grad error {last.get('grad_err')}"),
        criterion(c_seg.v_norm is not None and abs(c_seg.v_norm - 1.0) <= 1e-12, f"|v| = {c_seg.v_norm}"),
    ]
    c_fat = identity_gap_check(catalog.coordinate_field(fat, 0), fat)
    ok.append(criterion(c_fat.verdict == NOT_CLOSABLE and c_fat.gap >= 0.2, f"fat gap {c_fat.gap}"))
    c_box = transversal_counterexample(box)
    g_box = identity_gap_check(catalog.coordinate_field(box, 0), box)
    ok.append(criterion(c_box.verdict == g_box.verdict == NO_COUNTEREXAMPLE_FOUND, "box verdict"))
    for name, cert, mu in (("segment", c_seg, seg), ("fat", c_fat, fat)):
        v = verify_certificate(cert, mu)
        ok.append(criterion(v.passed, f"{name} re-verification: {v.reasons}"))
    finish(criterion, 10.0)
    assert all(ok)


def _all_analytic_fields():
    rng = np.random.default_rng(8)
    out = []
    for mu in MS.values():
        out += [catalog.random_field(rng, mu) for _ in range(4)]
    out.append(Bump([[0, 1], [0, 1]], [[-1, 2], [-1, 2]]))
    fat = MS["cantor_fat"]
    out.append(plateau_sequence(catalog.coordinate_field(fat, 0), fat.components[0][1], 3))
    for name in ("segment", "arc", "cantor_classic"):
        cert = transversal_counterexample(MS[name])
        out.append(build_sequence(cert.constructor, cert.constructor["stages"][0]))
    return out


def test_criterion_8_oracle_cross_checks(criterion):
    """8 finite differences, slope oracle, Cantor interval oracle"""
    rng = np.random.default_rng(9)
    ok = []
    for f in _all_analytic_fields():
        box = np.asarray(f.support, dtype=float)
        pts = rng.uniform(box[:, 0], box[:, 1], size=(64, f.dim))
        e3, e4 = gradient_check(f, pts, (1e-3, 1e-4))
        ok.append(criterion(e4 <= max(e3 / 50.0, 5e-10), f"FD scaling {f.name}: {e3:.2e} -> {e4:.2e}"))
    worst = 0.0
    for p in (1.0, 2.0, math.inf):
        for mu in MS.values():
            f = catalog.random_field(rng, mu)
            box = np.asarray(f.support, dtype=float)
            for x in rng.uniform(box[:, 0], box[:, 1], size=(4, f.dim)):
                exact = float(lip(f, x, NormPlugin(p)))
                if exact < 1e-2:
                    continue
                worst = max(worst, abs(sampled_slope(f.value, x, 1e-4, p=p) / exact - 1.0))
    ok.append(criterion(worst <= 0.05, f"slope oracle relative gap {worst:.3e}"))
    fat, cl = MS["cantor_fat"], MS["cantor_classic"]
    x2 = lambda pts: pts[:, 0] ** 2  # noqa: E731
    q_fat = float(np.sum(quadrature(fat).weights * x2(quadrature(fat).nodes)))
    o_fat = float(interval_moment(fat_cantor_intervals(12), 2))
    q_cl = float(np.sum(quadrature(cl).weights * x2(quadrature(cl).nodes)))
    from fractions import Fraction

    o_cl = float(interval_moment(classic_cantor_intervals(12), 2, density=lambda ell: Fraction(1, 2**12) / ell))
    ok.append(criterion(abs(q_fat - o_fat) <= 1e-9, f"fat Cantor moment {q_fat!r} vs {o_fat!r}"))
    ok.append(criterion(abs(q_cl - o_cl) <= 1e-9, f"classic Cantor moment {q_cl!r} vs {o_cl!r}"))
    assert all(ok)


def test_criterion_9_determinism(criterion, tmp_path):
    """9 preset battery is byte-identical across runs"""
    for run in ("a", "b"):
        for preset in sorted(PRESETS):
            main(["--preset", preset, "--seed", "1234", "--out", str(tmp_path / run / preset)])

    def snapshot(root):
        return {str(p.relative_to(root)): p.read_bytes() for p in sorted(Path(root).rglob("*")) if p.is_file()}

    a, b = snapshot(tmp_path / "a"), snapshot(tmp_path / "b")
    csvs = [k for k in a if k.endswith(".csv")]
    ok = criterion(csvs and a == b, "outputs differ between runs")
    assert ok
