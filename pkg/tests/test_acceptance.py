"""Acceptance suite: one test per criterion, each printing a single PASS/FAIL line.

Run on its own with

    pytest tests/test_acceptance.py -v -s

The heavy runs (oracle, walkers) are shared between criteria through
module-scoped fixtures.
"""
from pathlib import Path

import pytest

from curvqhd import runner, suites

CRITERIA = {
    1: "alpha reproduction",
    2: "Lambda_QC reproduction",
    3: "hydro/Schroedinger oracle equivalence on the unit sphere",
    4: "QC-term necessity for momentum balance",
    5: "flat-space free Gaussian width law",
    6: "walker/continuity-PDE consistency",
    7: "transport fidelity",
    8: "Gausson stationarity",
    9: "representability verdicts",
    10: "determinism of suite artifacts",
}


def report(capsys, number, checks):
    ok = all(c.passed for c in checks)
    detail = "; ".join(f"{c.name}: {c.value:.4g} {c.bound}" for c in checks)
    with capsys.disabled():
        print(f"\n{'PASS' if ok else 'FAIL'}  criterion {number} ({CRITERIA[number]}): {detail}")
    failed = [c.line() for c in checks if not c.passed]
    assert ok, "\n".join(failed)


@pytest.fixture(scope="module")
def cosmo_report():
    return suites.cosmo_reproduction()


@pytest.fixture(scope="module")
def oracle_report():
    return suites.oracle_equivalence()


def test_criterion_01_alpha(cosmo_report, capsys):
    report(capsys, 1, [c for c in cosmo_report.checks if c.name.startswith("alpha")])


def test_criterion_02_lambda_qc(cosmo_report, capsys):
    report(capsys, 2, [c for c in cosmo_report.checks if "Lambda" in c.name or "route" in c.name])


def test_criterion_03_oracle_equivalence(oracle_report, capsys):
    report(capsys, 3, [c for c in oracle_report.checks if "density" in c.name])


def test_criterion_04_qc_necessity(oracle_report, capsys):
    report(capsys, 4, [c for c in oracle_report.checks if "momentum" in c.name])


def test_criterion_05_flat_gaussian(capsys):
    report(capsys, 5, suites.flat_gaussian().checks)


def test_criterion_06_sde_pde(capsys):
    rep = suites.sde_pde_consistency(seed=0, workers=1)
    report(capsys, 6, [c for c in rep.checks if not c.name.startswith("backward")])


def test_criterion_07_transport(capsys):
    report(capsys, 7, suites.transport_fidelity().checks)


def test_criterion_08_gausson(capsys):
    report(capsys, 8, suites.gausson_stationarity().checks)


def test_criterion_09_representability(capsys):
    report(capsys, 9, suites.representability_verdicts().checks)


def _csv_bytes(d):
    return {p.name: p.read_bytes() for p in sorted(Path(d).glob("*.csv"))}


def test_criterion_10_determinism(tmp_path, capsys):
    from curvqhd.suites import Check

    checks = []
    for name, workers in (("quick", (1, 1)), ("transport", (1, 1)), ("sde", (1, 3))):
        a = runner.run_suite(name, tmp_path / f"{name}-a", seed=7, workers=workers[0])
        b = runner.run_suite(name, tmp_path / f"{name}-b", seed=7, workers=workers[1])
        fa, fb = _csv_bytes(a.out_dir), _csv_bytes(b.out_dir)
        differing = sorted(k for k in fa.keys() | fb.keys() if fa.get(k) != fb.get(k))
        label = f"{name} rerun (workers {workers[0]} vs {workers[1]}), differing CSV files"
        checks.append(Check(label, len(differing), f"== 0 of {len(fa)}", bool(fa) and not differing))
    report(capsys, 10, checks)


@pytest.mark.xfail(strict=True, reason="the coupling -1/2 matches the opposite Ricci sign convention; with the "
                                        "sphere-positive convention used here the oracle needs +1/2")
def test_criterion_03_with_negative_half_coupling():
    from curvqhd import geometry as geo, nlse, qhd

    finals = []
    for lev, n in enumerate((16, 32)):
        chart = geo.Chart.sphere2(1.0, n, 2 * n)
        rho = suites.sphere_density(chart)
        dt = 0.0036 / 2 ** lev
        steps = int(round(0.5 / dt))
        s = qhd.FluidState(chart, rho, 0 * chart.g)
        w = nlse.WaveField(chart, rho.astype(complex) ** 0.5, gamma=-0.5)
        for _ in range(steps):
            s = qhd.step_fluid(s, dt=dt)
        w = nlse.evolve_nlse(w, dt, steps)
        finals.append(nlse.oracle_compare([s], [w]).density[0])
    assert finals[-1] < 1e-3 and 3 <= finals[0] / finals[1] <= 5
