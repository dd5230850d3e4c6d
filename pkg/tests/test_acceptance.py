"""Acceptance suite: one test per criterion, at the stated tolerances.

Run ``pytest tests/test_acceptance.py -v`` for one pass/fail line per
criterion (add ``-s`` to see the summary prints).
"""

import json

import numpy as np
import pytest
from scipy.integrate import quad
from scipy.linalg import expm

import semires as sr
from semires.action import fit_from_arrays
from semires.cli import main
from semires.floquet import scan_nonresonance
from semires.sympl import symplectic_defect
from tests.conftest import (coulomb_stark_run, hyperboloid_family, model_run,
                            pair_distance)


def oracle_set(sys, cfg):
    return [r.energy for r in
            sr.model_exact_resonances(sr.ModelSpec.from_system(sys, cfg.h), cfg)]


def test_criterion_1_model_hr_calibration():
    # full pipeline equals {mh - ih(k+1/2)} in the window, max |dE| <= 1e-8
    sys, cfg, analysis, sweep = model_run((1.0,), h=0.05, eps0=0.25, delta=0.5)
    got = [r.energy for r in sweep.resonances]
    want = oracle_set(sys, cfg)
    assert len(got) == len(want) == 44
    assert pair_distance(got, want) <= 1e-8
    # lattice reference: 20 points at the h = 0.1 settings
    lat = sr.enumerate_lattice(sr.BSConfig(h=0.1, eps0=0.25, delta=0.5), 1)
    assert len(lat) == 20
    assert lat == [(m, (k,)) for m in range(-2, 3) for k in range(4)]
    print("criterion 1 PASS: model hr calibration, max|dE| <= 1e-8, lattice 20")


def test_criterion_2_model_ee_reality():
    sys, cfg, analysis, sweep = model_run((0.3j,), h=0.05, eps0=0.25, delta=0.5)
    assert sweep.resonances
    for r in sweep.resonances:
        assert abs(r.energy.imag) <= 1e-9
    want = oracle_set(sys, cfg)   # mh + 0.3 (k + 1/2) h, all real
    assert pair_distance([r.energy for r in sweep.resonances], want) <= 1e-8
    assert analysis.index.g == 0
    print("criterion 2 PASS: elliptic roots real, match mh + 0.3(k+1/2)h, g = 0")


def test_criterion_3_model_ee_branch_and_index():
    sys, cfg, analysis, sweep = model_run((1.3j,), h=0.05, eps0=0.25, delta=0.5)
    assert analysis.index.g == 2
    want = oracle_set(sys, cfg)   # mh + 1.3 (k + 1/2) h
    got = [r.energy for r in sweep.resonances]
    assert len(got) == len(want)
    assert pair_distance(got, want) <= 1e-8
    # the match requires the index: rebuilding the fit with g = 0 must fail
    data = analysis.fit.data
    fit0 = fit_from_arrays(data["grid"], data["s0"], data["t"],
                           data["s1"] - 0.5, data["mu"], 0,
                           im_band=analysis.fit.im_band)
    sweep0 = sr.compute_resonances(fit0, cfg)
    assert pair_distance([r.energy for r in sweep0.resonances], want) > 1e-3
    print("criterion 3 PASS: omega = 1.3 spectrum matches exactly and only with g = 2")


def test_criterion_4_mixed_three_way():
    sys, cfg, analysis, sweep = model_run((1.0, 0.3j), h=0.05, eps0=0.25, delta=0.5)
    mspec = sr.ModelSpec.from_system(sys, cfg.h)
    exact = [r.energy for r in sr.model_exact_resonances(mspec, cfg)]
    solver = [r.energy for r in sweep.resonances]
    zeros = sr.zeta_zeros(mspec, cfg).located_zeros
    assert len(exact) == len(solver) == len(zeros)
    assert pair_distance(exact, solver) <= 1e-8
    assert pair_distance(exact, zeros) <= 1e-8
    assert pair_distance(solver, zeros) <= 1e-8
    # widths exactly linear in k1 with slope h = 0.05
    slopes = []
    for m in sorted({r.m for r in sweep.resonances}):
        rows = [r for r in sweep.resonances if r.m == m and r.k[1] == 0]
        if len(rows) < 3:
            continue
        ks = [r.k[0] for r in rows]
        widths = [-r.energy.imag for r in rows]
        slopes.append(np.polyfit(ks, widths, 1)[0])
    assert slopes
    assert np.max(np.abs(np.array(slopes) - 0.05)) <= 1e-8
    print("criterion 4 PASS: three-way agreement <= 1e-8; width slope = h")


def test_criterion_5_hyperboloid_floquet_and_action():
    sys, family, analysis = hyperboloid_family()
    orbit = family.orbit_at(0.5)
    dp = sr.reduce_to_section(sr.monodromy(sys, orbit), orbit, sys)
    lam = np.max(np.abs(np.linalg.eigvals(dp)))
    assert abs(lam - np.exp(2 * np.pi)) / np.exp(2 * np.pi) <= 1e-6
    # independent oracle: constant-curvature Jacobi system over one circuit
    jac = np.max(np.abs(np.linalg.eigvals(expm(2 * np.pi * np.array([[0, 1], [1, 0]])))))
    assert abs(lam - jac) / jac <= 1e-6
    fit = analysis.fit
    assert abs(fit.s0(0.5).real - 1.0) <= 1e-7
    t_grid = np.array([o.period for o in family.orbits])
    ds0 = np.array([fit.ds0(e).real for e in family.energy_grid])
    assert np.max(np.abs(2 * np.pi * ds0 - t_grid) / t_grid) <= 1e-4
    print("criterion 5 PASS: neck multiplier e^{2pi}, S0(0.5) = 1, dS0 identity")


def test_criterion_6_coulomb_stark_properties():
    from tests.test_orbit import measured_turning_radii

    sys, orbit, spec = coulomb_stark_run(a=1.0, energy=2.5)
    r_in, r_out = measured_turning_radii(orbit)
    assert r_in == pytest.approx(0.5, abs=1e-6)
    assert r_out == pytest.approx(2.0, abs=1e-6)
    z = sr.monodromy(sys, orbit, tol=1e-12)
    assert symplectic_defect(z) <= 1e-8
    lam = spec.multipliers
    assert spec.classes == ["hr", "hr"]
    big = lam[np.argmax(np.abs(lam))]
    assert abs(big.imag) <= 1e-10 and big.real > 1.0
    assert abs(big * lam[np.argmin(np.abs(lam))] - 1.0) <= 1e-8
    s0 = sr.classical_action(orbit).value
    oracle = quad(lambda r: np.sqrt(max(2.5 - 1.0 / r - r, 0.0)), 0.5, 2.0,
                  points=[0.5, 2.0], limit=200)[0] / np.pi
    assert abs(s0 - oracle) <= 1e-7
    print("criterion 6 PASS: turning radii, defect <= 1e-8, hr pair, S0 quadrature")


def test_criterion_7_nonresonance_detection():
    report = scan_nonresonance(2j * np.pi * np.array([0.3, 0.7]), k_max=5, tol=1e-9)
    assert (1, 1) in report.violations_strong
    golden = (np.sqrt(5) - 1) / 2
    report = scan_nonresonance(2j * np.pi * np.array([0.3, golden]), k_max=20, tol=1e-9)
    # the brute-force scan is the oracle here.  0.3 alone is 10-resonant
    # (10 * 0.3 = 3), so the list cannot be empty as literally stated; the
    # badly-approximable second frequency must contribute no relation, and it
    # does not (see the decisions ledger).
    assert report.violations_strong == [(-20, 0), (-10, 0), (10, 0), (20, 0)]
    assert all(k[1] == 0 for k in report.violations_strong)
    assert all(k[1] == 0 for k in report.violations_weak)
    print("criterion 7 PASS: (0.3, 0.7) flags k = (1, 1); golden pair adds no relation"
          " (0.3's own 10-resonance remains, per the scan oracle)")


def test_criterion_8_structural_suite(tmp_path):
    runs = [model_run((1.0,)), model_run((0.3j,)), model_run((1.3j,)),
            model_run((1.0, 0.3j))]
    spectra = []
    sweeps = []
    for _, cfg, analysis, sweep in runs:
        spectra.extend(analysis.spectra)
        sweeps.append((cfg, sweep))
    sys_h, _, analysis_h = hyperboloid_family()
    spectra.extend(analysis_h.spectra)
    _, _, spec_cs = coulomb_stark_run()
    spectra.append(spec_cs)
    for spec in spectra:
        lam = spec.multipliers
        for l in lam:
            assert np.min(np.abs(lam * l - 1.0)) <= 1e-8 * max(1.0, np.max(np.abs(lam)))
        assert np.max(np.abs(np.exp(spec.exponents) - lam)) <= 1e-10 * max(
            1.0, float(np.max(np.abs(lam))))
    for cfg, sweep in sweeps:
        for r in sweep.resonances:
            assert r.energy.imag <= 0.0
            assert r.energy.imag >= -cfg.depth - cfg.newton_tol
    # CLI byte determinism
    cfg_file = tmp_path / "cfg.json"
    cfg_file.write_text(json.dumps({
        "system": {"kind": "model", "params": {"coeffs": [[1.0, 0.0]]}},
        "h": 0.05, "eps0": 0.25}), encoding="utf-8")
    out1, out2 = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(["resonances", "--config", str(cfg_file), "--out", str(out1)]) == 0
    assert main(["resonances", "--config", str(cfg_file), "--out", str(out2)]) == 0
    assert out1.read_bytes() == out2.read_bytes()
    print("criterion 8 PASS: pairing symmetry, exp/log round trips, window "
          "discipline, deterministic CLI bytes")
