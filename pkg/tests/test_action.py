"""Action integrals, order-h assembly and family fits."""

import numpy as np
import pytest
from scipy.integrate import quad

import semires as sr
from semires.errors import FitDomainError


def model_orbit(coeffs, energy=0.2, h1=None):
    params = {"coeffs": coeffs}
    if h1 is not None:
        params["h1"] = h1
    sys = sr.make_builtin("model", params)
    guess, period = sr.default_orbit_guess(sys, energy)
    return sys, sr.find_periodic_orbit(sys, guess, period, energy, tol=1e-10)


# ---------------------------------------------------------------------------
# classical action


def test_model_action_linear_in_energy():
    # only the longitudinal pair contributes: S0(E) = E
    _, orbit = model_orbit([1.0], energy=0.2)
    q = sr.classical_action(orbit)
    assert q.value == pytest.approx(0.2, abs=1e-10)
    assert q.error <= 1e-8


def test_hyperboloid_action_sqrt_law():
    sys = sr.make_builtin("hyperboloid")
    orbit = sr.find_periodic_orbit(sys, sr.PhaseState([0.0, 0.0], [1.0, 0.0]),
                                   6.28, 0.5, tol=1e-10)
    assert sr.classical_action(orbit).value == pytest.approx(1.0, abs=1e-9)


def test_coulomb_stark_action_against_quadrature(coulomb_stark):
    sys, orbit, _ = coulomb_stark
    oracle = quad(lambda r: np.sqrt(max(2.5 - 1.0 / r - r, 0.0)), 0.5, 2.0,
                  points=[0.5, 2.0], limit=200)[0] / np.pi
    assert sr.classical_action(orbit).value == pytest.approx(oracle, abs=1e-7)


# ---------------------------------------------------------------------------
# subprincipal integral


def test_subprincipal_zero_map():
    sys, orbit = model_orbit([1.0])
    assert sr.subprincipal_term(sys, orbit) == 0.0


def test_subprincipal_constant():
    sys, orbit = model_orbit([1.0], h1=lambda s: 1.0)
    # -(1/2 pi) * T with T = 2 pi
    assert sr.subprincipal_term(sys, orbit) == pytest.approx(-1.0, abs=1e-10)


def test_subprincipal_full_period_cosine():
    sys, orbit = model_orbit([1.0], h1=lambda s: np.cos(s.y[0]))
    assert abs(sr.subprincipal_term(sys, orbit)) <= 1e-10


# ---------------------------------------------------------------------------
# order-h assembly (pure arithmetic on classified spectra)


def spectrum_of(mat, energy=0.0):
    return sr.exponents_and_classes(mat, energy=energy)


def test_assemble_hyperbolic():
    spec = spectrum_of(np.diag([np.exp(2 * np.pi), np.exp(-2 * np.pi)]))
    data = sr.assemble_semiclassical_action(0.0, 0.0, spec, 0)
    assert data.s1 == pytest.approx(-0.5j, abs=1e-12)
    assert data.mu_sum_term == pytest.approx(-0.5j, abs=1e-12)
    assert data.s1.imag < 0  # resonance-width source


def test_assemble_elliptic():
    th = 2 * np.pi * 0.3
    spec = spectrum_of(np.array([[np.cos(th), np.sin(th)], [-np.sin(th), np.cos(th)]]))
    data = sr.assemble_semiclassical_action(0.0, 0.0, spec, 0)
    assert data.s1 == pytest.approx(0.15, abs=1e-12)


def test_assemble_mixed_with_index():
    m = np.zeros((4, 4))
    m[np.ix_([0, 2], [0, 2])] = np.diag([np.exp(2 * np.pi), np.exp(-2 * np.pi)])
    th = 2 * np.pi * 0.3
    m[np.ix_([1, 3], [1, 3])] = np.array([[np.cos(th), np.sin(th)],
                                          [-np.sin(th), np.cos(th)]])
    spec = spectrum_of(m)
    data = sr.assemble_semiclassical_action(0.0, 0.0, spec, 0)
    assert data.s1 == pytest.approx(0.15 - 0.5j, abs=1e-12)
    # identity of the parts
    assert data.s1 == data.sub_integral + data.mu_sum_term + data.index_term
    data_g = sr.assemble_semiclassical_action(0.0, 0.0, spec, 2)
    assert data_g.s1 == pytest.approx(0.65 - 0.5j, abs=1e-12)
    assert data_g.index_term == 0.5


# ---------------------------------------------------------------------------
# family fits


def test_model_family_fit_is_exact(model_hr):
    _, _, analysis, _ = model_hr
    fit = analysis.fit
    assert max(fit.fit_error.values()) < 1e-9
    # constant/linear family: evaluate anywhere in band
    assert fit.s0(0.12) == pytest.approx(0.12, abs=1e-10)
    assert fit.t_period(0.12) == pytest.approx(2 * np.pi, abs=1e-9)
    assert fit.mu(0.12)[0] == pytest.approx(2 * np.pi, abs=1e-9)
    assert fit.s1(0.12) == pytest.approx(-0.5j, abs=1e-9)


def test_hyperboloid_fit_value_and_derivative(hyperboloid):
    _, family, analysis = hyperboloid
    fit = analysis.fit
    assert fit.s0(0.5) == pytest.approx(1.0, abs=1e-8)
    grid = family.energy_grid
    t_grid = np.array([o.period for o in family.orbits])
    # action-period identity: fitted dS0/dE against the independently
    # measured return times, relative 1e-4 across [0.3, 0.7]
    ds0 = np.array([fit.ds0(e).real for e in grid])
    assert np.max(np.abs(2 * np.pi * ds0 - t_grid) / t_grid) <= 1e-4
    # finite differences of the evaluator agree with its derivative
    hh = 1e-4
    inner = grid[2:-2]
    fd = np.array([(-fit.s0(e + 2 * hh) + 8 * fit.s0(e + hh)
                    - 8 * fit.s0(e - hh) + fit.s0(e - 2 * hh)).real / (12 * hh)
                   for e in inner])
    dfit = np.array([fit.ds0(e).real for e in inner])
    assert np.max(np.abs(fd - dfit) / np.abs(dfit)) <= 1e-4
    # raw grid differences obey the identity at their own truncation order
    fd2 = 2 * np.pi * (np.array([fit.s0(e).real for e in grid])[2:]
                       - np.array([fit.s0(e).real for e in grid])[:-2]) \
        / (grid[2:] - grid[:-2])
    assert np.max(np.abs(fd2 - t_grid[1:-1]) / t_grid[1:-1]) <= 1e-3


def test_fit_band_enforcement(model_hr):
    _, cfg, analysis, _ = model_hr
    fit = analysis.fit
    with pytest.raises(FitDomainError, match="Im E"):
        fit.s0(complex(0.0, 10 * fit.im_band))
    with pytest.raises(FitDomainError, match="outside fit range"):
        fit.s0(fit.e_max + 0.1)
    # inside the band: fine
    fit.s0(complex(0.0, -0.5 * fit.im_band))


def test_half_density_consistency(model_hr, model_ee03, model_mixed, hyperboloid,
                                  coulomb_stark):
    # exp(2 pi Im mu_sum_term) reproduces |prod lambda_selected|^{-1/2}
    runs = []
    for _, _, analysis, _ in (model_hr, model_ee03, model_mixed):
        mid = len(analysis.spectra) // 2
        runs.append((analysis.spectra[mid], analysis.actions[mid]))
    _, _, analysis = hyperboloid
    mid = len(analysis.spectra) // 2
    runs.append((analysis.spectra[mid], analysis.actions[mid]))
    sys_cs, orbit_cs, spec_cs = coulomb_stark
    runs.append((spec_cs, sr.assemble_semiclassical_action(0.0, 0.0, spec_cs, 0)))
    for spec, act in runs:
        half_density = np.abs(np.prod(spec.selected_multipliers)) ** -0.5
        assert np.exp(2 * np.pi * act.mu_sum_term.imag) == pytest.approx(
            half_density, abs=1e-8, rel=1e-8)


def test_action_increases_with_energy(model_hr, hyperboloid):
    for analysis in (model_hr[2], hyperboloid[2]):
        s0 = np.array([a.s0 for a in analysis.actions])
        assert np.all(np.diff(s0) > 0)


def test_coulomb_stark_family_action_orientation():
    sys = sr.make_builtin("coulomb_stark", {"a": 1.0})
    guess, period = sr.default_orbit_guess(sys, 2.5)
    seed = sr.find_periodic_orbit(sys, guess, period, 2.5, tol=1e-10)
    family = sr.continue_family(sys, seed, 2.3, 2.7, 5)
    s0 = [sr.classical_action(o).value for o in family.orbits]
    assert np.all(np.diff(s0) > 0)
    t_fd = np.gradient(2 * np.pi * np.array(s0), family.energy_grid)
    t_true = np.array([o.period for o in family.orbits])
    assert abs(t_fd[2] - t_true[2]) / t_true[2] <= 1e-3
