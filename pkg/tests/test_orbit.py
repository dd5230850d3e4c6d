"""Newton shooting and family continuation."""

import numpy as np
import pytest
from scipy.optimize import brentq

import semires as sr
from semires.errors import ContinuationError


def test_model_orbit_exact():
    sys = sr.make_builtin("model", {"coeffs": [1.0]})
    guess = sr.PhaseState([0.0, 0.0], [-0.2, 0.0])
    orbit = sr.find_periodic_orbit(sys, guess, 6.2, 0.2, tol=1e-10)
    assert orbit.period == pytest.approx(2 * np.pi, abs=1e-10)
    assert orbit.closure_error < 1e-12
    assert abs(orbit.base_point.y[1]) < 1e-12          # x = 0
    assert abs(orbit.base_point.eta[1]) < 1e-12        # xi = 0
    assert orbit.base_point.eta[0] == pytest.approx(-0.2, abs=1e-12)
    orbit.validate()


def test_model_orbit_from_perturbed_guess():
    # hyperbolic transverse error killed by Newton
    sys = sr.make_builtin("model", {"coeffs": [1.0]})
    guess = sr.PhaseState([0.0, 1e-3], [-0.2, 1e-3])
    orbit = sr.find_periodic_orbit(sys, guess, 6.2, 0.2, tol=1e-10)
    assert abs(orbit.base_point.y[1]) < 1e-11
    assert abs(orbit.base_point.eta[1]) < 1e-11
    assert orbit.period == pytest.approx(2 * np.pi, abs=1e-10)


def test_hyperboloid_neck_from_off_neck_guess():
    sys = sr.make_builtin("hyperboloid")
    guess = sr.PhaseState([0.0, 1e-3], [1.0, 0.0])
    orbit = sr.find_periodic_orbit(sys, guess, 6.28, 0.5, tol=1e-10)
    assert orbit.period == pytest.approx(2 * np.pi, abs=1e-9)
    assert abs(orbit.base_point.y[1]) < 1e-10          # v = 0
    assert abs(orbit.base_point.eta[1]) < 1e-10        # eta_v = 0
    assert abs(abs(orbit.base_point.eta[0]) - 1.0) < 1e-10


def measured_turning_radii(orbit):
    """Radii where the axial momentum vanishes, from the orbit itself."""
    sys = orbit.system
    sol = sr.dynsys.integrate(sys, orbit.base_point.z, orbit.period, 1e-12, dense=True)
    n = sys.dim_n

    def eta1(t):
        return sol.sol(t)[n]

    # base point is a turning point; the other lies near half a period
    t_half = brentq(eta1, 0.25 * orbit.period, 0.75 * orbit.period, xtol=1e-13)
    r0 = np.linalg.norm(orbit.base_point.y)
    r1 = float(np.linalg.norm(sol.sol(t_half)[:n]))
    return sorted([r0, r1])


def test_coulomb_stark_libration_turning_radii():
    sys = sr.make_builtin("coulomb_stark", {"a": 1.0})
    guess, period = sr.default_orbit_guess(sys, 2.5)
    orbit = sr.find_periodic_orbit(sys, guess, period, 2.5, tol=1e-10)
    r_in, r_out = measured_turning_radii(orbit)
    # oracle: roots of 1/r + r = 2.5
    assert r_in == pytest.approx(0.5, abs=1e-6)
    assert r_out == pytest.approx(2.0, abs=1e-6)
    orbit.validate()


def test_return_consistency():
    sys = sr.make_builtin("hyperboloid")
    orbit = sr.find_periodic_orbit(sys, sr.PhaseState([0.0, 1e-3], [1.0, 0.0]),
                                   6.28, 0.5, tol=1e-10)
    r = sr.flow(sys, orbit.base_point, orbit.period, tol=1e-12)
    assert sys.state_distance(r.state, orbit.base_point) <= 1e-8


def test_section_independence():
    # restarting from another sample of the same orbit reproduces the period
    sys = sr.make_builtin("coulomb_stark", {"a": 1.0})
    guess, period = sr.default_orbit_guess(sys, 2.5)
    orbit = sr.find_periodic_orbit(sys, guess, period, 2.5, tol=1e-10)
    _, other_sample = orbit.samples[137]
    orbit2 = sr.find_periodic_orbit(sys, other_sample, orbit.period, 2.5, tol=1e-10)
    assert abs(orbit2.period - orbit.period) <= 1e-9


def test_continue_family_model_constant_period():
    sys = sr.make_builtin("model", {"coeffs": [1.0]})
    seed = sr.find_periodic_orbit(sys, sr.PhaseState([0.0, 0.0], [0.0, 0.0]),
                                  6.28, 0.0, tol=1e-10)
    family = sr.continue_family(sys, seed, -0.5, 0.5, 11)
    assert len(family) == 11
    assert np.all(np.diff(family.energy_grid) > 0)
    for orbit, energy in zip(family.orbits, family.energy_grid):
        assert orbit.period == pytest.approx(2 * np.pi, abs=1e-9)
        assert abs(orbit.base_point.y[1]) < 1e-10
        assert orbit.energy == pytest.approx(energy)


def test_continue_family_hyperboloid_period_law():
    sys = sr.make_builtin("hyperboloid")
    seed = sr.find_periodic_orbit(sys, sr.PhaseState([0.0, 0.0], [1.0, 0.0]),
                                  6.28, 0.5, tol=1e-10)
    family = sr.continue_family(sys, seed, 0.3, 0.7, 5)
    for orbit, energy in zip(family.orbits, family.energy_grid):
        assert orbit.period == pytest.approx(2 * np.pi / np.sqrt(2 * energy), rel=1e-9)
    # smoothness of T(E): bounded second differences
    periods = np.array([o.period for o in family.orbits])
    d2 = np.abs(np.diff(periods, 2))
    assert np.max(d2) <= 10 * np.median(d2) + 1e-9


def test_continue_family_validation():
    sys = sr.make_builtin("model", {"coeffs": [1.0]})
    seed = sr.find_periodic_orbit(sys, sr.PhaseState([0.0, 0.0], [0.0, 0.0]),
                                  6.28, 0.0, tol=1e-10)
    with pytest.raises(ValueError, match="odd"):
        sr.continue_family(sys, seed, -0.5, 0.5, 10)
    with pytest.raises(ValueError, match="inside"):
        sr.continue_family(sys, seed, 0.2, 0.5, 5)


def test_continuation_failure_returns_partial_family():
    # the neck family cannot be continued through E = 0
    sys = sr.make_builtin("hyperboloid")
    seed = sr.find_periodic_orbit(sys, sr.PhaseState([0.0, 0.0], [np.sqrt(0.6), 0.0]),
                                  2 * np.pi / np.sqrt(0.6), 0.3, tol=1e-10)
    with pytest.raises(ContinuationError) as err:
        sr.continue_family(sys, seed, -0.1, 0.3, 5)
    assert err.value.failed_energy is not None
    assert err.value.failed_energy <= 0.0 + 1e-12
    partial = err.value.partial_family
    assert partial is not None and len(partial) >= 2
    assert np.all(partial.energy_grid > 0)
