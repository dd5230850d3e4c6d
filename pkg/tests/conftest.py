"""Shared fixtures: cached pipelines for the systems the suite reuses."""

from __future__ import annotations

from functools import lru_cache

import numpy as np
import pytest

import semires as sr


@lru_cache(maxsize=None)
def model_run(coeffs: tuple, h: float = 0.05, eps0: float = 0.25, delta: float = 0.5):
    """Full pipeline on a model configuration; cached across tests."""
    sys = sr.make_builtin("model", {"coeffs": list(coeffs)})
    cfg = sr.BSConfig(h=h, eps0=eps0, delta=delta)
    analysis, sweep = sr.resonance_pipeline(sys, cfg)
    return sys, cfg, analysis, sweep


@lru_cache(maxsize=None)
def model_orbit_run(coeffs: tuple, energy: float = 0.1):
    """Single-orbit chain (orbit, spectrum, path, index) on a model system."""
    sys = sr.make_builtin("model", {"coeffs": list(coeffs)})
    guess, period = sr.default_orbit_guess(sys, energy)
    orbit = sr.find_periodic_orbit(sys, guess, period, energy, tol=1e-10)
    spec = sr.spectrum_of_orbit(sys, orbit)
    path = sr.plus_path(sys, orbit, spec)
    index = sr.cz_index(path)
    return sys, orbit, spec, path, index


@lru_cache(maxsize=None)
def hyperboloid_family(n_grid: int = 21):
    sys = sr.make_builtin("hyperboloid")
    guess, period = sr.default_orbit_guess(sys, 0.5)
    seed = sr.find_periodic_orbit(sys, guess, period, 0.5, tol=1e-10)
    family = sr.continue_family(sys, seed, 0.3, 0.7, n_grid)
    # band wide enough for the h = 0.02 window depth used by the sweep tests
    analysis = sr.analyze_family(sys, family, im_band=1.1 * np.sqrt(0.02) + 0.02)
    return sys, family, analysis


@lru_cache(maxsize=None)
def coulomb_stark_run(a: float = 1.0, energy: float = 2.5):
    sys = sr.make_builtin("coulomb_stark", {"a": a})
    guess, period = sr.default_orbit_guess(sys, energy)
    orbit = sr.find_periodic_orbit(sys, guess, period, energy, tol=1e-10)
    spec = sr.spectrum_of_orbit(sys, orbit)
    return sys, orbit, spec


@pytest.fixture(scope="session")
def model_hr():
    return model_run((1.0,))


@pytest.fixture(scope="session")
def model_ee03():
    return model_run((0.3j,))


@pytest.fixture(scope="session")
def model_ee13():
    return model_run((1.3j,))


@pytest.fixture(scope="session")
def model_mixed():
    return model_run((1.0, 0.3j))


@pytest.fixture(scope="session")
def hyperboloid():
    return hyperboloid_family()


@pytest.fixture(scope="session")
def coulomb_stark():
    return coulomb_stark_run()


def pair_distance(a, b):
    """Greatest nearest-neighbour distance between two complex sets."""
    a = list(a)
    b = list(b)
    if len(a) != len(b):
        return np.inf
    if not a:
        return 0.0
    da = max(min(abs(x - y) for y in b) for x in a)
    db = max(min(abs(x - y) for y in a) for x in b)
    return max(da, db)
