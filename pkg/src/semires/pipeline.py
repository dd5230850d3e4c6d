"""Orchestration of the full chain: orbit family -> spectra -> actions -> index -> fits."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

from .action import (ActionData, FamilyFit, assemble_semiclassical_action,
                     classical_action, fit_family, subprincipal_term)
from .bs import BSConfig, ResonanceSweep, compute_resonances
from .czindex import IndexResult, cz_index, plus_path
from .dynsys import HamiltonianSystem, PhaseState
from .errors import ConfigError
from .floquet import FloquetSpectrum, NonResonanceReport, check_nonresonance, spectrum_of_orbit
from .orbit import OrbitFamily, continue_family, find_periodic_orbit

Array = np.ndarray


@dataclass
class FamilyAnalysis:
    """Everything the quantization stage consumes, precomputed on a family."""

    family: OrbitFamily
    spectra: list[FloquetSpectrum]
    actions: list[ActionData]
    index: IndexResult
    fit: FamilyFit
    nonres: NonResonanceReport


def default_orbit_guess(sys: HamiltonianSystem, energy: float) -> tuple[PhaseState, float]:
    """Seed state and period for the built-in systems at a given energy."""
    kind = sys.meta.get("kind")
    if kind == "model":
        d = sys.dim_n - 1
        return (PhaseState(np.zeros(1 + d), np.concatenate([[-energy], np.zeros(d)])),
                2 * np.pi)
    if kind == "hyperboloid":
        if energy <= 0:
            raise ConfigError("hyperboloid neck orbit needs E > 0")
        speed = np.sqrt(2 * energy)
        return PhaseState(np.zeros(2), np.array([speed, 0.0])), 2 * np.pi / speed
    if kind == "coulomb_stark":
        a = sys.meta["a"]
        disc = energy * energy - 4 * a
        if disc <= 0:
            raise ConfigError(f"energy {energy} below the trapping threshold for a={a}")
        r_in = (energy - np.sqrt(disc)) / (2 * a)
        r_out = (energy + np.sqrt(disc)) / (2 * a)
        period, _ = quad(lambda r: 1.0 / np.sqrt(max(energy - 1.0 / r - a * r, 1e-300)),
                         r_in, r_out, points=[r_in, r_out], limit=200)
        n = sys.dim_n
        y = np.zeros(n)
        y[0] = r_in
        return PhaseState(y, np.zeros(n)), float(period)
    raise ConfigError(f"no default orbit guess for system kind {kind!r}")


def analyze_family(sys: HamiltonianSystem, family: OrbitFamily, *,
                   elliptic_tol: float = 1e-6, flow_tol: float = 1e-12,
                   nonres_k_max: int = 10, nonres_tol: float = 1e-9,
                   path_samples: int = 257, im_band: float | None = None) -> FamilyAnalysis:
    """Floquet spectra, action data, winding index and fits for one family.

    The index is computed at the central family orbit (it is an integer
    invariant of the family under the standing hypotheses); the non-resonance
    report is evaluated on the central spectrum as well.
    """
    spectra = [spectrum_of_orbit(sys, o, tol=elliptic_tol, flow_tol=flow_tol)
               for o in family.orbits]
    mid = len(family.orbits) // 2
    path = plus_path(sys, family.orbits[mid], spectra[mid], n_samples=path_samples,
                     flow_tol=flow_tol)
    index = cz_index(path)
    actions = []
    for orbit, spec in zip(family.orbits, spectra):
        s0 = classical_action(orbit).value
        sub = subprincipal_term(sys, orbit)
        actions.append(assemble_semiclassical_action(s0, sub, spec, index.g,
                                                     t_period=orbit.period))
    fit = fit_family(family, spectra, actions, im_band=im_band)
    nonres = check_nonresonance(spectra[mid], k_max=nonres_k_max, tol=nonres_tol)
    return FamilyAnalysis(family=family, spectra=spectra, actions=actions,
                          index=index, fit=fit, nonres=nonres)


def build_family(sys: HamiltonianSystem, cfg: BSConfig, *, e_min: float | None = None,
                 e_max: float | None = None, n_grid: int = 11,
                 guess: tuple[PhaseState, float] | None = None,
                 orbit_tol: float = 1e-10) -> OrbitFamily:
    """Locate the seed orbit at the window center and continue it over a grid
    wide enough to cover the resonance window."""
    margin = 0.15 * cfg.eps0
    lo = cfg.window_lo - margin if e_min is None else e_min
    hi = cfg.window_hi + margin if e_max is None else e_max
    if not (lo < cfg.e_center < hi):
        raise ConfigError("family grid must contain the window center")
    if guess is None:
        guess = default_orbit_guess(sys, cfg.e_center)
    state, period = guess
    seed = find_periodic_orbit(sys, state, period, cfg.e_center, tol=orbit_tol)
    return continue_family(sys, seed, lo, hi, n_grid, tol=orbit_tol)


def resonance_pipeline(sys: HamiltonianSystem, cfg: BSConfig, *,
                       e_min: float | None = None, e_max: float | None = None,
                       n_grid: int = 11, guess: tuple[PhaseState, float] | None = None,
                       orbit_tol: float = 1e-10, flow_tol: float = 1e-12,
                       nonres_k_max: int = 10, nonres_tol: float = 1e-9,
                       ) -> tuple[FamilyAnalysis, ResonanceSweep]:
    """End-to-end run: family, analysis, lattice sweep."""
    family = build_family(sys, cfg, e_min=e_min, e_max=e_max, n_grid=n_grid,
                          guess=guess, orbit_tol=orbit_tol)
    im_band = 1.1 * cfg.depth + cfg.h
    analysis = analyze_family(sys, family, flow_tol=flow_tol, im_band=im_band,
                              nonres_k_max=nonres_k_max, nonres_tol=nonres_tol)
    sweep = compute_resonances(analysis.fit, cfg, nonres=analysis.nonres)
    return analysis, sweep
