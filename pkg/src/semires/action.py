"""Classical action, subprincipal integral, and smooth family fits.

The semiclassical action density carried downstream is

    s1 = sub_integral + mu_sum_term + index_term

with ``sub_integral = -(1/2 pi) int_0^T h1 dt`` along the orbit,
``mu_sum_term = (1/4 pi i) sum_selected mu_j`` and ``index_term = g/4``.
For purely real-hyperbolic spectra ``Im s1 = -sum mu_j / (4 pi) < 0`` is the
resonance-width source; first-kind elliptic exponents contribute the real
zero-point shifts ``omega_j / 2``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from numpy.polynomial import chebyshev as cheb
from scipy.integrate import solve_ivp
from scipy.optimize import linear_sum_assignment

from .dynsys import HamiltonianSystem, PhaseState
from .errors import FitDomainError, FitError, QuadratureError
from .floquet import FloquetSpectrum
from .orbit import OrbitFamily, PeriodicOrbit

Array = np.ndarray


class Quadrature(NamedTuple):
    value: float
    error: float


@dataclass
class ActionData:
    """Per-energy action data entering the quantization condition."""

    s0: float
    t_period: float
    sub_integral: float
    mu_sum_term: complex
    index_term: float
    s1: complex
    energy: float
    g: int


def _orbit_quadrature(orbit: PeriodicOrbit, rtol: float) -> tuple[float, float]:
    """Integrate (eta . dy/dt, h1) along one period; returns the two integrals."""
    sys = orbit.system
    n = sys.dim_n

    def rhs(t, w):
        z = w[:2 * n]
        state = PhaseState.from_z(z)
        g = sys.grad_z(z)
        dz = np.concatenate([g[n:], -g[:n]])
        d_act = z[n:] @ g[n:]          # eta . (dH/deta) = eta . ydot
        d_sub = sys.h1(state)
        return np.concatenate([dz, [d_act, d_sub]])

    w0 = np.concatenate([orbit.base_point.z, [0.0, 0.0]])
    sol = solve_ivp(rhs, (0.0, orbit.period), w0, method="DOP853",
                    rtol=rtol, atol=rtol * 1e-2)
    if not sol.success:
        raise QuadratureError(f"orbit quadrature failed: {sol.message}")
    return float(sol.y[-2, -1]), float(sol.y[-1, -1])


def classical_action(orbit: PeriodicOrbit, target: float = 1e-9) -> Quadrature:
    """Classical action ``(1/2 pi) oint eta . dy`` along the orbit.

    The loop integral is accumulated with the flow itself (orientation along
    the Hamiltonian flow); two integrations at different tolerances provide
    the error estimate.  Raises ``QuadratureError`` when the estimate exceeds
    1e-8.
    """
    coarse, _ = _orbit_quadrature(orbit, rtol=min(1e-9, target))
    fine, _ = _orbit_quadrature(orbit, rtol=1e-12)
    value = fine / (2.0 * np.pi)
    err = abs(fine - coarse) / (2.0 * np.pi)
    if err > 1e-8 * max(1.0, abs(value)):
        raise QuadratureError(f"action quadrature error estimate {err:.3e} above 1e-8")
    return Quadrature(value, err)


def subprincipal_term(sys: HamiltonianSystem, orbit: PeriodicOrbit) -> float:
    """Subprincipal contribution ``-(1/2 pi) int_0^T h1(y(t), eta(t)) dt``."""
    _, sub_fine = _orbit_quadrature(orbit, rtol=1e-12)
    return -sub_fine / (2.0 * np.pi)


def assemble_semiclassical_action(s0: float, sub: float, spectrum: FloquetSpectrum,
                                  g: int, t_period: float = float("nan")) -> ActionData:
    """Combine the pieces of the order-h action coefficient.

    ``mu_sum_term`` is ``(1/4 pi i) sum_j mu_j`` over the selected exponents
    (size d enforced by the spectrum construction), ``index_term`` is ``g/4``.
    """
    mu_sum = complex(np.sum(spectrum.selected_exponents)) / (4j * np.pi)
    index_term = g / 4.0
    s1 = sub + mu_sum + index_term
    return ActionData(s0=float(s0), t_period=float(t_period), sub_integral=float(sub),
                      mu_sum_term=mu_sum, index_term=index_term, s1=s1,
                      energy=spectrum.energy, g=int(g))


# ---------------------------------------------------------------------------
# family fits


def _track_exponents(spectra: list[FloquetSpectrum]) -> Array:
    """Selected exponents per grid point with continuity in energy.

    Exponents are matched to the previous grid point through the multipliers
    and their log branch is adjusted by multiples of 2 pi i so that the
    tracked functions mu_j(E) are continuous.  The integer branch ambiguity
    this introduces only shifts the longitudinal quantum number.
    """
    n = len(spectra)
    d = spectra[0].d
    mu = np.zeros((n, d), dtype=complex)
    lam_prev = spectra[0].selected_multipliers
    mu[0] = spectra[0].selected_exponents
    for i in range(1, n):
        lam_i = spectra[i].selected_multipliers
        mu_i = spectra[i].selected_exponents
        cost = np.abs(lam_prev[:, None] - lam_i[None, :])
        rows, cols = linear_sum_assignment(cost)
        order = np.empty(d, dtype=int)
        order[rows] = cols
        mu_i = mu_i[order]
        shift = np.round((mu[i - 1].imag - mu_i.imag) / (2 * np.pi))
        mu[i] = mu_i + 2j * np.pi * shift
        lam_prev = lam_i[order]
    return mu


def _smoothness_screen(name: str, values: Array) -> None:
    v = np.asarray(values, dtype=complex)
    if v.size < 5:
        return
    d2 = np.abs(np.diff(v, 2))
    scale = float(np.max(np.abs(v))) + 1.0
    med = float(np.median(d2))
    if np.any(d2 > 10.0 * med + 1e-7 * scale):
        raise FitError(f"grid data for {name} fails the second-difference smoothness screen")


@dataclass
class FamilyFit:
    """Chebyshev fits of the family quantities, evaluable at complex energy.

    Evaluation is restricted to ``Re E`` inside the grid range and
    ``|Im E| <= im_band``; the band defaults to the grid spacing and is
    widened by the pipeline to cover the requested window depth.
    """

    e_min: float
    e_max: float
    im_band: float
    g: int
    energy_grid: Array
    _s0: cheb.Chebyshev = field(repr=False, default=None)
    _t: cheb.Chebyshev = field(repr=False, default=None)
    _s1: cheb.Chebyshev = field(repr=False, default=None)
    _mu: list = field(repr=False, default=None)
    fit_error: dict = field(default_factory=dict)
    data: dict = field(repr=False, default_factory=dict)   # raw fitted arrays

    @property
    def n_selected(self) -> int:
        return len(self._mu)

    def _check(self, e):
        arr = np.asarray(e, dtype=complex)
        if not np.all((self.e_min - 1e-12 <= arr.real) & (arr.real <= self.e_max + 1e-12)):
            bad = arr.real.flat[int(np.argmax((arr.real < self.e_min) | (arr.real > self.e_max)))]
            raise FitDomainError(f"Re E = {bad:.6g} outside fit range "
                                 f"[{self.e_min:.6g}, {self.e_max:.6g}]")
        if not np.all(np.abs(arr.imag) <= self.im_band * (1 + 1e-12)):
            raise FitDomainError(f"|Im E| = {np.max(np.abs(arr.imag)):.6g} above the "
                                 f"allowed band {self.im_band:.6g}")
        return arr if arr.ndim else complex(arr)

    def s0(self, e):
        return self._s0(self._check(e))

    def ds0(self, e):
        return self._s0.deriv()(self._check(e))

    def t_period(self, e):
        return self._t(self._check(e))

    def s1(self, e):
        return self._s1(self._check(e))

    def ds1(self, e):
        return self._s1.deriv()(self._check(e))

    def mu(self, e) -> Array:
        """Selected exponents at ``e``; leading axis indexes the exponent."""
        e = self._check(e)
        return np.array([f(e) for f in self._mu])

    def dmu(self, e) -> Array:
        e = self._check(e)
        return np.array([f.deriv()(e) for f in self._mu])


def _fit_one(name: str, grid: Array, values: Array, degree: int,
             errors: dict) -> cheb.Chebyshev:
    values = np.asarray(values)
    if np.max(np.abs(values.imag if np.iscomplexobj(values) else 0.0)) == 0.0:
        values = values.real
    f = cheb.Chebyshev.fit(grid, values, deg=degree, domain=[grid[0], grid[-1]])
    resid = float(np.max(np.abs(f(grid) - values)))
    errors[name] = resid
    if resid > 1e-6:
        raise FitError(f"fit residual for {name} is {resid:.3e} (grid too coarse)")
    return f


def fit_from_arrays(grid: Array, s0_vals: Array, t_vals: Array, s1_vals: Array,
                    mu_mat: Array, g: int, im_band: float | None = None) -> FamilyFit:
    """Build a FamilyFit directly from per-energy arrays.

    Used to re-assemble a fit from serialized stage output; ``mu_mat`` has
    one row per grid point and one column per selected exponent.
    """
    grid = np.asarray(grid, dtype=float)
    n = grid.size
    if n < 5:
        raise FitError("family grid must have at least 5 points for fitting")
    degree = min(n - 1, 12)
    errors: dict[str, float] = {}
    fit = FamilyFit(
        e_min=float(grid[0]), e_max=float(grid[-1]),
        im_band=float(im_band) if im_band is not None else float(np.max(np.diff(grid))),
        g=int(g), energy_grid=grid,
    )
    fit._s0 = _fit_one("s0", grid, np.asarray(s0_vals, dtype=float), degree, errors)
    fit._t = _fit_one("t", grid, np.asarray(t_vals, dtype=float), degree, errors)
    fit._s1 = _fit_one("s1", grid, np.asarray(s1_vals, dtype=complex), degree, errors)
    mu_mat = np.asarray(mu_mat, dtype=complex)
    fit._mu = [_fit_one(f"mu_{j}", grid, mu_mat[:, j], degree, errors)
               for j in range(mu_mat.shape[1])]
    fit.fit_error = errors
    fit.data = {"grid": grid, "s0": np.asarray(s0_vals, dtype=float),
                "t": np.asarray(t_vals, dtype=float),
                "s1": np.asarray(s1_vals, dtype=complex), "mu": mu_mat}
    return fit


def fit_family(family: OrbitFamily, spectra: list[FloquetSpectrum],
               actions: list[ActionData], im_band: float | None = None) -> FamilyFit:
    """Fit S0, T, S1 and the selected exponents over the family grid.

    ``s1`` is re-assembled from the continuity-tracked exponents so the fitted
    quantities stay mutually consistent if a log branch unwinds mid-family.
    """
    grid = family.energy_grid
    n = grid.size
    if n < 5:
        raise FitError("family grid must have at least 5 points for fitting")
    if not (len(spectra) == len(actions) == n):
        raise ValueError("family, spectra and actions must be aligned")

    s0_vals = np.array([a.s0 for a in actions])
    t_vals = np.array([o.period for o in family.orbits])
    mu_mat = _track_exponents(spectra)
    s1_vals = np.array([a.sub_integral + np.sum(mu_mat[i]) / (4j * np.pi) + a.index_term
                        for i, a in enumerate(actions)])

    for name, vals in (("s0", s0_vals), ("t", t_vals), ("s1", s1_vals)):
        _smoothness_screen(name, vals)
    for j in range(mu_mat.shape[1]):
        _smoothness_screen(f"mu_{j}", mu_mat[:, j])

    fit = fit_from_arrays(grid, s0_vals, t_vals, s1_vals, mu_mat, actions[0].g,
                          im_band=im_band)

    # action-period consistency of the fitted data: d(2 pi S0)/dE = T
    ds0 = fit._s0.deriv()(grid)
    rel = np.max(np.abs(2 * np.pi * ds0 - t_vals) / np.abs(t_vals))
    if rel > 1e-4:
        raise FitError(f"fitted dS0/dE deviates from T/2pi by rel. {rel:.3e}")
    return fit
