"""Periodic-orbit location by Newton shooting and continuation in energy.

The Poincare section is the affine hyperplane through the current base point
with normal along the Hamiltonian vector field there; Newton updates live in
the 2d-dimensional symplectic complement of the flow direction and the
energy gradient, and every iterate is projected back onto the requested
energy shell.  This removes the two trivial unit multipliers before any
eigenanalysis.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dynsys import HamiltonianSystem, PhaseState, integrate
from .errors import ConvergenceError, DegenerateOrbitError, ContinuationError, SectionError
from .sympl import TransverseFrame

Array = np.ndarray


@dataclass
class PeriodicOrbit:
    """A closed trajectory at fixed energy.

    ``samples`` covers one period, ordered along the flow, first entry at the
    base point.  ``system`` is kept so downstream quadratures can re-evaluate
    the dynamics along the orbit.
    """

    energy: float
    period: float
    base_point: PhaseState
    samples: list[tuple[float, PhaseState]]
    closure_error: float
    system: HamiltonianSystem = field(repr=False, default=None)

    def validate(self, tol: float = 1e-8) -> None:
        """Check the defining invariants; raises AssertionError on failure."""
        assert self.period > 0, "period must be positive"
        for _, s in self.samples:
            assert abs(self.system.h0(s) - self.energy) <= tol, "sample off the energy shell"
        assert self.closure_error <= tol, f"closure error {self.closure_error} above {tol}"


@dataclass
class OrbitFamily:
    """Orbits of one continuation family, sorted by energy."""

    orbits: list[PeriodicOrbit]
    energy_grid: Array

    def __post_init__(self):
        self.energy_grid = np.asarray(self.energy_grid, dtype=float)
        if np.any(np.diff(self.energy_grid) <= 0):
            raise ValueError("family energies must be strictly increasing")

    def __len__(self) -> int:
        return len(self.orbits)

    def orbit_at(self, energy: float) -> PeriodicOrbit:
        i = int(np.argmin(np.abs(self.energy_grid - energy)))
        return self.orbits[i]


# ---------------------------------------------------------------------------


def project_to_level(sys: HamiltonianSystem, z: Array, energy: float,
                     tol: float = 1e-13, max_iter: int = 30) -> Array:
    """Newton projection of ``z`` onto the energy shell ``h0 = energy``."""
    z = np.asarray(z, dtype=float).copy()
    for _ in range(max_iter):
        err = sys.h0_z(z) - energy
        if abs(err) <= tol:
            return z
        g = sys.grad_z(z)
        gg = g @ g
        if gg < 1e-300:
            raise SectionError("vanishing gradient while projecting onto the energy shell")
        z -= (err / gg) * g
    raise ConvergenceError("energy-shell projection did not converge",
                           residual=abs(sys.h0_z(z) - energy))


def _return_crossing(sys: HamiltonianSystem, z: Array, guess_period: float,
                     tol: float, var0: Array | None = None):
    """Integrate until the trajectory re-crosses the section through ``z``.

    The section normal is the flow direction at ``z``; only crossings in the
    same direction as the departure count.  Returns ``(tau, z_end, zmat)``
    where ``zmat`` is the accumulated variational matrix (``var0`` chained).
    """
    n2 = 2 * sys.dim_n
    v0 = sys.xfield(z)
    nv0 = v0 / np.linalg.norm(v0)
    p = z.copy()

    def section_event(t, zz):
        return float(nv0 @ sys.wrap_delta(zz[:n2] - p))

    section_event.direction = 1.0
    section_event.terminal = True

    # leg 1: march clear of the section before arming the event
    t_gate = 0.55 * guess_period
    sol1 = integrate(sys, z, t_gate, tol, with_variational=True)
    zz1 = sol1.y[:, -1]

    for horizon in (1.9 * guess_period, 3.0 * guess_period):
        sol2 = integrate(sys, zz1[:n2], horizon - t_gate, tol,
                         with_variational=True, events=[section_event], dense=True)
        hits = sol2.t_events[0] if sol2.t_events else np.array([])
        if hits.size:
            tau = t_gate + float(hits[0])
            ze = sol2.y_events[0][0]
            z1mat = zz1[n2:].reshape(n2, n2)
            z2mat = ze[n2:].reshape(n2, n2)
            return tau, ze[:n2], z2mat @ z1mat
        zz1 = sol2.y[:, -1]
        t_gate = horizon
    raise SectionError("no return to the Poincare section found "
                       f"(searched up to t = {3.0 * guess_period:.6g})")


def find_periodic_orbit(sys: HamiltonianSystem, guess: PhaseState, guess_period: float,
                        energy: float, tol: float = 1e-10, max_iter: int = 50,
                        n_samples: int = 400) -> PeriodicOrbit:
    """Locate the periodic orbit through the basin of ``guess`` at ``energy``.

    Newton iteration on the Poincare return map, with the update restricted
    to the section/energy-shell coordinates and each iterate re-projected
    onto the energy shell.

    Raises
    ------
    ConvergenceError
        Newton did not close the orbit within ``max_iter`` iterations.
    SectionError
        No transversal return crossing was found.
    DegenerateOrbitError
        A transverse multiplier equals 1 within 1e-8 at the solution.
    """
    if guess_period <= 0:
        raise ValueError("guess_period must be positive")
    itol = min(1e-11, max(tol * 1e-2, 1e-13))
    z = project_to_level(sys, guess.z, energy)
    period = guess_period
    closure = np.inf

    for iteration in range(max_iter + 1):
        tau, z_end, zmat = _return_crossing(sys, z, period, itol)
        delta = sys.wrap_delta(z_end - z)
        closure = float(np.max(np.abs(delta)))
        period = tau
        if closure <= tol:
            break
        if iteration == max_iter:
            raise ConvergenceError(
                f"Newton shooting did not converge after {max_iter} iterations",
                iterations=iteration, residual=closure)
        frame = TransverseFrame(sys.xfield(z), sys.grad_z(z))
        dmap = frame.reduce(zmat)
        r = frame.coords(delta)
        try:
            step = np.linalg.solve(dmap - np.eye(dmap.shape[0]), r)
        except np.linalg.LinAlgError as exc:
            raise DegenerateOrbitError(
                "return map has a unit multiplier; Newton step is singular") from exc
        # damped update, full step first
        scale = 1.0
        for _ in range(6):
            z_try = project_to_level(sys, z - scale * (frame.basis @ step), energy)
            tau_t, z_end_t, _ = _return_crossing(sys, z_try, period, itol)
            cl_try = float(np.max(np.abs(sys.wrap_delta(z_end_t - z_try))))
            if cl_try < closure or cl_try <= tol:
                break
            scale *= 0.5
        z = z_try

    # polish pass at tight tolerance: final period, closure and samples
    ptol = 1e-12
    tau, z_end, zmat = _return_crossing(sys, z, period, ptol)
    closure = float(np.max(np.abs(sys.wrap_delta(z_end - z))))
    # transverse degeneracy check
    frame = TransverseFrame(sys.xfield(z), sys.grad_z(z))
    multipliers = np.linalg.eigvals(frame.reduce(zmat))
    if np.any(np.abs(multipliers - 1.0) < 1e-8):
        raise DegenerateOrbitError(
            "orbit has a transverse Floquet multiplier equal to 1 within 1e-8")

    sol = integrate(sys, z, tau, ptol, dense=True)
    times = np.linspace(0.0, tau, n_samples, endpoint=False)
    samples = [(float(t), PhaseState.from_z(sol.sol(t))) for t in times]
    return PeriodicOrbit(energy=float(energy), period=float(tau),
                         base_point=PhaseState.from_z(z), samples=samples,
                         closure_error=closure, system=sys)


def continue_family(sys: HamiltonianSystem, seed: PeriodicOrbit, e_min: float,
                    e_max: float, n_grid: int, tol: float = 1e-10) -> OrbitFamily:
    """Continue ``seed`` over a uniform energy grid on [e_min, e_max].

    Marches outward from the grid point nearest the seed energy, using each
    converged orbit as the next guess.  On failure raises
    ``ContinuationError`` carrying the partial family found so far.
    """
    if n_grid < 3 or n_grid % 2 == 0:
        raise ValueError("n_grid must be odd and >= 3")
    if not (e_min <= seed.energy <= e_max):
        raise ValueError("seed energy must lie inside [e_min, e_max]")
    grid = np.linspace(e_min, e_max, n_grid)
    i0 = int(np.argmin(np.abs(grid - seed.energy)))
    found: dict[int, PeriodicOrbit] = {}

    def solve_at(i: int, ref: PeriodicOrbit) -> PeriodicOrbit:
        try:
            return find_periodic_orbit(sys, ref.base_point, ref.period, grid[i], tol=tol)
        except Exception as exc:
            partial = [found[j] for j in sorted(found)]
            fam = OrbitFamily(partial, np.array(sorted(grid[j] for j in found))) if partial else None
            raise ContinuationError(f"continuation failed: {exc}",
                                    partial_family=fam, failed_energy=float(grid[i])) from exc

    found[i0] = solve_at(i0, seed)
    for i in range(i0 + 1, n_grid):
        found[i] = solve_at(i, found[i - 1])
    for i in range(i0 - 1, -1, -1):
        found[i] = solve_at(i, found[i + 1])

    orbits = [found[i] for i in range(n_grid)]
    periods = np.array([o.period for o in orbits])
    if n_grid >= 5:
        d2 = np.abs(np.diff(periods, 2))
        scale = np.median(d2) + 1e-12 * np.max(periods)
        if np.any(d2 > 10 * scale + 1e-9 * np.max(periods)):
            raise ContinuationError("period grid is not smooth (possible family fold)",
                                    partial_family=OrbitFamily(orbits, grid))
    return OrbitFamily(orbits, grid)
