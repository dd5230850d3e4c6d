"""Hamiltonian systems, exact and numerical flows, variational flow.

Phase-space points are pairs ``(y, eta)`` of position and momentum vectors of
equal length ``n >= 2``; the transverse dimension is ``d = n - 1``.  Flattened
vectors use the ordering ``z = (y, eta)`` and Hamilton's equations are
``zdot = J grad_h0(z)`` with ``J = [[0, I], [-I, 0]]``.

Three example systems are built in:

``model``
    ``h0 = -tau + sum_j q_j`` on the cylinder ``S^1 x R^d``, where each
    transverse block is either a hyperbolic quadratic ``c_j x_j xi_j``
    (real ``c_j > 0``) or a harmonic block ``omega_j (x_j^2 + xi_j^2) / 2``
    (coefficient ``i omega_j``, realized in real symplectic coordinates with
    the same Floquet multipliers ``exp(+-2 pi i omega_j)``).
``hyperboloid``
    Geodesic flow on the one-sheeted hyperboloid in the chart
    ``(u, v) -> (cosh v cos u, cosh v sin u, sinh v)``, i.e.
    ``h0 = (eta_u^2 / cosh^2 v + eta_v^2 / cosh 2v) / 2``.
``coulomb_stark``
    ``h0 = |eta|^2 + 1/|y| + a y_1`` on R^2 or R^3 (repulsive Coulomb
    potential with a linear tilt); hosts an unstable axial libration.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.integrate import solve_ivp

from .errors import DomainExitError, FlowError
from .sympl import standard_j

Array = np.ndarray

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class PhaseState:
    """A point ``(y, eta)`` of phase space R^{2n}."""

    y: Array
    eta: Array

    def __post_init__(self):
        object.__setattr__(self, "y", np.atleast_1d(np.asarray(self.y, dtype=float)))
        object.__setattr__(self, "eta", np.atleast_1d(np.asarray(self.eta, dtype=float)))
        if self.y.shape != self.eta.shape or self.y.ndim != 1:
            raise ValueError("y and eta must be 1-d arrays of equal length")
        if self.y.size < 2:
            raise ValueError("need n >= 2 so the transverse dimension d = n - 1 is >= 1")
        if not (np.all(np.isfinite(self.y)) and np.all(np.isfinite(self.eta))):
            raise ValueError("phase-space coordinates must be finite")

    @property
    def n(self) -> int:
        return self.y.size

    @property
    def z(self) -> Array:
        """Flattened vector ``(y, eta)`` of length 2n."""
        return np.concatenate([self.y, self.eta])

    @classmethod
    def from_z(cls, z: Array) -> "PhaseState":
        z = np.asarray(z, dtype=float)
        n = z.size // 2
        return cls(z[:n], z[n:])


@dataclass(frozen=True)
class HamiltonianSystem:
    """Evaluators for the principal symbol, its derivatives and the subprincipal symbol.

    ``angular`` marks position coordinates living on a circle; differences in
    those coordinates are wrapped to ``(-pi, pi]`` when comparing states.
    ``meta`` carries constructor parameters (used by the CLI and the model
    oracle), not consumed by the dynamics.
    """

    dim_n: int
    h0: Callable[[PhaseState], float]
    grad_h0: Callable[[PhaseState], Array]
    hess_h0: Callable[[PhaseState], Array]
    h1: Callable[[PhaseState], float]
    label: str
    angular: tuple[bool, ...] = ()
    domain_guard: Callable[[PhaseState], float] | None = None
    meta: dict = field(default_factory=dict)

    # -- flattened-vector evaluators used by the integrator ----------------

    def h0_z(self, z: Array) -> float:
        return float(self.h0(PhaseState.from_z(z)))

    def grad_z(self, z: Array) -> Array:
        return np.asarray(self.grad_h0(PhaseState.from_z(z)), dtype=float)

    def hess_z(self, z: Array) -> Array:
        return np.asarray(self.hess_h0(PhaseState.from_z(z)), dtype=float)

    def xfield(self, z: Array) -> Array:
        """Hamiltonian vector field ``J grad_h0`` at ``z``."""
        g = self.grad_z(z)
        n = self.dim_n
        return np.concatenate([g[n:], -g[:n]])

    def wrap_delta(self, dz: Array) -> Array:
        """Difference vector with angular position components wrapped to (-pi, pi]."""
        if not any(self.angular):
            return dz
        out = dz.copy()
        for i, ang in enumerate(self.angular):
            if ang:
                out[i] = (out[i] + np.pi) % TWO_PI - np.pi
        return out

    def state_distance(self, s1: PhaseState, s2: PhaseState) -> float:
        return float(np.max(np.abs(self.wrap_delta(s1.z - s2.z))))


@dataclass(frozen=True)
class FlowResult:
    """End state of a flow computation plus diagnostics."""

    state: PhaseState
    variational: Array | None
    time: float
    energy_drift: float


# ---------------------------------------------------------------------------
# finite-difference synthesis helpers

def fd_gradient(h0: Callable[[PhaseState], float], state: PhaseState, step: float = 1e-6) -> Array:
    """Central finite-difference gradient of ``h0`` in the ``(y, eta)`` ordering."""
    z = state.z
    g = np.zeros_like(z)
    for i in range(z.size):
        hi = max(step, step * abs(z[i]))
        zp, zm = z.copy(), z.copy()
        zp[i] += hi
        zm[i] -= hi
        g[i] = (h0(PhaseState.from_z(zp)) - h0(PhaseState.from_z(zm))) / (2 * hi)
    return g


def fd_hessian(grad: Callable[[PhaseState], Array], state: PhaseState, step: float = 1e-5) -> Array:
    """Symmetrized finite-difference Jacobian of a gradient callable."""
    z = state.z
    m = z.size
    h = np.zeros((m, m))
    for i in range(m):
        hi = max(step, step * abs(z[i]))
        zp, zm = z.copy(), z.copy()
        zp[i] += hi
        zm[i] -= hi
        h[:, i] = (np.asarray(grad(PhaseState.from_z(zp))) -
                   np.asarray(grad(PhaseState.from_z(zm)))) / (2 * hi)
    return 0.5 * (h + h.T)


def make_system(dim_n: int,
                h0: Callable[[PhaseState], float],
                grad_h0: Callable[[PhaseState], Array] | None = None,
                hess_h0: Callable[[PhaseState], Array] | None = None,
                h1: Callable[[PhaseState], float] | None = None,
                label: str = "custom",
                angular: tuple[bool, ...] = (),
                domain_guard=None,
                meta: dict | None = None) -> HamiltonianSystem:
    """Generic callback-defined system; missing derivatives are synthesized
    by finite differences (gradient step 1e-6, Hessian step 1e-5, scaled by
    coordinate magnitude)."""
    if grad_h0 is None:
        grad_h0 = lambda s: fd_gradient(h0, s)
    if hess_h0 is None:
        hess_h0 = lambda s, _g=grad_h0: fd_hessian(_g, s)
    if h1 is None:
        h1 = lambda s: 0.0
    if not angular:
        angular = (False,) * dim_n
    return HamiltonianSystem(dim_n=dim_n, h0=h0, grad_h0=grad_h0, hess_h0=hess_h0,
                             h1=h1, label=label, angular=tuple(angular),
                             domain_guard=domain_guard, meta=meta or {})


# ---------------------------------------------------------------------------
# built-in systems

def _parse_model_coeffs(params: dict) -> list[complex]:
    raw = params.get("coeffs", params.get("c"))
    if raw is None:
        raise ValueError("model system needs params['coeffs']")
    if np.isscalar(raw):
        raw = [raw]
    coeffs = []
    for item in raw:
        if isinstance(item, (list, tuple)) and len(item) == 2:
            c = complex(item[0], item[1])
        else:
            c = complex(item)
        coeffs.append(c)
    for c in coeffs:
        if c == 0:
            raise ValueError("model coefficient c_j = 0 gives a degenerate transverse block")
        pure_real = c.imag == 0.0
        pure_imag = c.real == 0.0
        if not (pure_real or pure_imag):
            raise ValueError("model coefficients must be purely real (hyperbolic block) or "
                             "purely imaginary (elliptic block) in the real-phase-space "
                             f"realization; got {c}")
        if pure_real and c.real <= 0:
            raise ValueError(f"hyperbolic model coefficient must be positive, got {c.real}")
        if pure_imag and c.imag <= 0:
            raise ValueError(f"elliptic model frequency must be positive, got {c.imag}")
    return coeffs


def _model_system(params: dict) -> HamiltonianSystem:
    coeffs = _parse_model_coeffs(params)
    d = len(coeffs)
    n = d + 1
    hr = np.array([c.real for c in coeffs])      # zero on elliptic blocks
    om = np.array([c.imag for c in coeffs])      # zero on hyperbolic blocks
    h1 = params.get("h1")

    def h0(s: PhaseState) -> float:
        x = s.y[1:]
        tau = s.eta[0]
        xi = s.eta[1:]
        return float(-tau + hr @ (x * xi) + 0.5 * om @ (x * x + xi * xi))

    def grad(s: PhaseState) -> Array:
        x = s.y[1:]
        xi = s.eta[1:]
        g = np.zeros(2 * n)
        g[1:n] = hr * xi + om * x
        g[n] = -1.0
        g[n + 1:] = hr * x + om * xi
        return g

    hess_const = np.zeros((2 * n, 2 * n))
    for j in range(d):
        iy, ie = 1 + j, n + 1 + j
        hess_const[iy, ie] = hess_const[ie, iy] = hr[j]
        hess_const[iy, iy] = om[j]
        hess_const[ie, ie] = om[j]

    return make_system(
        dim_n=n,
        h0=h0,
        grad_h0=grad,
        hess_h0=lambda s: hess_const,
        h1=h1,
        label="model",
        angular=(True,) + (False,) * d,
        meta={"kind": "model", "coeffs": coeffs},
    )


def _hyperboloid_system(params: dict) -> HamiltonianSystem:
    # metric ds^2 = cosh^2(v) du^2 + cosh(2v) dv^2 in the chart
    # (u, v) -> (cosh v cos u, cosh v sin u, sinh v)
    def h0(s: PhaseState) -> float:
        v = s.y[1]
        eu, ev = s.eta
        return float(0.5 * (eu ** 2 / np.cosh(v) ** 2 + ev ** 2 / np.cosh(2 * v)))

    def grad(s: PhaseState) -> Array:
        v = s.y[1]
        eu, ev = s.eta
        cv, c2v = np.cosh(v), np.cosh(2 * v)
        dv = -eu ** 2 * np.sinh(v) / cv ** 3 - ev ** 2 * np.sinh(2 * v) / c2v ** 2
        return np.array([0.0, dv, eu / cv ** 2, ev / c2v])

    def hess(s: PhaseState) -> Array:
        v = s.y[1]
        eu, ev = s.eta
        cv, sv = np.cosh(v), np.sinh(v)
        c2v, s2v = np.cosh(2 * v), np.sinh(2 * v)
        h = np.zeros((4, 4))
        # d2/dv2
        h[1, 1] = (-eu ** 2 * (cv ** 2 - 3 * sv ** 2) / cv ** 4
                   - ev ** 2 * (2 * c2v ** 2 - 4 * s2v ** 2) / c2v ** 3)
        h[1, 2] = h[2, 1] = -2 * eu * sv / cv ** 3
        h[1, 3] = h[3, 1] = -2 * ev * s2v / c2v ** 2
        h[2, 2] = 1.0 / cv ** 2
        h[3, 3] = 1.0 / c2v
        return h

    return make_system(
        dim_n=2, h0=h0, grad_h0=grad, hess_h0=hess,
        label="hyperboloid", angular=(True, False),
        meta={"kind": "hyperboloid"},
    )


def _coulomb_stark_system(params: dict) -> HamiltonianSystem:
    a = float(params.get("a", 1.0))
    if a <= 0:
        raise ValueError(f"Stark strength a must be positive, got {a}")
    n = int(params.get("dim", 2))
    if n not in (2, 3):
        raise ValueError("coulomb_stark supports dim 2 or 3")

    def h0(s: PhaseState) -> float:
        r = np.linalg.norm(s.y)
        return float(s.eta @ s.eta + 1.0 / r + a * s.y[0])

    def grad(s: PhaseState) -> Array:
        r = np.linalg.norm(s.y)
        gy = -s.y / r ** 3
        gy[0] += a
        return np.concatenate([gy, 2.0 * s.eta])

    def hess(s: PhaseState) -> Array:
        r = np.linalg.norm(s.y)
        yy = np.outer(s.y, s.y)
        hy = (3.0 * yy / r ** 2 - np.eye(n)) / r ** 3
        h = np.zeros((2 * n, 2 * n))
        h[:n, :n] = hy
        h[n:, n:] = 2.0 * np.eye(n)
        return h

    return make_system(
        dim_n=n, h0=h0, grad_h0=grad, hess_h0=hess,
        label="coulomb_stark",
        domain_guard=lambda s: float(np.linalg.norm(s.y) - 1e-3),
        meta={"kind": "coulomb_stark", "a": a, "dim": n},
    )


_BUILTINS = {
    "model": _model_system,
    "hyperboloid": _hyperboloid_system,
    "coulomb_stark": _coulomb_stark_system,
}


def make_builtin(kind: str, params: dict | None = None) -> HamiltonianSystem:
    """Construct one of the built-in systems by name.

    Parameters
    ----------
    kind : {"model", "hyperboloid", "coulomb_stark"}
    params : dict
        ``model``: ``coeffs`` as a list of complex values or (re, im) pairs,
        each purely real positive (hyperbolic) or purely imaginary with
        positive frequency (elliptic); optional ``h1`` callable.
        ``coulomb_stark``: ``a > 0`` and optional ``dim`` in {2, 3}.
        ``hyperboloid``: no parameters.
    """
    if kind not in _BUILTINS:
        raise ValueError(f"unknown system kind {kind!r}; expected one of {sorted(_BUILTINS)}")
    return _BUILTINS[kind](params or {})


def coulomb_stark_threshold(a: float) -> float:
    """Trapping threshold energy, computed as the minimum over r > 0 of the
    axial effective potential ``1/r + a r`` (not hard-coded)."""
    from scipy.optimize import minimize_scalar

    res = minimize_scalar(lambda r: 1.0 / r + a * r, bracket=(1e-3, 1.0 / np.sqrt(a), 1e3))
    return float(res.fun)


# ---------------------------------------------------------------------------
# flows

def _rhs(sys: HamiltonianSystem, with_var: bool):
    n2 = 2 * sys.dim_n
    j = standard_j(n2)

    if not with_var:
        def rhs(t, z):
            return sys.xfield(z)
        return rhs

    def rhs(t, zz):
        z = zz[:n2]
        zmat = zz[n2:].reshape(n2, n2)
        dz = sys.xfield(z)
        dmat = j @ sys.hess_z(z) @ zmat
        return np.concatenate([dz, dmat.ravel()])

    return rhs


def integrate(sys: HamiltonianSystem, z0: Array, t: float, tol: float,
              with_variational: bool = False, dense: bool = False,
              events=None, method: str = "DOP853", max_step: float = np.inf):
    """Low-level wrapper around ``solve_ivp`` used by the whole package.

    Integrates Hamilton's equations (optionally with the variational system
    ``Zdot = J H'' Z``, ``Z(0) = Id``) from 0 to ``t`` and returns the scipy
    solution object.  Raises ``FlowError``/``DomainExitError`` on failure.
    """
    n2 = 2 * sys.dim_n
    y0 = np.asarray(z0, dtype=float)
    if with_variational:
        y0 = np.concatenate([y0, np.eye(n2).ravel()])
    ev = list(events) if events else []
    if sys.domain_guard is not None:
        def guard(tt, zz):
            return sys.domain_guard(PhaseState.from_z(zz[:n2]))
        guard.terminal = True
        guard.direction = -1
        ev.append(guard)
    sol = solve_ivp(_rhs(sys, with_variational), (0.0, t), y0, method=method,
                    rtol=tol, atol=tol * 1e-2, dense_output=dense or bool(ev),
                    events=ev if ev else None, max_step=max_step)
    if not sol.success:
        raise FlowError(f"integration failed: {sol.message}",
                        last_time=float(sol.t[-1]) if sol.t.size else 0.0)
    if sys.domain_guard is not None and sol.status == 1 and ev and sol.t_events[-1].size:
        # only the guard event is terminal unless callers mark theirs terminal
        if not events or all(ev_t.size == 0 for ev_t in sol.t_events[:-1]):
            raise DomainExitError("trajectory left the system domain",
                                  last_time=float(sol.t_events[-1][0]))
    return sol


def flow(sys: HamiltonianSystem, start: PhaseState, t: float, tol: float = 1e-10,
         with_variational: bool = False) -> FlowResult:
    """Flow ``start`` for time ``t`` under Hamilton's equations.

    Parameters
    ----------
    sys : HamiltonianSystem
    start : PhaseState
    t : float
        Integration time (may be zero).
    tol : float
        Relative integration tolerance, must lie in [1e-14, 1e-6].
    with_variational : bool
        Co-integrate the variational matrix ``Z`` with ``Z(0) = Id``.

    Returns
    -------
    FlowResult
        End state, optional variational matrix, elapsed time and the energy
        drift ``|h0(end) - h0(start)|``.
    """
    if not (1e-14 <= tol <= 1e-6):
        raise ValueError(f"tol must lie in [1e-14, 1e-6], got {tol}")
    n2 = 2 * sys.dim_n
    if t == 0.0:
        var = np.eye(n2) if with_variational else None
        return FlowResult(state=start, variational=var, time=0.0, energy_drift=0.0)
    sol = integrate(sys, start.z, t, tol, with_variational=with_variational)
    zz = sol.y[:, -1]
    state = PhaseState.from_z(zz[:n2])
    var = zz[n2:].reshape(n2, n2) if with_variational else None
    drift = abs(sys.h0(state) - sys.h0(start))
    return FlowResult(state=state, variational=var, time=float(sol.t[-1]), energy_drift=drift)
