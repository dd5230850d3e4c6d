"""Winding index of the transverse symplectic path along the orbit.

The section-reduced variational path ``Psi(s)`` (``Psi(0) = Id``,
``Psi(T) = dP_E``) is expressed in a symplectic basis adapted to the
unstable/first-kind splitting, so the initial Lagrangian frame is the
horizontal one: ``C(0) = Id``, ``B(0) = 0``.  The transported frame
``(C(s), B(s))`` is the upper block row of ``Psi(s)``, orthonormalized on the
left; its Cayley matrix ``U(s) = (C + iB)(C - iB)^{-1}`` is then unitary and
equals ``u0 u0^T`` for the framing unitary ``u0 = C + iB``.

Caustics are the times where the path crosses the Maslov cycle
``det(Psi(s) - Id) = 0``, i.e. where a first-kind eigenvalue pair of the
transverse flow crosses 1 (for a harmonic block with frequency ``omega``
these are exactly the times with ``s omega in 2 pi Z``).  They are located by
tracking the eigenphases of ``u0(s)`` through nonzero multiples of ``2 pi``
and confirmed by a rank test on ``Psi - Id``.  Each confirmed transversal
crossing contributes a jump of ``+-2`` (both members of the elliptic pair
cross 1 together, signed by the winding direction); the assembled index is
the sum of the jumps.  Purely hyperbolic paths have no crossings and index 0.
This assembly is the one singled out by the model calibration suite.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment

from .dynsys import HamiltonianSystem, PhaseState, integrate
from .errors import (AmbiguousCrossingError, CausticRefinementError,
                     DegenerateOrbitError, FlowError, SpectrumHypothesisError)
from .floquet import (CLASS_COMPLEX_HYPERBOLIC, CLASS_ELLIPTIC,
                      CLASS_REAL_HYPERBOLIC, FloquetSpectrum, section_frame)
from .orbit import PeriodicOrbit
from .sympl import sigma, symplectic_defect

Array = np.ndarray

TWO_PI = 2.0 * np.pi


@dataclass
class LagrangianPath:
    """Sampled transported Lagrangian frame along one orbit period."""

    times: Array
    c_mats: list[Array]
    b_mats: list[Array]
    caustics: list[float]
    psi_mats: list[Array] = field(repr=False, default=None)
    det_phase: Array = field(repr=False, default=None)     # unwrapped arg det(C + iB)
    eig_phases: Array = field(repr=False, default=None)    # (n_times, d), tracked
    jumps: list[tuple[float, int]] = field(default_factory=list)
    unconfirmed: list[float] = field(default_factory=list)
    period: float = 0.0
    d: int = 0


@dataclass
class IndexResult:
    """Assembled winding index of the orbit."""

    g: int
    regular_winding: float        # (1/4 pi) total variation of arg det U^2
    jump_count: int
    per_caustic: list[tuple[float, int]]
    mod4_consistent: bool | None = None

    def to_dict(self) -> dict:
        return {
            "g": self.g,
            "regular_winding": self.regular_winding,
            "jumps": [{"t": t, "jump": j} for t, j in self.per_caustic],
        }


# ---------------------------------------------------------------------------
# adapted symplectic basis from the spectrum


def _realized(vec: Array, tol: float = 1e-7) -> Array:
    """Rotate a complex eigenvector of a real eigenvalue onto the real axis."""
    k = int(np.argmax(np.abs(vec)))
    w = vec * np.conj(vec[k] / abs(vec[k]))
    if np.max(np.abs(w.imag)) > tol * np.max(np.abs(w.real)):
        raise SpectrumHypothesisError("eigenvector of a real multiplier is not realizable")
    return w.real


def adapted_frame(spectrum: FloquetSpectrum) -> Array:
    """Symplectic change of basis putting the unstable/first-kind directions
    on the horizontal axes, one block per selected exponent, in the canonical
    selected order (so path blocks align with the transverse quantum numbers).
    """
    d = spectrum.d
    lam = spectrum.multipliers
    vecs = spectrum.eigenvectors
    a_cols: list[Array | None] = [None] * d
    b_cols: list[Array | None] = [None] * d
    done: set[int] = set()

    for slot, j in enumerate(spectrum.selected):
        if slot in done:
            continue
        cls = spectrum.classes[j]
        if cls == CLASS_REAL_HYPERBOLIC:
            u = _realized(vecs[:, j])
            u = u / np.linalg.norm(u)
            others = np.abs(lam * lam[j] - 1.0) + np.where(
                np.arange(lam.size) == j, 1e9, 0.0)
            w = _realized(vecs[:, int(np.argmin(others))])
            a_cols[slot], b_cols[slot] = u, w / sigma(u, w)
        elif cls == CLASS_ELLIPTIC:
            u = vecs[:, j]
            a, b = u.real.copy(), u.imag.copy()
            s = sigma(a, b)
            if s <= 0:
                raise SpectrumHypothesisError("selected elliptic exponent is not first kind")
            a_cols[slot], b_cols[slot] = a / np.sqrt(s), b / np.sqrt(s)
        else:  # complex hyperbolic: handle the (mu, conj mu) pair together
            partner = None
            for slot2 in range(slot + 1, d):
                j2 = spectrum.selected[slot2]
                if (spectrum.classes[j2] == CLASS_COMPLEX_HYPERBOLIC
                        and abs(lam[j2] - np.conj(lam[j])) < 1e-8 * abs(lam[j])):
                    partner = slot2
                    break
            if partner is None:
                raise SpectrumHypothesisError("unpaired complex-hyperbolic exponent")
            u = vecs[:, j] / np.linalg.norm(vecs[:, j])
            w = vecs[:, int(np.argmin(np.abs(lam - 1.0 / lam[j])))]
            a1, a2 = u.real.copy(), u.imag.copy()
            r1, r2 = w.real.copy(), w.imag.copy()
            gram = np.array([[sigma(a1, r1), sigma(a1, r2)],
                             [sigma(a2, r1), sigma(a2, r2)]])
            x = np.linalg.inv(gram)
            b1 = r1 * x[0, 0] + r2 * x[1, 0]
            b2 = r1 * x[0, 1] + r2 * x[1, 1]
            b2 = b2 + sigma(b1, b2) * a1
            a_cols[slot], b_cols[slot] = a1, b1
            a_cols[partner], b_cols[partner] = a2, b2
            done.add(partner)
        done.add(slot)

    r0 = np.column_stack([np.asarray(c, dtype=float) for c in a_cols + b_cols])
    if symplectic_defect(r0) > 1e-6:
        raise SpectrumHypothesisError("adapted section basis failed the symplectic check")
    return r0


# ---------------------------------------------------------------------------
# path evaluation


class _PathEvaluator:
    """Evaluates the adapted, co-restricted variational path at any time."""

    def __init__(self, sys: HamiltonianSystem, orbit: PeriodicOrbit,
                 spectrum: FloquetSpectrum, flow_tol: float):
        self.sys = sys
        self.d = spectrum.d
        self.n2 = 2 * sys.dim_n
        self.period = orbit.period
        self.sol = integrate(sys, orbit.base_point.z, orbit.period, flow_tol,
                             with_variational=True, dense=True)
        self.frame0 = section_frame(sys, orbit.base_point)
        self.r0 = adapted_frame(spectrum)
        self._cache: dict[float, tuple] = {}

    def bundle(self, s: float) -> tuple[Array, Array, Array, Array]:
        """(psi_adapted, c_normalized, b_normalized, u0) at time ``s``."""
        s = float(min(max(s, 0.0), self.period))
        hit = self._cache.get(s)
        if hit is not None:
            return hit
        w = self.sol.sol(s)
        zmat = w[self.n2:].reshape(self.n2, self.n2)
        frame_s = section_frame(self.sys, PhaseState.from_z(w[:self.n2]))
        psi_gs = self.frame0.reduce(zmat, end=frame_s)
        psi = np.linalg.solve(self.r0, psi_gs @ self.r0)
        d = self.d
        c_raw, b_raw = psi[:d, :d], psi[:d, d:]
        m = c_raw @ c_raw.T + b_raw @ b_raw.T
        w_eig, v_eig = np.linalg.eigh(m)
        g = v_eig @ np.diag(1.0 / np.sqrt(w_eig)) @ v_eig.T
        c_n, b_n = g @ c_raw, g @ b_raw
        u0 = c_n + 1j * b_n
        defect = float(np.max(np.abs(u0 @ u0.conj().T - np.eye(d))))
        if defect > 1e-7:
            raise FlowError(f"transported frame lost unitarity (defect {defect:.2e}); "
                            "tighten the flow tolerance")
        out = (psi, c_n, b_n, u0)
        self._cache[s] = out
        return out

    def eig(self, s: float) -> tuple[Array, Array]:
        *_, u0 = self.bundle(s)
        return np.linalg.eig(u0)


def _match(prev_vecs: Array, vals: Array, vecs: Array) -> tuple[Array, Array]:
    """Reorder (vals, vecs) so columns continue the branches of ``prev_vecs``."""
    overlap = np.abs(prev_vecs.conj().T @ vecs)
    rows, cols = linear_sum_assignment(-overlap)
    order = np.empty(len(cols), dtype=int)
    order[rows] = cols
    return vals[order], vecs[:, order]


def plus_path(sys: HamiltonianSystem, orbit: PeriodicOrbit, spectrum: FloquetSpectrum,
              n_samples: int = 257, flow_tol: float = 1e-12,
              max_samples: int = 60000) -> LagrangianPath:
    """Transport the unstable/first-kind frame around the orbit.

    Samples are refined until ``arg det U^2`` moves less than pi/2 (and every
    tracked eigenphase less than pi/8) between neighbours; exhausting the
    refinement budget raises ``CausticRefinementError`` with the offending
    bracket.
    """
    if n_samples < 16:
        raise ValueError("n_samples must be at least 16")
    ev = _PathEvaluator(sys, orbit, spectrum, flow_tol)
    d = ev.d
    times = list(np.linspace(0.0, orbit.period, n_samples))

    for _ in range(40):
        new_times = []
        vals_prev, vecs_prev = ev.eig(times[0])
        for i in range(len(times) - 1):
            vals_i, vecs_i = ev.eig(times[i + 1])
            vn, vecs_n = _match(vecs_prev, vals_i, vecs_i)
            d_eig = float(np.max(np.abs(np.angle(vn / vals_prev))))
            d_det = abs(float(np.sum(np.angle(vn / vals_prev))))
            if 4 * d_det >= 0.5 * np.pi or d_eig >= np.pi / 8:
                if times[i + 1] - times[i] < 1e-12 * max(orbit.period, 1.0):
                    raise CausticRefinementError("sample refinement exhausted",
                                                 bracket=(times[i], times[i + 1]))
                new_times.append(0.5 * (times[i] + times[i + 1]))
            vals_prev, vecs_prev = vn, vecs_n
        if not new_times:
            break
        times = sorted(set(times + new_times))
        if len(times) > max_samples:
            raise CausticRefinementError("sample refinement exceeded the budget",
                                         bracket=(0.0, orbit.period))
    times = np.array(times)

    # tracked eigenphases and determinant phase along the refined grid
    n_t = times.size
    eig_phases = np.zeros((n_t, d))
    det_phase = np.zeros(n_t)
    c_mats, b_mats, psi_mats = [], [], []
    tracked_vecs = [None] * n_t
    vals_prev = vecs_prev = None
    for i, s in enumerate(times):
        psi, c_n, b_n, u0 = ev.bundle(s)
        psi_mats.append(psi)
        c_mats.append(c_n)
        b_mats.append(b_n)
        vals, vecs = np.linalg.eig(u0)
        if i == 0:
            eig_phases[0] = np.angle(vals)
            det_phase[0] = float(np.sum(np.angle(vals)))
        else:
            vals, vecs = _match(vecs_prev, vals, vecs)
            steps = np.angle(vals / vals_prev)
            eig_phases[i] = eig_phases[i - 1] + steps
            det_phase[i] = det_phase[i - 1] + float(np.sum(steps))
        tracked_vecs[i] = vecs
        vals_prev, vecs_prev = vals, vecs

    caustics: list[float] = []
    jumps: list[tuple[float, int]] = []
    unconfirmed: list[float] = []
    for j in range(d):
        th = eig_phases[:, j]
        for i in range(n_t - 1):
            a, b = float(th[i]), float(th[i + 1])
            lo, hi = (a, b) if a <= b else (b, a)
            for m in range(int(np.ceil(lo / TWO_PI - 1e-12)),
                           int(np.floor(hi / TWO_PI + 1e-12)) + 1):
                if m == 0:
                    continue
                target = TWO_PI * m
                if not (lo < target <= hi):
                    continue          # endpoint hits count in the interval they close
                if abs(b - a) < 1e-10:
                    raise AmbiguousCrossingError(
                        f"tangential unit-circle crossing near t = {times[i]:.9g}")
                t_star = _refine_crossing(ev, times[i], times[i + 1],
                                          eig_phases[i].copy(), tracked_vecs[i],
                                          j, target)
                psi_star, *_ = ev.bundle(t_star)
                gap = np.linalg.svd(psi_star - np.eye(2 * d), compute_uv=False)[-1]
                if gap <= 1e-5 * (1.0 + float(np.max(np.abs(psi_star)))):
                    caustics.append(t_star)
                    jumps.append((t_star, 2 if b > a else -2))
                else:
                    unconfirmed.append(t_star)

    jumps.sort(key=lambda tj: tj[0])
    return LagrangianPath(times=times, c_mats=c_mats, b_mats=b_mats,
                          caustics=sorted(caustics), psi_mats=psi_mats,
                          det_phase=det_phase, eig_phases=eig_phases,
                          jumps=jumps, unconfirmed=sorted(unconfirmed),
                          period=orbit.period, d=d)


def _refine_crossing(ev: _PathEvaluator, t_lo: float, t_hi: float,
                     theta_lo: Array, vecs_lo: Array, pick: int,
                     target: float, tol: float = 1e-10) -> float:
    """Bisect the time where eigenphase branch ``pick`` crosses ``target``."""
    ref_vals, _ = _match(vecs_lo, *ev.eig(t_lo))
    ref_vecs = vecs_lo
    ref_theta = theta_lo
    lo, hi = t_lo, t_hi
    f_lo = float(ref_theta[pick] - target)
    while hi - lo > max(tol * max(ev.period, 1.0), 1e-13):
        mid = 0.5 * (lo + hi)
        vals_m, vecs_m = _match(ref_vecs, *ev.eig(mid))
        th_m = ref_theta + np.angle(vals_m / ref_vals)
        f_mid = float(th_m[pick] - target)
        if f_lo * f_mid <= 0:
            hi = mid
        else:
            lo, f_lo = mid, f_mid
            ref_vals, ref_vecs, ref_theta = vals_m, vecs_m, th_m
    return 0.5 * (lo + hi)


def cayley(path: LagrangianPath) -> list[Array | None]:
    """Cayley matrices ``(C + iB)(C - iB)^{-1}`` along the path.

    Samples adjacent to a caustic, or with an ill-conditioned ``C - iB``,
    are flagged (returned as ``None``) instead of inverted.
    """
    out: list[Array | None] = []
    dt = float(np.min(np.diff(path.times))) if path.times.size > 1 else 0.0
    for t, c, b in zip(path.times, path.c_mats, path.b_mats):
        m = c - 1j * b
        near_caustic = any(abs(t - tc) <= 0.5 * dt for tc in path.caustics)
        if near_caustic or np.linalg.cond(m) > 1e10:
            out.append(None)
            continue
        u = (c + 1j * b) @ np.linalg.inv(m)
        defect = float(np.max(np.abs(u @ u.conj().T - np.eye(u.shape[0]))))
        if defect > 1e-7:
            raise FlowError(f"Cayley matrix not unitary (defect {defect:.2e})")
        out.append(u)
    return out


def cz_index(path: LagrangianPath, parity_check: bool = False) -> IndexResult:
    """Assemble the winding index from the path data.

    ``regular_winding`` is ``(1/4 pi)`` times the total continuous variation
    of ``arg det U^2`` (for a single harmonic block of frequency ``omega``
    over one period this evaluates to ``2 omega``); the index ``g`` is the
    sum of the ``+-2`` jumps at confirmed caustic crossings.
    """
    if path.psi_mats:
        psi_t = path.psi_mats[-1]
        gap = np.linalg.svd(psi_t - np.eye(psi_t.shape[0]), compute_uv=False)[-1]
        if gap <= 1e-8 * (1.0 + float(np.max(np.abs(psi_t)))):
            raise DegenerateOrbitError("path endpoint has a unit multiplier; "
                                       "index undefined for degenerate orbits")
    regular = float(path.det_phase[-1] - path.det_phase[0]) / np.pi
    total = int(round(sum(j for _, j in path.jumps)))
    mod4 = (total % 2 == 0) if parity_check else None
    return IndexResult(g=total, regular_winding=regular,
                       jump_count=len(path.jumps), per_caustic=list(path.jumps),
                       mod4_consistent=mod4)
