"""Quantum-number lattice and complex Bohr-Sommerfeld root finding.

A resonance labelled ``(m, k)`` is a complex energy solving

    s0(E) - h * [ s1(E) + (1/2 pi i) sum_j k_j mu_j(E) ] = m h

on the fitted family data.  The sign with which the order-h block enters is
pinned by the model calibration: with the unstable/first-kind exponents
selected upstream (``mu = 2 pi c`` for a hyperbolic block, ``2 pi i omega``
for an elliptic one) this reproduces the exact model resonance set
``E = m h - i h sum_j c_j (k_j + 1/2)``, resonance widths in the lower half
plane and real zero-point shifts.  Transverse labels ``k`` are non-negative,
matching the monomial-degree interpretation of the transverse spectrum.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .action import FamilyFit
from .errors import (ConvergenceError, FitDomainError, LatticeSizeError,
                     SemiclassicalError)
from .floquet import NonResonanceReport

Array = np.ndarray

_SNAP_IMAG = 1e-13     # |Im E| below this is solver noise; resonances never sit above the axis


@dataclass
class BSConfig:
    """Window, lattice caps and Newton controls for the resonance sweep.

    The window is ``[e_center - eps0, e_center + eps0] - i [0, h^delta]``;
    ``e_center = 0`` recovers the spectral-parameter normalization in which
    the trapping energy sits at the origin.
    """

    h: float
    eps0: float
    delta: float = 0.5
    k_cap_const: float = 1.0
    newton_tol: float = 1e-10
    newton_max_iter: int = 40
    e_center: float = 0.0
    lattice_cap: int = 10 ** 6
    accuracy_const: float = 1.0
    merge_tol: float = 1e-12

    def __post_init__(self):
        if not (0.0 < self.h <= 0.5):
            raise ValueError(f"h must lie in (0, 0.5], got {self.h}")
        if not (0.0 < self.delta < 1.0):
            raise ValueError(f"delta must lie strictly inside (0, 1), got {self.delta}")
        if self.eps0 <= 0 or self.k_cap_const <= 0:
            raise ValueError("eps0 and k_cap_const must be positive")
        if self.newton_tol <= 0 or self.newton_max_iter < 1:
            raise ValueError("invalid Newton controls")

    @property
    def depth(self) -> float:
        return self.h ** self.delta

    @property
    def window_lo(self) -> float:
        return self.e_center - self.eps0

    @property
    def window_hi(self) -> float:
        return self.e_center + self.eps0

    @property
    def m_cap(self) -> int:
        return int(np.floor(self.eps0 / self.h + 1e-12))

    @property
    def k_cap(self) -> int:
        return int(np.floor(self.k_cap_const * self.h ** (self.delta - 1.0) + 1e-12))

    def in_window(self, e: complex, edge_tol: float | None = None) -> bool:
        tol = self.newton_tol if edge_tol is None else edge_tol
        return bool(self.window_lo - tol <= e.real <= self.window_hi + tol
                    and -self.depth - tol <= e.imag <= 0.0)


@dataclass
class Resonance:
    """One labelled Bohr-Sommerfeld root."""

    energy: complex
    m: int
    k: tuple[int, ...]
    residual: float
    iters: int
    in_window: bool
    claimed_accuracy: float
    merged_labels: list[tuple[int, tuple[int, ...]]] = field(default_factory=list)
    warn_nonres: bool = False


@dataclass
class ResonanceSweep:
    """Output of a full lattice sweep."""

    resonances: list[Resonance]
    skipped: list[tuple[int, tuple[int, ...], str]]
    warn_nonres: bool


def k_tuples(d: int, cap: int) -> list[tuple[int, ...]]:
    """Non-negative integer d-tuples with 1-norm at most ``cap``, lexicographic."""
    if d == 1:
        return [(k,) for k in range(cap + 1)]
    out = []
    for first in range(cap + 1):
        for rest in k_tuples(d - 1, cap - first):
            out.append((first,) + rest)
    return sorted(out)


def enumerate_lattice(cfg: BSConfig, d: int) -> list[tuple[int, tuple[int, ...]]]:
    """Quantum-number lattice of the window.

    ``|m| <= eps0/h`` and ``|k|_1 <= k_cap_const * h^(delta-1)`` with
    non-negative transverse labels; deterministic ordering (m ascending, then
    k lexicographic).  Refuses lattices above ``cfg.lattice_cap`` points.
    """
    if d < 1:
        raise ValueError("transverse dimension d must be >= 1")
    ks = k_tuples(d, cfg.k_cap)
    n_points = (2 * cfg.m_cap + 1) * len(ks)
    if n_points > cfg.lattice_cap:
        raise LatticeSizeError(f"lattice of {n_points} points exceeds the cap "
                               f"{cfg.lattice_cap}")
    return [(m, k) for m in range(-cfg.m_cap, cfg.m_cap + 1) for k in ks]


# ---------------------------------------------------------------------------


def _g_funcs(fit: FamilyFit, cfg: BSConfig, m: int, kvec: Array):
    h = cfg.h

    def gval(e: complex) -> complex:
        corr = fit.s1(e) + (kvec @ fit.mu(e)) / (2j * np.pi)
        return fit.s0(e) - h * corr - m * h

    def gder(e: complex) -> complex:
        dcorr = fit.ds1(e) + (kvec @ fit.dmu(e)) / (2j * np.pi)
        return fit.ds0(e) - h * dcorr

    return gval, gder


def _real_seed(fit: FamilyFit, cfg: BSConfig, m: int, kvec: Array) -> float:
    """Approximate real root of the quantization condition (Newton on Re)."""
    h = cfg.h
    e = float(np.clip(cfg.e_center, fit.e_min, fit.e_max))
    for _ in range(8):
        corr = (fit.s1(e) + (kvec @ fit.mu(e)) / (2j * np.pi)).real
        f = fit.s0(e).real - h * corr - m * h
        df = fit.ds0(e).real
        if abs(df) < 1e-12:
            break
        e_new = float(np.clip(e - f / df, fit.e_min, fit.e_max))
        if abs(e_new - e) < 1e-14:
            e = e_new
            break
        e = e_new
    return e


def solve_bs(fit: FamilyFit, cfg: BSConfig, m: int, k, seed: complex | None = None) -> Resonance:
    """Newton iteration for the (m, k) root on the fitted analytic data.

    Converges when ``|G(E)| <= newton_tol * h``; the stored residual is
    ``|G(E)| / h``.  Raises ``ConvergenceError`` on divergence, a nearly zero
    Jacobian, or escape from the fit's validity region.
    """
    kvec = np.asarray(k, dtype=float)
    if kvec.ndim == 0:
        kvec = kvec[None]
    if kvec.size != fit.n_selected:
        raise ValueError(f"k has length {kvec.size}, expected {fit.n_selected}")
    if np.any(kvec < 0):
        raise ValueError("transverse labels must be non-negative")
    gval, gder = _g_funcs(fit, cfg, m, kvec)
    e = complex(seed) if seed is not None else complex(_real_seed(fit, cfg, m, kvec))
    h = cfg.h
    target = cfg.newton_tol * h
    for it in range(1, cfg.newton_max_iter + 1):
        try:
            g = gval(e)
        except FitDomainError as exc:
            raise ConvergenceError(f"Newton left the fit validity region: {exc}",
                                   iterations=it) from exc
        if abs(g) <= target:
            break
        dg = gder(e)
        if abs(dg) < 1e-12:
            raise ConvergenceError("Jacobian of the quantization condition is "
                                   "nearly zero", iterations=it, residual=abs(g))
        e = e - g / dg
    else:
        raise ConvergenceError(f"Newton did not reach |G| <= {target:.3e}",
                               iterations=cfg.newton_max_iter, residual=abs(gval(e)))

    if 0.0 < e.imag <= max(_SNAP_IMAG, 10 * target) or abs(e.imag) <= _SNAP_IMAG:
        e = complex(e.real, 0.0)
    resid = abs(gval(e)) / h
    return Resonance(energy=e, m=int(m), k=tuple(int(x) for x in kvec),
                     residual=float(resid), iters=it,
                     in_window=cfg.in_window(e),
                     claimed_accuracy=float(cfg.accuracy_const * h * np.sum(kvec) ** 2))


def _m_range(fit: FamilyFit, cfg: BSConfig, kvec: Array, margin: int = 2) -> range:
    """Longitudinal label range whose roots can fall in the window.

    Derived from the fitted action at the window edges (clamped into the fit
    domain); generous margins make up for the clamping and for integer branch
    shifts of the tracked exponents.
    """
    h = cfg.h
    lo = float(np.clip(cfg.window_lo, fit.e_min, fit.e_max))
    hi = float(np.clip(cfg.window_hi, fit.e_min, fit.e_max))
    ms = []
    for e in (lo, hi):
        corr = (fit.s1(e) + (kvec @ fit.mu(e)) / (2j * np.pi)).real
        ms.append((fit.s0(e).real - h * corr) / h)
    return range(int(np.floor(min(ms))) - margin, int(np.ceil(max(ms))) + margin + 1)


def compute_resonances(fit: FamilyFit, cfg: BSConfig,
                       nonres: NonResonanceReport | None = None) -> ResonanceSweep:
    """Sweep the quantum-number lattice and collect in-window roots.

    Transverse labels run over ``|k|_1 <= k_cap``; for each ``k`` the
    longitudinal label range is derived from the fitted action at the window
    edges, so roots whose label was shifted by an exponent branch choice are
    still found.  Per-point failures are collected, never aborting the sweep;
    distinct labels converging to the same energy within ``merge_tol`` are
    merged with all labels retained.
    """
    d = fit.n_selected
    warn = nonres is not None and bool(nonres.violations_strong)
    ks = k_tuples(d, cfg.k_cap)
    approx_size = (2 * cfg.m_cap + 2 * cfg.k_cap + 4) * len(ks)
    if approx_size > cfg.lattice_cap:
        raise LatticeSizeError(f"sweep of about {approx_size} points exceeds the cap")

    solutions: dict[tuple[int, tuple[int, ...]], Resonance] = {}
    skipped: list[tuple[int, tuple[int, ...], str]] = []
    for k in sorted(ks, key=lambda t: (sum(t), t)):
        kvec = np.asarray(k, dtype=float)
        parent = None
        for j, kj in enumerate(k):
            if kj > 0:
                parent = k[:j] + (kj - 1,) + k[j + 1:]
                break
        for m in _m_range(fit, cfg, kvec):
            seed = None
            if parent is not None and (m, parent) in solutions:
                seed = solutions[(m, parent)].energy
            elif (m - 1, k) in solutions:
                seed = solutions[(m - 1, k)].energy + cfg.h * 2 * np.pi / fit.t_period(
                    np.clip(solutions[(m - 1, k)].energy.real, fit.e_min, fit.e_max)).real
            try:
                res = solve_bs(fit, cfg, m, k, seed=seed)
            except SemiclassicalError as exc:
                skipped.append((m, k, str(exc)))
                continue
            solutions[(m, k)] = res

    kept = sorted((r for r in solutions.values() if r.in_window),
                  key=lambda r: (r.energy.real, r.energy.imag, r.m, r.k))
    merged: list[Resonance] = []
    for r in kept:
        if merged and abs(r.energy - merged[-1].energy) <= cfg.merge_tol:
            merged[-1].merged_labels.append((r.m, r.k))
            continue
        r.merged_labels = [(r.m, r.k)]
        r.warn_nonres = warn
        merged.append(r)
    return ResonanceSweep(resonances=merged, skipped=skipped, warn_nonres=warn)
