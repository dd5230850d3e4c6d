"""Monodromy, section reduction, Floquet multipliers/exponents and their classes.

Multipliers of the section-reduced monodromy come in symplectic groups
``{lambda, 1/lambda, conj(lambda), 1/conj(lambda)}`` and are classified as

* ``ee`` (elliptic): ``| |lambda| - 1 | <= tol``, lambda != +-1,
* ``hr`` (real hyperbolic): lambda real with ``| |lambda| - 1 | > tol``,
* ``hc`` (complex hyperbolic): everything else.

Each elliptic pair is ordered by the sign of ``(1/2i) sigma(conj(u), u)`` on
its eigenvector u; the positive member is flagged "first kind".  The
``selected`` subset (size d) collects the unstable and first-kind exponents:
positive hr exponents, the two ``Re mu > 0`` members of each hc quartet, and
the first-kind member of each ee pair.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dynsys import HamiltonianSystem, PhaseState, integrate
from .errors import (DefectiveSpectrumError, DegenerateOrbitError, FlowError,
                     LatticeSizeError, SpectrumHypothesisError)
from .orbit import PeriodicOrbit
from .sympl import TransverseFrame, pairing_residual, sigma, symplectic_defect

Array = np.ndarray

CLASS_ELLIPTIC = "ee"
CLASS_REAL_HYPERBOLIC = "hr"
CLASS_COMPLEX_HYPERBOLIC = "hc"

_CLASS_RANK = {CLASS_REAL_HYPERBOLIC: 0, CLASS_COMPLEX_HYPERBOLIC: 1, CLASS_ELLIPTIC: 2}


@dataclass
class FloquetSpectrum:
    """Section monodromy eigen-data at one energy."""

    section_monodromy: Array
    multipliers: Array                 # complex, length 2d
    exponents: Array                   # principal logs, exp(mu_j) = lambda_j
    classes: list[str]                 # per multiplier: ee / hr / hc
    first_kind: Array                  # bool per multiplier (elliptic only)
    selected: Array                    # index subset of size d
    energy: float
    eigenvectors: Array = field(repr=False, default=None)   # columns match multipliers

    @property
    def d(self) -> int:
        return self.multipliers.size // 2

    @property
    def selected_exponents(self) -> Array:
        return self.exponents[self.selected]

    @property
    def selected_multipliers(self) -> Array:
        return self.multipliers[self.selected]


@dataclass
class NonResonanceReport:
    """Result of the integer-combination scan over the selected exponents."""

    k_max: int
    violations_weak: list[tuple[int, ...]]
    violations_strong: list[tuple[int, ...]]
    tolerance: float

    @property
    def clean(self) -> bool:
        return not self.violations_weak and not self.violations_strong

    def to_dict(self) -> dict:
        return {
            "k_max": self.k_max,
            "tolerance": self.tolerance,
            "violations_weak": [list(k) for k in self.violations_weak],
            "violations_strong": [list(k) for k in self.violations_strong],
            "clean": self.clean,
        }


# ---------------------------------------------------------------------------


def monodromy(sys: HamiltonianSystem, orbit: PeriodicOrbit, tol: float = 1e-12) -> Array:
    """Variational matrix over one period, ``Z(T)`` with ``Z(0) = Id``.

    Raises ``FlowError`` if the integration fails or the symplectic defect of
    the result exceeds 1e-6 (a symptom of too-loose tolerances).
    """
    n2 = 2 * sys.dim_n
    if orbit.period == 0.0:
        return np.eye(n2)
    sol = integrate(sys, orbit.base_point.z, orbit.period, tol, with_variational=True)
    zmat = sol.y[n2:, -1].reshape(n2, n2)
    defect = symplectic_defect(zmat)
    if defect > 1e-6 * max(1.0, float(np.max(np.abs(zmat)))):
        raise FlowError(f"monodromy symplectic defect {defect:.3e} above 1e-6; "
                        "tighten the integration tolerance")
    return zmat


def reduce_to_section(zmat: Array, orbit: PeriodicOrbit, sys: HamiltonianSystem) -> Array:
    """Co-restriction of a 2n x 2n variational matrix to the Poincare section.

    The result is expressed in the deterministic symplectic basis of the
    section intersected with the energy shell at the orbit base point; its
    spectrum is the spectrum of ``zmat`` with the double unit eigenvalue of
    the flow/energy plane removed.

    Raises ``DegenerateOrbitError`` when the transverse block itself carries a
    unit multiplier (violating the non-degeneracy hypothesis).
    """
    z0 = orbit.base_point.z
    frame = TransverseFrame(sys.xfield(z0), sys.grad_z(z0))
    dp = frame.reduce(np.asarray(zmat, dtype=float))
    lam = np.linalg.eigvals(dp)
    if np.any(np.abs(lam - 1.0) <= 1e-8):
        raise DegenerateOrbitError("transverse block has a unit Floquet multiplier")
    return dp


def section_frame(sys: HamiltonianSystem, state: PhaseState) -> TransverseFrame:
    """Deterministic symplectic section frame at a point (shared by all stages)."""
    z = state.z
    return TransverseFrame(sys.xfield(z), sys.grad_z(z))


def exponents_and_classes(dp: Array, tol: float = 1e-6, energy: float = float("nan"),
                          cond_cap: float = 1e8) -> FloquetSpectrum:
    """Eigen-decompose a section monodromy and classify its spectrum.

    Parameters
    ----------
    dp : (2d, 2d) array
        Symplectic section monodromy (defect checked against 1e-7 x scale).
    tol : float
        Relative tolerance on ``|lambda| - 1`` for calling a multiplier
        elliptic; near-unit hyperbolic multipliers are physically meaningful,
        so this is configurable.
    """
    dp = np.asarray(dp, dtype=float)
    two_d = dp.shape[0]
    d = two_d // 2
    scale = max(1.0, float(np.max(np.abs(dp))))
    if symplectic_defect(dp) > 1e-7 * scale:
        raise SpectrumHypothesisError("input matrix is not symplectic within 1e-7")

    lam, vecs = np.linalg.eig(dp)
    if np.linalg.cond(vecs) > cond_cap:
        raise DefectiveSpectrumError(
            "section monodromy is defective (eigenvector condition number "
            f"above {cond_cap:.1e}); distinct-exponent hypothesis violated")

    if np.any(np.abs(lam - 1.0) <= 1e-8):
        raise DegenerateOrbitError("Floquet multiplier equal to 1 within 1e-8")
    real_mask = np.abs(lam.imag) <= tol * np.abs(lam)
    if np.any(real_mask & (lam.real < 0)):
        raise SpectrumHypothesisError("Floquet multiplier on the closed negative real axis")

    res = pairing_residual(lam)
    if res > 1e-8 * scale:
        raise SpectrumHypothesisError(f"symplectic pairing residual {res:.3e} above tolerance")

    mu = np.log(lam)
    classes = []
    for l_j, is_real in zip(lam, real_mask):
        if abs(abs(l_j) - 1.0) <= tol:
            classes.append(CLASS_ELLIPTIC)
        elif is_real:
            classes.append(CLASS_REAL_HYPERBOLIC)
        else:
            classes.append(CLASS_COMPLEX_HYPERBOLIC)

    first = np.zeros(two_d, dtype=bool)
    for j in range(two_d):
        if classes[j] == CLASS_ELLIPTIC:
            u = vecs[:, j]
            first[j] = (sigma(np.conj(u), u) / 2j).real > 0.0

    selected = []
    for j in range(two_d):
        cls = classes[j]
        if cls == CLASS_REAL_HYPERBOLIC and mu[j].real > 0:
            selected.append(j)
        elif cls == CLASS_COMPLEX_HYPERBOLIC and mu[j].real > 0:
            selected.append(j)
        elif cls == CLASS_ELLIPTIC and first[j]:
            selected.append(j)
    if len(selected) != d:
        raise SpectrumHypothesisError(
            f"selected exponent subset has size {len(selected)}, expected d = {d}")
    selected.sort(key=lambda j: (_CLASS_RANK[classes[j]], -mu[j].real, mu[j].imag))

    return FloquetSpectrum(section_monodromy=dp, multipliers=lam, exponents=mu,
                           classes=classes, first_kind=first,
                           selected=np.array(selected, dtype=int), energy=float(energy),
                           eigenvectors=vecs)


def spectrum_of_orbit(sys: HamiltonianSystem, orbit: PeriodicOrbit, tol: float = 1e-6,
                      flow_tol: float = 1e-12) -> FloquetSpectrum:
    """Convenience chain: monodromy -> section reduction -> classification."""
    zmat = monodromy(sys, orbit, tol=flow_tol)
    dp = reduce_to_section(zmat, orbit, sys)
    return exponents_and_classes(dp, tol=tol, energy=orbit.energy)


def check_nonresonance(spec: FloquetSpectrum, k_max: int, tol: float = 1e-9) -> NonResonanceReport:
    """Exhaustive scan for integer combinations of exponents in 2 pi i Z.

    ``violations_weak`` lists k with ``sum k_j mu_j in 2 pi i Z`` but nonzero
    (failure of the plain non-resonance condition); ``violations_strong``
    lists any nonzero k with the sum in ``2 pi i Z`` (failure of the strong
    condition).  Membership is tested with absolute tolerance ``tol`` on both
    the real part and the distance of the imaginary part from ``2 pi Z``.
    """
    return scan_nonresonance(spec.selected_exponents, k_max, tol)


def scan_nonresonance(mu, k_max: int, tol: float = 1e-9) -> NonResonanceReport:
    """Non-resonance scan over an explicit vector of selected exponents."""
    if k_max < 0 or k_max > 30:
        raise ValueError("k_max must lie in [0, 30]")
    mu = np.asarray(mu, dtype=complex)
    d = mu.size
    n_points = (2 * k_max + 1) ** d
    if n_points > 5e7:
        raise LatticeSizeError(f"non-resonance scan of {n_points} points refused")

    rng = np.arange(-k_max, k_max + 1)
    grids = np.meshgrid(*([rng] * d), indexing="ij")
    kmat = np.stack([g.ravel() for g in grids], axis=1)      # (n_points, d)
    sums = kmat.astype(float) @ mu
    re_ok = np.abs(sums.real) <= tol
    im_res = np.abs(sums.imag - 2 * np.pi * np.round(sums.imag / (2 * np.pi)))
    member = re_ok & (im_res <= tol)
    nonzero_sum = np.abs(sums) > tol
    nonzero_k = np.any(kmat != 0, axis=1)

    weak = kmat[member & nonzero_sum]
    strong = kmat[member & nonzero_k]
    weak_list = sorted(tuple(int(x) for x in row) for row in weak)
    strong_list = sorted(tuple(int(x) for x in row) for row in strong)
    return NonResonanceReport(k_max=k_max, violations_weak=weak_list,
                              violations_strong=strong_list, tolerance=tol)
