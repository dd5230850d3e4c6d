"""Symplectic linear algebra helpers.

Conventions used throughout the package:

* phase-space vectors are ordered ``z = (y, eta)`` (all positions, then all
  momenta), so Hamilton's equations read ``zdot = J grad_h0(z)``;
* ``J = [[0, I], [-I, 0]]``;
* the symplectic form is the bilinear form ``sigma(a, b) = a . (J b)``.

The sign of ``sigma`` is a convention.  It is pinned here so that the
positively-rotating harmonic block ``omega (x^2 + xi^2) / 2`` has its
``+i omega``-exponent eigenvector flagged as "first kind"; the model
calibration suite in the tests depends on (and validates) this choice.
"""

from __future__ import annotations

import numpy as np

from .errors import SectionError

Array = np.ndarray


def standard_j(dim2: int) -> Array:
    """Standard symplectic matrix of even size ``dim2``."""
    if dim2 % 2 != 0:
        raise ValueError(f"symplectic dimension must be even, got {dim2}")
    n = dim2 // 2
    j = np.zeros((dim2, dim2))
    j[:n, n:] = np.eye(n)
    j[n:, :n] = -np.eye(n)
    return j


def sigma(a: Array, b: Array) -> complex:
    """Symplectic form ``a . (J b)`` (bilinear, no conjugation)."""
    n = a.shape[0] // 2
    return a[:n] @ b[n:] - a[n:] @ b[:n]


def symplectic_defect(mat: Array) -> float:
    """Max-norm of ``M^T J M - J``; zero for an exactly symplectic matrix."""
    j = standard_j(mat.shape[0])
    return float(np.max(np.abs(mat.T @ j @ mat - j)))


def pairing_residual(multipliers: Array, tol: float = 1e-8) -> float:
    """Worst-case residual of the {lambda, 1/lambda} symplectic pairing.

    For every multiplier the closest candidate partner is sought; the
    returned value is ``max_j min_l |lambda_j lambda_l - 1|``.
    """
    lam = np.asarray(multipliers)
    worst = 0.0
    for lj in lam:
        worst = max(worst, float(np.min(np.abs(lam * lj - 1.0))))
    return worst


def random_symplectic(dim2: int, rng: np.random.Generator, scale: float = 0.3) -> Array:
    """Random symplectic matrix ``expm(J S)`` with ``S`` symmetric (test helper)."""
    from scipy.linalg import expm

    s = rng.normal(scale=scale, size=(dim2, dim2))
    s = 0.5 * (s + s.T)
    return expm(standard_j(dim2) @ s)


class TransverseFrame:
    """Symplectic basis of the transverse space at a point of an energy shell.

    The span of the flow direction ``v = J grad_h0`` and the energy gradient
    ``g = grad_h0`` is a symplectic 2-plane (``sigma(v, g) = |g|^2 > 0``).  Its
    sigma-orthogonal complement ``V`` models the Poincare section intersected
    with the energy shell; this class holds a symplectic basis
    ``[a_1..a_d, b_1..b_d]`` of ``V`` built deterministically by symplectic
    Gram-Schmidt over the projected standard basis vectors.
    """

    def __init__(self, v: Array, g: Array):
        dim2 = v.shape[0]
        self.dim2 = dim2
        self.d = dim2 // 2 - 1
        kappa = sigma(v, g)
        if abs(kappa) < 1e-14 * (np.linalg.norm(v) * np.linalg.norm(g) + 1e-300):
            raise SectionError("flow direction and energy gradient span no symplectic plane "
                               "(non-regular energy level)")
        self.v = v
        self.u = g / kappa          # sigma(v, u) = 1
        self.basis = self._build_basis()

    def _project_off_plane(self, w: Array) -> Array:
        # remove the sigma-projection onto span{v, u}
        return w - sigma(self.v, w) * self.u + sigma(self.u, w) * self.v

    def _build_basis(self) -> Array:
        d, dim2 = self.d, self.dim2
        if d == 0:
            return np.zeros((dim2, 0))
        cands = []
        for k in range(dim2):
            e = np.zeros(dim2)
            e[k] = 1.0
            w = self._project_off_plane(e)
            if np.linalg.norm(w) > 1e-10:
                cands.append(w)
        a_vecs: list[Array] = []
        b_vecs: list[Array] = []

        def cleaned(w: Array) -> Array:
            for a, b in zip(a_vecs, b_vecs):
                w = w + sigma(b, w) * a - sigma(a, w) * b
            return w

        idx = 0
        while len(a_vecs) < d:
            if idx >= len(cands):
                raise SectionError("failed to build a symplectic section basis")
            a = cleaned(cands[idx])
            idx += 1
            na = np.linalg.norm(a)
            if na < 1e-9:
                continue
            a = a / na
            # deterministic partner: remaining candidate with largest |sigma(a, .)|
            best, best_val = None, 0.0
            for c in cands[idx:] + cands[:idx]:
                c = cleaned(c)
                val = abs(sigma(a, c))
                if val > best_val:
                    best, best_val = c, val
            if best is None or best_val < 1e-9:
                raise SectionError("no symplectic partner found for section basis vector")
            b = best / sigma(a, best)
            a_vecs.append(a)
            b_vecs.append(b)
        return np.column_stack(a_vecs + b_vecs)

    def coords(self, w: Array) -> Array:
        """Coordinates of (the transverse part of) ``w`` in the section basis."""
        e = self.basis
        d = self.d
        jv = standard_j(self.dim2)
        c = e.T @ jv @ w
        j2 = standard_j(2 * d)
        return -j2 @ c

    def reduce(self, zmat: Array, end: "TransverseFrame | None" = None) -> Array:
        """Co-restriction of a (variational) matrix to the section space.

        ``end`` is the frame at the image point; defaults to ``self`` (closed
        orbit).  The sigma-coordinate extraction annihilates the flow and
        energy-gradient directions, so no explicit first-return correction is
        needed.
        """
        tgt = end if end is not None else self
        e0 = self.basis
        e1 = tgt.basis
        j2n = standard_j(self.dim2)
        j2d = standard_j(2 * self.d)
        return -j2d @ (e1.T @ j2n @ (zmat @ e0))
