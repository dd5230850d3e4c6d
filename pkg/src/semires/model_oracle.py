"""Closed-form ground truth for the model system, plus a zeta-function view.

The model monodromy acts diagonally on monomials: the transverse label ``k``
picks up the factor ``prod_j exp(pi c_j (1 + 2 k_j))`` and the longitudinal
phase contributes ``exp(-2 pi i E / h)``.  Its fixed points

    E(m, k) = m h - i h sum_j c_j (k_j + 1/2)

form the exact resonance set (real shifts ``h omega_j (k_j + 1/2)`` for
elliptic coefficients ``c_j = i omega_j``, widths ``h c_j (k_j + 1/2)`` for
hyperbolic ones).  The same eigenvalues assembled into the finite product
``zeta(z) = prod_k (1 - nu_k(z))`` give an independent zero-finding route;
for non-model systems the product is built from the fitted family data and is
a consistency view of the same assembly the quantization condition uses, not
an independent oracle.

Factors are normalized by ``max(1, |nu_k|)`` when evaluated on the grid; the
normalization is positive real, so phases, windings and zeros are unchanged
while hyperbolic factors stay bounded.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .action import FamilyFit
from .bs import BSConfig, Resonance, k_tuples
from .dynsys import HamiltonianSystem
from .errors import GridResolutionError

Array = np.ndarray


@dataclass(frozen=True)
class ModelSpec:
    """Transverse block coefficients of the model system at a given h."""

    coeffs: tuple[complex, ...]
    h: float

    def __post_init__(self):
        coeffs = tuple(complex(c) for c in self.coeffs)
        object.__setattr__(self, "coeffs", coeffs)
        for c in coeffs:
            if c == 0:
                raise ValueError("model coefficients must be nonzero")
            if c.real == 0 and c.imag <= 0:
                raise ValueError(f"elliptic coefficient needs positive frequency, got {c}")
            if c.imag == 0 and c.real <= 0:
                raise ValueError(f"hyperbolic coefficient must be positive, got {c}")
            if c.real != 0 and c.imag != 0:
                raise ValueError("coefficients must be purely real or purely imaginary")
        if not (0 < self.h <= 0.5):
            raise ValueError(f"h must lie in (0, 0.5], got {self.h}")

    @property
    def d(self) -> int:
        return len(self.coeffs)

    @classmethod
    def from_system(cls, sys: HamiltonianSystem, h: float) -> "ModelSpec":
        if sys.meta.get("kind") != "model":
            raise ValueError("oracle spec requires a model system")
        return cls(tuple(sys.meta["coeffs"]), h)


def model_monodromy_eigenvalue(spec: ModelSpec, e: complex, k) -> complex:
    """Eigenvalue of the model monodromy on the monomial labelled ``k``:
    ``exp(-2 pi i E / h) * prod_j exp(pi c_j (1 + 2 k_j))``."""
    k = np.atleast_1d(np.asarray(k, dtype=int))
    if k.size != spec.d or np.any(k < 0):
        raise ValueError(f"k must be a non-negative vector of length {spec.d}")
    c = np.asarray(spec.coeffs)
    return complex(np.exp(-2j * np.pi * e / spec.h + np.pi * np.sum(c * (1 + 2 * k))))


def model_exact_resonances(spec: ModelSpec, cfg: BSConfig) -> list[Resonance]:
    """All closed-form resonances ``m h - i h sum c_j (k_j + 1/2)`` in the window."""
    h = cfg.h
    c = np.asarray(spec.coeffs)
    out: list[Resonance] = []
    for k in k_tuples(spec.d, cfg.k_cap):
        kv = np.asarray(k, dtype=float)
        shift = h * float(np.sum(c.imag * (kv + 0.5)))
        width = h * float(np.sum(c.real * (kv + 0.5)))
        m_lo = int(np.ceil((cfg.window_lo - shift) / h - 1e-9))
        m_hi = int(np.floor((cfg.window_hi - shift) / h + 1e-9))
        for m in range(m_lo, m_hi + 1):
            e = complex(m * h + shift, -width)
            if not cfg.in_window(e):
                continue
            resid = abs(model_monodromy_eigenvalue(spec, e, k) - 1.0)
            out.append(Resonance(energy=e, m=m, k=tuple(k), residual=float(resid),
                                 iters=0, in_window=True, claimed_accuracy=0.0,
                                 merged_labels=[(m, tuple(k))]))
    out.sort(key=lambda r: (r.energy.real, r.energy.imag, r.m, r.k))
    return out


# ---------------------------------------------------------------------------
# zeta function


@dataclass
class ZetaGrid:
    """Grid evaluation of the normalized zeta product and its located zeros."""

    z_nodes: Array                      # (n_re, n_im) complex
    zeta_values: Array                  # same shape, normalized product
    located_zeros: list[complex]
    residuals: list[float] = field(default_factory=list)
    unreliable: list[complex] = field(default_factory=list)
    labels: list[tuple[int, ...]] = field(default_factory=list)


class _Factors:
    """Factor family nu_k(z) with log-derivatives, exact or fitted."""

    def __init__(self, source: ModelSpec | FamilyFit, cfg: BSConfig, n_degree: int):
        self.cfg = cfg
        if isinstance(source, ModelSpec):
            d = source.d
            mus = 2 * np.pi * np.asarray(source.coeffs)

            def nu(z, kv):
                return np.exp(-2j * np.pi * z / cfg.h + np.sum(mus * (kv + 0.5)))

            def dlog(z, kv):
                return -2j * np.pi / cfg.h

            self.phase_rate = 2 * np.pi / cfg.h
        else:
            # the half-quanta sum mu_j/2 already sits inside s1, so the
            # transverse label enters with weight k alone
            d = source.n_selected
            fit = source

            def nu(z, kv):
                return np.exp(-2j * np.pi * fit.s0(z) / cfg.h + 2j * np.pi * fit.s1(z)
                              + np.tensordot(kv, fit.mu(z), axes=1))

            def dlog(z, kv):
                return (-2j * np.pi * fit.ds0(z) / cfg.h + 2j * np.pi * fit.ds1(z)
                        + np.tensordot(kv, fit.dmu(z), axes=1))

            mid = 0.5 * (source.e_min + source.e_max)
            self.phase_rate = 2 * np.pi * abs(complex(source.ds0(mid))) / cfg.h
        self.d = d
        self.nu = nu
        self.dlog = dlog
        self.k_list = [np.asarray(k, dtype=float) for k in k_tuples(d, n_degree)]
        self.k_labels = k_tuples(d, n_degree)

    def zeta(self, z):
        """Normalized product; accepts scalars or arrays."""
        val = np.ones_like(np.asarray(z, dtype=complex))
        for kv in self.k_list:
            nu = self.nu(z, kv)
            val = val * (1.0 - nu) / np.maximum(1.0, np.abs(nu))
        return val if val.ndim else complex(val)

    def polish(self, z: complex) -> tuple[complex, int]:
        """Newton on the locally smallest factor; returns (zero, factor index)."""
        for _ in range(3):
            vals = [abs(1.0 - self.nu(z, kv)) for kv in self.k_list]
            ks = int(np.argmin(vals))
            kv = self.k_list[ks]
            for _ in range(60):
                nu = self.nu(z, kv)
                f = 1.0 - nu
                df = -nu * self.dlog(z, kv)
                if abs(df) < 1e-300:
                    break
                step = f / df
                z = z - step
                if abs(f) <= 1e-13 and abs(step) <= 1e-13 * (1 + abs(z)):
                    break
            if abs(1.0 - self.nu(z, kv)) <= 1e-12:
                return z, ks
        return z, ks


def zeta_zeros(source: ModelSpec | FamilyFit, cfg: BSConfig, n_degree: int | None = None,
               n_re: int | None = None, n_im: int = 33) -> ZetaGrid:
    """Locate the zeros of the finite zeta product inside the window.

    Cells of a rectangular grid are screened by the phase winding of the
    product around their boundary (the factor normalization rescales by
    positive reals only, so windings are those of the analytic product).
    Away from its zero string every factor still rotates at the longitudinal
    rate ``2 pi S0'(E) / h``, so the horizontal grid step is sized to keep the
    worst-case phase change per cell edge below pi/2.  Winding-one cells and
    local minima of ``|zeta|`` seed a Newton polish on the locally smallest
    factor.  Real elliptic strings sit on the window's upper edge, so the
    search box extends slightly above the real axis and results are filtered
    back to the window.
    """
    if n_degree is None:
        n_degree = cfg.k_cap
    if n_degree > cfg.h ** (-cfg.delta) + 1e-9:
        raise ValueError(f"n_degree {n_degree} above the accuracy cap "
                         f"h^-delta = {cfg.h ** (-cfg.delta):.3f}")
    fac = _Factors(source, cfg, n_degree)

    h = cfg.h
    re_lo, re_hi = cfg.window_lo - h / 3, cfg.window_hi + h / 3
    im_lo, im_hi = -cfg.depth - h / 20, h / 10
    if n_re is None:
        rate = len(fac.k_list) * fac.phase_rate
        n_re = int(np.ceil((re_hi - re_lo) * rate / (0.5 * np.pi))) + 5
        n_re = min(max(n_re, 41), 20000)
    re = np.linspace(re_lo, re_hi, n_re)
    im = np.linspace(im_lo, im_hi, n_im)
    nodes = re[:, None] + 1j * im[None, :]
    vals = np.asarray(fac.zeta(nodes))
    phases = np.angle(vals)
    mags = np.abs(vals)

    def wrap(a):
        return (a + np.pi) % (2 * np.pi) - np.pi

    winding = np.round((wrap(phases[1:, :-1] - phases[:-1, :-1])
                        + wrap(phases[1:, 1:] - phases[1:, :-1])
                        + wrap(phases[:-1, 1:] - phases[1:, 1:])
                        + wrap(phases[:-1, :-1] - phases[:-1, 1:])) / (2 * np.pi)).astype(int)
    if np.any(np.abs(winding) > 1):
        i, j = np.argwhere(np.abs(winding) > 1)[0]
        raise GridResolutionError(f"winding {winding[i, j]} in one cell near "
                                  f"z = {nodes[i, j]:.6g}; grid too coarse")
    seeds: list[complex] = [complex(nodes[i:i + 2, j:j + 2].mean())
                            for i, j in np.argwhere(winding != 0)]
    # local |zeta| dips as back-up seeds (catches zeros straddling cell edges)
    from scipy.ndimage import minimum_filter

    local_min = (mags == minimum_filter(mags, size=3)) & (mags < 0.5)
    seeds.extend(complex(z) for z in nodes[local_min])

    zeros: list[complex] = []
    residuals: list[float] = []
    labels: list[tuple[int, ...]] = []
    unreliable: list[complex] = []
    cell = complex(re[1] - re[0], im[1] - im[0])
    for seed in seeds:
        try:
            z, ks = fac.polish(seed)
        except Exception:
            continue
        if abs(z.imag) <= 1e-13:
            z = complex(z.real, 0.0)
        resid = abs(fac.zeta(z))
        if resid > 1e-10:
            continue
        if any(abs(z - z0) <= 1e-10 for z0 in zeros):
            continue
        if not cfg.in_window(z):
            if (re_lo - 1e-12 <= z.real <= re_hi + 1e-12
                    and im_lo - 1e-12 <= z.imag <= im_hi + 1e-12):
                unreliable.append(z)
            continue
        if (abs(z.real - re_lo) < abs(cell.real) or abs(z.real - re_hi) < abs(cell.real)
                or abs(z.imag - im_lo) < abs(cell.imag)):
            unreliable.append(z)
        zeros.append(z)
        residuals.append(resid)
        labels.append(fac.k_labels[ks])

    order = sorted(range(len(zeros)), key=lambda i: (zeros[i].real, zeros[i].imag))
    zeros_sorted = [zeros[i] for i in order]
    return ZetaGrid(z_nodes=nodes, zeta_values=vals,
                    located_zeros=zeros_sorted,
                    residuals=[residuals[i] for i in order],
                    labels=[labels[i] for i in order],
                    unreliable=unreliable)
