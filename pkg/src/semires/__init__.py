"""Semiclassical resonances generated by a trapping periodic orbit.

Pipeline: periodic-orbit detection and continuation, Floquet analysis of the
section monodromy, classical and subprincipal action integrals, winding
(Conley-Zehnder type) index, and complex root finding for the generalized
Bohr-Sommerfeld quantization condition, validated against the exactly
solvable model system.
"""

from .action import (ActionData, FamilyFit, Quadrature, assemble_semiclassical_action,
                     classical_action, fit_family, subprincipal_term)
from .bs import (BSConfig, Resonance, ResonanceSweep, compute_resonances,
                 enumerate_lattice, k_tuples, solve_bs)
from .czindex import IndexResult, LagrangianPath, adapted_frame, cayley, cz_index, plus_path
from .dynsys import (FlowResult, HamiltonianSystem, PhaseState, coulomb_stark_threshold,
                     fd_gradient, fd_hessian, flow, make_builtin, make_system)
from .floquet import (FloquetSpectrum, NonResonanceReport, check_nonresonance,
                      exponents_and_classes, monodromy, reduce_to_section,
                      spectrum_of_orbit)
from .model_oracle import (ModelSpec, ZetaGrid, model_exact_resonances,
                           model_monodromy_eigenvalue, zeta_zeros)
from .orbit import OrbitFamily, PeriodicOrbit, continue_family, find_periodic_orbit
from .pipeline import (FamilyAnalysis, analyze_family, build_family,
                       default_orbit_guess, resonance_pipeline)
from . import errors

__version__ = "0.1.0"
