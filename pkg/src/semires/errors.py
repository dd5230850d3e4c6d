"""Exception taxonomy shared across the pipeline stages."""

from __future__ import annotations


class SemiclassicalError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(SemiclassicalError):
    """Invalid run configuration (schema violation, bad field value)."""

    def __init__(self, message: str, field_path: str | None = None):
        self.field_path = field_path
        if field_path:
            message = f"{field_path}: {message}"
        super().__init__(message)


class FlowError(SemiclassicalError):
    """Numerical integration of the flow failed.

    ``last_time`` holds the last time the integrator reached before
    giving up (step-size underflow, domain exit, ...).
    """

    def __init__(self, message: str, last_time: float | None = None):
        self.last_time = last_time
        if last_time is not None:
            message = f"{message} (last reachable time t={last_time:.6g})"
        super().__init__(message)


class DomainExitError(FlowError):
    """Trajectory left the admissible domain of the system (e.g. collision)."""


class ConvergenceError(SemiclassicalError):
    """An iterative solver (Newton shooting, root polishing) failed to converge."""

    def __init__(self, message: str, iterations: int | None = None, residual: float | None = None):
        self.iterations = iterations
        self.residual = residual
        super().__init__(message)


class SectionError(SemiclassicalError):
    """Poincare section construction or crossing detection failed (tangency)."""


class DegenerateOrbitError(SemiclassicalError):
    """A transverse Floquet multiplier is too close to 1 (non-degeneracy violated)."""


class SpectrumHypothesisError(SemiclassicalError):
    """Multiplier configuration violates a standing hypothesis.

    Raised for multipliers on the closed negative real axis or for a
    selected-exponent count that does not match the transverse dimension.
    """


class DefectiveSpectrumError(SemiclassicalError):
    """Section monodromy is not diagonalizable within tolerance."""


class QuadratureError(SemiclassicalError):
    """A path quadrature did not reach its accuracy target."""


class ContinuationError(SemiclassicalError):
    """Family continuation failed part-way; carries the partial family."""

    def __init__(self, message: str, partial_family=None, failed_energy: float | None = None):
        self.partial_family = partial_family
        self.failed_energy = failed_energy
        if failed_energy is not None:
            message = f"{message} (failed at E={failed_energy:.6g})"
        super().__init__(message)


class FitError(SemiclassicalError):
    """Family fit residual above tolerance, or non-smooth grid data."""


class FitDomainError(SemiclassicalError):
    """Evaluation of a family fit outside its validity region."""


class CausticRefinementError(SemiclassicalError):
    """Sample refinement near a caustic was exhausted; carries the bracket."""

    def __init__(self, message: str, bracket: tuple[float, float] | None = None):
        self.bracket = bracket
        if bracket is not None:
            message = f"{message} (bracketing interval [{bracket[0]:.9g}, {bracket[1]:.9g}])"
        super().__init__(message)


class AmbiguousCrossingError(SemiclassicalError):
    """A unit-circle crossing of an elliptic eigenvalue is tangential."""


class LatticeSizeError(SemiclassicalError):
    """Quantum-number lattice would exceed the configured size cap."""


class GridResolutionError(SemiclassicalError):
    """A zero-search grid cell contains more phase winding than one zero."""
