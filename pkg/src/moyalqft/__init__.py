"""Scalar field theory with harmonic term on Moyal space for a general metric.

Submodules: ``symplectic`` (adapted structures and their canonical form),
``gaussian`` (closed-form Gaussian calculus), ``moyal`` (star products),
``action`` (classical action), ``propagator`` (Mehler kernel), ``feynman``
(regularised amplitudes) and ``cli``.
"""

from .action import FieldConfig, ModelParams, action_value, check_classical_invariance
from .errors import (
    ConstraintError,
    DimensionError,
    DivergentIntegralError,
    DomainError,
    MoyalError,
    NumericalError,
    PreconditionError,
    QuadratureError,
)
from .feynman import FeynmanGraph, amplitude, check_covariance, check_orthogonal_invariance
from .gaussian import GaussianFunction, QuadraticIntegrand, gaussian_integral
from .moyal import MoyalContext, star_gaussian, star_polynomial
from .propagator import CutoffSpec, MehlerKernel, propagator_value
from .symplectic import Metric, OrthogonalMap, SymplecticStructure, decompose_adapted, is_adapted

__version__ = "0.1.0"
