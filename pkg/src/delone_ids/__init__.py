"""Finite-volume density of states for pattern-equivariant operators on Delone sets."""

from .delone_core import (
    Ball,
    Box,
    DeloneError,
    DomainError,
    ParameterError,
    Pattern,
    PatternClass,
    PointSetPatch,
    WindowError,
    ball_pattern,
    boundary_points,
    canonicalize,
    occurrences,
    patch_census,
    restrict,
    verify_delone,
)
from .hulls import (
    generator_from_json,
    make_cut_project,
    make_fibonacci,
    make_periodic,
    make_perturbed,
    make_substitution,
    mean_density,
    sample_orbit,
    translate,
)
from .ids import estimate_tau, gap_report, ids_curve, omega_independence_report, shubin_report
from .kernels import (
    adjacency,
    adjoint,
    assemble,
    color_potential,
    eval_kernel,
    identity,
    kernel_from_spec,
    mul,
    radial_hopping,
    random_kernel,
)
from .quadratic import PHI, SQRT2, Quad
from .spectral import EnergyGrid, Polynomial, counting_function, inertia

__version__ = "0.1.0"
