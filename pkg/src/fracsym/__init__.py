"""Discretized fractional-Laplacian-type operators, semilinear solvers and
symmetry diagnostics on uniform grids."""
from .geometry import (
    Ball, Box, Custom, DomainError, DomainMask, GridAlignmentError, GridFunction, UniformGrid,
    ZeroExterior, ConstantExterior, RadialTableExterior, ball_mask, box_mask, custom_mask,
    full_mask, reflect_function, reflect_point, region_measure, sigma_lambda, stadium_mask,
)
from .kernels import (
    GeneralDecreasingKernel, PiecewiseMuKernel, RieszKernel, ThetaTable, eval_kernel,
    tail_mass, validate_condition_C,
)
from .operator import DiscreteNonlocalOperator, apply, assemble, convergence_probe, gaussian_profile
from .solver import (
    NoPositiveBranch, NonConvergence, Nonlinearity, ProblemSpec, SolveOptions, SourceTerm,
    SystemSpec, solve_scalar, solve_system, solve_whole_space,
)

__version__ = "0.1.0"
