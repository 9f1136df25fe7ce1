"""Weakly coupled Hamilton-Jacobi systems via iterated twisted Lax-Oleinik steps.

The package computes viscosity solutions of evolutionary weakly coupled
systems by composing small semi-Lagrangian operator steps, checks the sign,
monotonicity and splitting inequalities those operators satisfy, and
cross-validates against a monotone Lax-Friedrichs reference solver and
closed-form benchmarks.
"""

from .coupling import (
    CouplingField,
    CouplingMatrix,
    ExpKernel,
    constant_field,
    exp_neg,
    exp_neg_apply,
    make_coupling_field,
    sin_offdiag_field,
    validate_coupling,
)
from .grids import (
    BoundedGrid,
    GridField,
    TorusGrid,
    field_from_function,
    interpolate,
    lipschitz_estimate,
    read_csv,
    sup_diff,
    sup_norm,
    write_csv,
)
from .lagrangians import (
    LagrangianSpec,
    SystemSpec,
    catalog_entry,
    catalog_names,
    eval_H_vec,
    eval_L_vec,
    hypothesis_check,
    legendre_check,
)
from .operators import (
    SchemeConfig,
    StepResult,
    alt_exp_step,
    alt_lin_step,
    brute_force_step,
    consistency_probe,
    dyadic_times,
    iterate_dyadic,
    iterate_partition,
    one_step,
    twisted_step,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
