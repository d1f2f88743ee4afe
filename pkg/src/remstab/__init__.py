"""Numerical stability tests for relative equilibria of symmetric simple
mechanical systems, including singular momentum values and non-free actions."""

from .charted_geometry import ChartedSystem, CotangentVector, TangentVector
from .lie_algebra import (
    LieAlgebraSpec,
    SubspaceBasis,
    bracket,
    coadjoint,
    invariant_inner_product_family,
    momentum_isotropy_algebra,
)
from .mechanics_core import (
    LockedInertia,
    LockedInertiaDerivative,
    augmented_potential,
    chi_one_form,
    d_locked_inertia,
    locked_inertia,
    momentum_of_generator,
    re_residual,
    refine_relative_equilibrium,
)
from .model_catalog import CATALOG, CatalogEntry, lagrange_top, spherical_pendulum, synthetic_product
from .splittings import SplittingData, build_splitting, build_wint, check_sigma_decomposition
from .stability_analysis import (
    QuadraticFormOnBasis,
    Route,
    StabilityReport,
    Verdict,
    arnold_form,
    block_corollary_test,
    block_forms,
    c_operator,
    correction_term,
    full_em_test,
    isotypic_subblocks,
    omega_crosscheck,
    regular_case_amended_check,
    rem_test,
    restricted_augmented_hessian,
)

__version__ = "0.1.0"

__all__ = [
    "CATALOG",
    "CatalogEntry",
    "ChartedSystem",
    "CotangentVector",
    "LieAlgebraSpec",
    "LockedInertia",
    "LockedInertiaDerivative",
    "QuadraticFormOnBasis",
    "Route",
    "SplittingData",
    "StabilityReport",
    "SubspaceBasis",
    "TangentVector",
    "Verdict",
    "arnold_form",
    "augmented_potential",
    "block_corollary_test",
    "block_forms",
    "bracket",
    "build_splitting",
    "build_wint",
    "c_operator",
    "chi_one_form",
    "check_sigma_decomposition",
    "coadjoint",
    "correction_term",
    "d_locked_inertia",
    "full_em_test",
    "invariant_inner_product_family",
    "isotypic_subblocks",
    "lagrange_top",
    "locked_inertia",
    "momentum_isotropy_algebra",
    "momentum_of_generator",
    "omega_crosscheck",
    "re_residual",
    "refine_relative_equilibrium",
    "regular_case_amended_check",
    "rem_test",
    "restricted_augmented_hessian",
    "spherical_pendulum",
    "synthetic_product",
]
