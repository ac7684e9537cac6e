"""Lattice-point transference between a matrix and its transpose, checked by enumeration."""

from .box_calculus import (
    BoxSpec,
    DimensionError,
    DomainError,
    HatResult,
    ParamPoint,
    PreconditionError,
    clipped_geo_mean,
    dual_weights,
    family_membership,
    geo_mean,
    hat_normalize,
    param_map,
    pseudocompound,
    sup_norm,
)
from .exponents import ApproxRecord, ExponentEstimate, estimate_exponent, multiplicative_minimum, ordinary_minimum
from .lattice_engine import (
    CapExceeded,
    LatticeBasis,
    LatticePoint,
    TargetMatrix,
    dual_basis,
    find_dual_point,
    find_primal_point,
    primal_basis,
    truncate,
    verify_projection,
    verify_sublattice_embedding,
)
from .transference import (
    TransferenceConstants,
    VerificationReport,
    check_exponent_transfer,
    check_mahler,
    check_mult_transference,
    check_proof_chain,
    dyson_rhs,
)

__version__ = "0.1.0"
