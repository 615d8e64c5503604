"""tsdae: projector-chain analysis and decoupling of linear time-varying
dynamic-algebraic equations on discrete time scales.

The pipeline: build a TimeScaleGrid, wrap the coefficients (A, B, C, f)
as MatrixFunctions into a DAESystem, run build_chain to get projector
stages and the tractability index, assemble + solve_forward to decouple
and step, and cross_validate against the direct one-step oracle.
"""

from .chain import (
    ChainOptions,
    ChainResult,
    ChainStage,
    build_chain,
    canonical_update,
    tractability_index,
)
from .decouple import (
    DecoupledSolution,
    Decoupling,
    assemble,
    component_last,
    components_backward,
    hidden_constraint_defect,
    project_initial,
    reassemble,
    residual,
    solve_forward,
    step_inherent,
)
from .errors import (
    ExpressionError,
    GridIndexError,
    InconsistentStateError,
    IrregularSystemError,
    NonRegressiveStepError,
    NotADirectSumError,
    ProjectorError,
    ShapeError,
    SubspaceIntersectionError,
    SystemFileError,
    TransversalityError,
    TsdaeError,
)
from .expressions import parse_expression, render
from .grid import TimeScaleGrid, grid_from_descriptor
from .matfunc import DAESystem, MatrixFunction, check_product_rule
from .oracle import cross_validate, direct_step, oracle_trajectory
from .subspaces import (
    ProperFactorization,
    SubspaceBasis,
    check_transversality,
    direct_sum_rank,
    kernel_basis,
    projector_onto_along,
    projector_onto_avoiding,
    reflexive_inverse,
)

__version__ = "0.1.0"
