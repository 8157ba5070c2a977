"""Random embeddings of l_p^n into quasi-normed l_r spaces, with empirical
certification of their restricted-isomorphism and block properties and an
l_r-minimization sparse-recovery pipeline."""

__version__ = "0.1.0"

from .errors import DomainError, OperatorFormatError, PreconditionError, SolverError
from .quasinorm import (
    BlockDecomposition,
    ExponentTriple,
    block_decompose,
    conjugate_q,
    quasi_norm,
    rearrangement_tail_bound,
    restrict,
    weak_norm,
)
from .operators import (
    EmbeddingOperator,
    apply,
    build_id_p2,
    build_S,
    build_T,
    build_W,
    load_operator,
    save_operator,
)
from .checkers import (
    check_kashin,
    check_p1,
    check_p2,
    kashin_normalize,
    measure_distortion,
)
from .recovery import (
    DecoderOptions,
    check_nullspace_1,
    check_nullspace_2,
    delta_r,
    gelfand_ratio,
    kernel_basis,
    recovery_error_bound_check,
)
