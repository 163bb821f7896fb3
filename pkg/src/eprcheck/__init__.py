"""Toolkit for building, certifying, and decomposing photon-pair source models.

A source that reproduces the full correlation table of the Bell state
under three rotated measurement bases per side is, structurally, an
orthogonal sum of EPR pairs; this package verifies those correlation
conditions (exactly or from samples), constructively extracts the block
structure, ships counterexample sources that pass weaker tests while
leaking their key, and demonstrates the consequences in a BB84 run.
"""

from .bb84 import ExactStats, ProtocolStats, TransmissionRecord, exact_stats, run_protocol
from .checker import CheckReport, check_conjugate, check_self_checking, empirical_check
from .decompose import (
    Block,
    Decomposition,
    LemmaReport,
    decompose,
    u_vectors,
    verify_block_actions,
    verify_completion,
    verify_isomorphism,
    verify_lemma_identities,
)
from .errors import (
    ConformanceError,
    MissingIndexError,
    ShapeError,
    StructuralError,
    ValidationError,
)
from .gallery import (
    GalleryEntry,
    build_classical_source,
    build_random_extended_ideal,
    complete_with_diagonal,
    gallery,
    min_diagonal_completion_deviation,
    perturb_source,
)
from .linalg import (
    BipartiteShape,
    SchmidtResult,
    gram_matrix,
    partial_trace,
    projector_onto,
    schmidt_decompose,
    tensor_op,
    tensor_vec,
)
from .sources import (
    AngleBasis,
    CorrelationTable,
    MeasurementFamily,
    Source,
    basis_at_angle,
    build_extended_ideal,
    build_ideal_source,
    correlation_table,
    correlation_table_from_density,
    emit,
    ideal_reference_table,
    purify,
    restrict_to_conjugate,
)

__version__ = "0.1.0"
