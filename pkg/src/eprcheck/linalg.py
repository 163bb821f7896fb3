"""Dense complex linear algebra over small bipartite Hilbert spaces.

State vectors are 1-D complex ndarrays, operators are square complex
ndarrays.  Joint indices follow the A-major convention throughout:
``joint = i_a * dim_b + i_b``, which is exactly what a C-ordered
``reshape(dim_a, dim_b)`` gives.  All functions are pure; returned arrays
are freshly allocated and safe to share between threads.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ShapeError, ValidationError

Array = np.ndarray

HERMITIAN_TOL = 1e-12
IDEMPOTENT_TOL = 1e-10
ORTHONORMAL_TOL = 1e-10
DEFAULT_SIGMA_MIN = 1e-10


@dataclass(frozen=True)
class BipartiteShape:
    """Factor dimensions of a bipartite space H_A (x) H_B."""

    dim_a: int
    dim_b: int

    def __post_init__(self):
        if self.dim_a < 1 or self.dim_b < 1:
            raise ValidationError(f"factor dimensions must be positive, got {self}")

    @property
    def dim(self) -> int:
        return self.dim_a * self.dim_b


def as_vector(v, dim: int | None = None) -> Array:
    """Coerce to a 1-D complex array, optionally checking its length."""
    arr = np.asarray(v, dtype=complex)
    if arr.ndim != 1:
        raise ShapeError(f"expected a 1-D vector, got shape {arr.shape}")
    if dim is not None and arr.shape[0] != dim:
        raise ShapeError(f"expected a vector of length {dim}, got {arr.shape[0]}")
    return arr


def as_operator(m, dim: int | None = None) -> Array:
    """Coerce to a square complex matrix, optionally checking its size."""
    arr = np.asarray(m, dtype=complex)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise ShapeError(f"expected a square matrix, got shape {arr.shape}")
    if dim is not None and arr.shape[0] != dim:
        raise ShapeError(f"expected a {dim}x{dim} matrix, got {arr.shape[0]}x{arr.shape[1]}")
    return arr


def frozen(arr: Array) -> Array:
    """Return a read-only copy; value types store only frozen arrays."""
    out = np.array(arr)
    out.setflags(write=False)
    return out


def tensor_vec(v, w) -> Array:
    """Tensor product of two vectors under the A-major convention."""
    return np.kron(as_vector(v), as_vector(w))


def tensor_op(a, b) -> Array:
    """Kronecker product of two square operators (A-major convention)."""
    return np.kron(as_operator(a), as_operator(b))


def apply_on_a(op: Array, v: Array, shape: BipartiteShape) -> Array:
    """Apply (op (x) I) to a joint vector without forming the joint operator."""
    mat = as_vector(v, shape.dim).reshape(shape.dim_a, shape.dim_b)
    return (as_operator(op, shape.dim_a) @ mat).ravel()


def apply_on_b(op: Array, v: Array, shape: BipartiteShape) -> Array:
    """Apply (I (x) op) to a joint vector without forming the joint operator."""
    mat = as_vector(v, shape.dim).reshape(shape.dim_a, shape.dim_b)
    return (mat @ as_operator(op, shape.dim_b).T).ravel()


def partial_trace(rho, shape: BipartiteShape, over: str = "a") -> Array:
    """Trace a joint density operator over one factor.

    ``over`` selects the factor to trace out ("a" or "b"); the result acts
    on the remaining factor.  Trace is preserved and Hermiticity of the
    input carries over.
    """
    mat = as_operator(rho, shape.dim)
    four = mat.reshape(shape.dim_a, shape.dim_b, shape.dim_a, shape.dim_b)
    if over == "a":
        return np.einsum("abac->bc", four)
    if over == "b":
        return np.einsum("abcb->ac", four)
    raise ValueError(f"over must be 'a' or 'b', got {over!r}")


def pure_density_on_b(v: Array, shape: BipartiteShape) -> Array:
    """tr_A(|v><v|) computed directly from the vector."""
    mat = as_vector(v, shape.dim).reshape(shape.dim_a, shape.dim_b)
    return np.einsum("ab,ac->bc", mat, mat.conj())


def gram_matrix(vectors) -> Array:
    """Matrix of pairwise inner products G[i, j] = <v_i, v_j>."""
    stacked = np.atleast_2d(np.asarray(vectors, dtype=complex))
    return stacked.conj() @ stacked.T


def projector_onto(vectors) -> Array:
    """Orthogonal projector onto the span of an orthonormal set of vectors.

    Raises ValidationError when the input is not orthonormal within
    ORTHONORMAL_TOL; the caller is expected to orthonormalize first.
    """
    stacked = np.atleast_2d(np.asarray(vectors, dtype=complex))
    if stacked.shape[0] == 0:
        raise ValidationError("projector_onto needs at least one vector")
    gram = gram_matrix(stacked)
    dev = np.abs(gram - np.eye(stacked.shape[0])).max()
    if dev > ORTHONORMAL_TOL:
        raise ValidationError(f"input vectors are not orthonormal (max deviation {dev:.3e})")
    return stacked.T @ stacked.conj()


def is_projector(m, hermitian_tol: float = HERMITIAN_TOL, idempotent_tol: float = IDEMPOTENT_TOL) -> bool:
    """Check Hermiticity and idempotence of a candidate projector."""
    mat = as_operator(m)
    if np.abs(mat - mat.conj().T).max() > hermitian_tol:
        return False
    return np.abs(mat @ mat - mat).max() <= idempotent_tol


def validate_density(rho, weight: float = 1.0, eig_tol: float = -1e-10, trace_tol: float = 1e-12) -> Array:
    """Validate a density matrix: Hermitian, PSD, trace equal to ``weight``."""
    mat = as_operator(rho)
    if np.abs(mat - mat.conj().T).max() > HERMITIAN_TOL:
        raise ValidationError("density matrix is not Hermitian")
    eigs = np.linalg.eigvalsh(mat)
    if eigs.min() < eig_tol:
        raise ValidationError(f"density matrix has negative eigenvalue {eigs.min():.3e}")
    tr = mat.trace().real
    if abs(tr - weight) > trace_tol:
        raise ValidationError(f"density matrix trace {tr} differs from declared weight {weight}")
    return mat


@dataclass(frozen=True)
class SchmidtResult:
    """Schmidt data of a bipartite vector.

    ``coefficients`` are nonnegative and sorted descending; ``left_vectors``
    and ``right_vectors`` hold one orthonormal vector per row, so that the
    input is ``sum_i c_i * left_i (x) right_i`` up to ``residual``.
    """

    coefficients: Array
    left_vectors: Array
    right_vectors: Array
    residual: float

    @property
    def rank(self) -> int:
        return int(self.coefficients.shape[0])

    def reconstruct(self) -> Array:
        if self.rank == 0:
            da = self.left_vectors.shape[1]
            db = self.right_vectors.shape[1]
            return np.zeros(da * db, dtype=complex)
        return np.einsum("i,ia,ib->ab", self.coefficients, self.left_vectors, self.right_vectors).ravel()


def _phase_fixed_qr(columns: Array) -> Array:
    # QR re-orthonormalization keeping each column close to its input:
    # the diagonal of R is rotated onto the positive real axis.
    q, r = np.linalg.qr(columns)
    diag = r.diagonal().copy()
    diag[np.abs(diag) == 0] = 1.0
    return q * (diag / np.abs(diag))


GRAM_NOISE_SAFETY = 10.0


def _coefficient_cut(sigmas: Array, sigma_min: float, nv: float, gram_dim: int) -> Array:
    # the Gram-matrix route squares the dynamic range: eigenvalue noise of
    # order dim*eps*lambda_max surfaces as spurious coefficients of order
    # sqrt(dim*eps)*sigma_max, so anything below that floor is not a
    # resolvable coefficient regardless of sigma_min
    floor = 0.0
    if sigmas.size:
        floor = GRAM_NOISE_SAFETY * math.sqrt(gram_dim * np.finfo(float).eps) * sigmas.max()
    return sigmas > max(sigma_min * nv, floor)


def schmidt_decompose(v, shape: BipartiteShape, sigma_min: float = DEFAULT_SIGMA_MIN) -> SchmidtResult:
    """Schmidt decomposition of a bipartite vector.

    The coefficient matrix M with v = sum_ab M[a, b] e_a (x) e_b is
    factored through the eigendecomposition of its smaller Gram matrix
    (M M^dag or M^dag M); the factor derived by applying M is explicitly
    re-orthonormalized, so both returned families are orthonormal even in
    the presence of repeated coefficients.  Coefficients at or below
    ``sigma_min * ||v||`` (a relative cutoff) are dropped, as are
    coefficients below the numerical resolution of the Gram route
    (about sqrt(dim * eps) relative to the largest one); the discarded
    mass shows up in ``residual``.

    A zero input yields an empty decomposition with residual 0.
    """
    vec = as_vector(v, shape.dim)
    nv = float(np.linalg.norm(vec))
    mat = vec.reshape(shape.dim_a, shape.dim_b)
    if nv == 0.0:
        return SchmidtResult(
            coefficients=frozen(np.zeros(0)),
            left_vectors=frozen(np.zeros((0, shape.dim_a), dtype=complex)),
            right_vectors=frozen(np.zeros((0, shape.dim_b), dtype=complex)),
            residual=0.0,
        )

    gram_dim = min(shape.dim_a, shape.dim_b)
    if shape.dim_a <= shape.dim_b:
        evals, evecs = np.linalg.eigh(mat @ mat.conj().T)
        order = np.argsort(evals)[::-1]
        sigmas = np.sqrt(np.clip(evals[order], 0.0, None))
        keep = _coefficient_cut(sigmas, sigma_min, nv, gram_dim)
        sigmas = sigmas[keep]
        left_cols = evecs[:, order[keep]]
        if sigmas.size:
            right_rows = (left_cols.conj().T @ mat) / sigmas[:, None]
            right_rows = _phase_fixed_qr(right_rows.T).T
        else:
            right_rows = np.zeros((0, shape.dim_b), dtype=complex)
        left_rows = left_cols.T
    else:
        evals, evecs = np.linalg.eigh(mat.conj().T @ mat)
        order = np.argsort(evals)[::-1]
        sigmas = np.sqrt(np.clip(evals[order], 0.0, None))
        keep = _coefficient_cut(sigmas, sigma_min, nv, gram_dim)
        sigmas = sigmas[keep]
        w_cols = evecs[:, order[keep]]
        # with l_i = M w_i / sigma_i the paired right vector is conj(w_i)
        right_rows = w_cols.conj().T
        if sigmas.size:
            left_cols = (mat @ w_cols) / sigmas[None, :]
            left_cols = _phase_fixed_qr(left_cols)
        else:
            left_cols = np.zeros((shape.dim_a, 0), dtype=complex)
        left_rows = left_cols.T

    result = SchmidtResult(
        coefficients=frozen(sigmas.astype(float)),
        left_vectors=frozen(left_rows),
        right_vectors=frozen(right_rows),
        residual=0.0,
    )
    residual = float(np.linalg.norm(vec - result.reconstruct()))
    return SchmidtResult(result.coefficients, result.left_vectors, result.right_vectors, residual)
