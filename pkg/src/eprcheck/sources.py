"""Photon-pair source models and their correlation statistics.

A source couples a normalized pure state on H_A (x) H_B with one family of
binary projective measurements per factor, indexed 1..3 (index 1 optional
for conjugate-coding sources).  Measurement angle assignment is fixed for
reproducibility: index 1 at 0, index 2 at -pi/8, index 3 at +pi/8, with
real rotated bases on both factors.  Outcome code 0 is the "+" outcome and
1 is the "-" outcome.

Correlation tables are indexed table[(alpha, beta, x, y)] where alpha is
the B-side (R family) index with outcome x, and beta is the A-side
(P family) index with outcome y.

All value types are immutable after construction and every function here
is pure; the only stateful object is the generator the caller passes to
``emit``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, NamedTuple, Sequence

import numpy as np

from .errors import ShapeError, ValidationError
from .linalg import (
    Array,
    BipartiteShape,
    apply_on_a,
    apply_on_b,
    as_operator,
    as_vector,
    frozen,
    is_projector,
    pure_density_on_b,
    tensor_vec,
    validate_density,
)

PLUS, MINUS = 0, 1
OUTCOMES = (PLUS, MINUS)
OUTCOME_LABELS = {PLUS: "+", MINUS: "-"}

CONJUGATE_CODING = "conjugate-coding"
SELF_CHECKING_CANDIDATE = "self-checking-candidate"

THETA = math.pi / 8
MEASUREMENT_ANGLES = {1: 0.0, 2: -THETA, 3: +THETA}

FAMILY_TOL = 1e-10
STATE_NORM_TOL = 1e-12
PAIR_SUM_TOL = 1e-9


@dataclass(frozen=True)
class AngleBasis:
    """Real orthonormal basis of C^2 rotated by ``angle``."""

    angle: float
    e0: Array
    e1: Array


def basis_at_angle(phi: float) -> AngleBasis:
    """Rotated basis e0 = (cos phi, sin phi), e1 = (-sin phi, cos phi)."""
    c, s = math.cos(phi), math.sin(phi)
    return AngleBasis(
        angle=phi,
        e0=frozen(np.array([c, s], dtype=complex)),
        e1=frozen(np.array([-s, c], dtype=complex)),
    )


def _rank1(v: Array) -> Array:
    return np.outer(v, v.conj())


@dataclass(frozen=True)
class MeasurementFamily:
    """Indexed pairs of complementary projectors acting on one local factor."""

    projectors: Mapping[int, tuple[Array, Array]]

    def __post_init__(self):
        if not self.projectors:
            raise ValidationError("measurement family must contain at least one index")
        clean: dict[int, tuple[Array, Array]] = {}
        dim = None
        for alpha, pair in sorted(self.projectors.items()):
            if alpha not in (1, 2, 3):
                raise ValidationError(f"measurement index must be 1, 2 or 3, got {alpha}")
            plus, minus = (as_operator(m) for m in pair)
            if dim is None:
                dim = plus.shape[0]
            if plus.shape[0] != dim or minus.shape[0] != dim:
                raise ShapeError("all projectors in a family must share one dimension")
            for m in (plus, minus):
                if not is_projector(m):
                    raise ValidationError(f"index {alpha}: operator is not a projector")
            if np.abs(plus @ minus).max() > FAMILY_TOL:
                raise ValidationError(f"index {alpha}: outcome projectors are not orthogonal")
            if np.abs(plus + minus - np.eye(dim)).max() > FAMILY_TOL:
                raise ValidationError(f"index {alpha}: outcome projectors do not sum to identity")
            clean[alpha] = (frozen(plus), frozen(minus))
        object.__setattr__(self, "projectors", clean)

    @property
    def indices(self) -> tuple[int, ...]:
        return tuple(sorted(self.projectors))

    @property
    def dim(self) -> int:
        first = next(iter(self.projectors.values()))
        return first[0].shape[0]

    def __contains__(self, alpha: int) -> bool:
        return alpha in self.projectors

    def proj(self, alpha: int, outcome: int) -> Array:
        if alpha not in self.projectors:
            raise ValidationError(f"measurement index {alpha} is absent from this family")
        return self.projectors[alpha][outcome]


def angle_family(dim_pad: int = 0, indices: Sequence[int] = (1, 2, 3)) -> MeasurementFamily:
    """The standard 2-dim family of rotated-basis measurements."""
    projs = {}
    for alpha in indices:
        basis = basis_at_angle(MEASUREMENT_ANGLES[alpha])
        projs[alpha] = (_rank1(basis.e0), _rank1(basis.e1))
    return MeasurementFamily(projs)


@dataclass(frozen=True)
class Source:
    """A pure bipartite state with local measurement families on each factor."""

    shape: BipartiteShape
    psi: Array
    p_family: MeasurementFamily
    r_family: MeasurementFamily
    kind: str

    def __post_init__(self):
        psi = as_vector(self.psi, self.shape.dim)
        if abs(np.vdot(psi, psi).real - 1.0) > STATE_NORM_TOL:
            raise ValidationError("source state is not normalized")
        object.__setattr__(self, "psi", frozen(psi))
        if self.p_family.dim != self.shape.dim_a:
            raise ShapeError("P family dimension does not match dim_a")
        if self.r_family.dim != self.shape.dim_b:
            raise ShapeError("R family dimension does not match dim_b")
        if self.kind == CONJUGATE_CODING:
            want = (2, 3)
        elif self.kind == SELF_CHECKING_CANDIDATE:
            want = (1, 2, 3)
        else:
            raise ValidationError(f"unknown source kind {self.kind!r}")
        for name, fam in (("P", self.p_family), ("R", self.r_family)):
            if fam.indices != want:
                raise ValidationError(
                    f"{name} family indices {fam.indices} do not match kind {self.kind!r}"
                )

    @property
    def indices(self) -> tuple[int, ...]:
        return self.p_family.indices

    def p_proj(self, alpha: int, outcome: int) -> Array:
        return self.p_family.proj(alpha, outcome)

    def r_proj(self, alpha: int, outcome: int) -> Array:
        return self.r_family.proj(alpha, outcome)

    def apply_p(self, alpha: int, outcome: int, v: Array) -> Array:
        """Apply the joint-space extension of a P projector to a joint vector."""
        return apply_on_a(self.p_proj(alpha, outcome), v, self.shape)

    def apply_r(self, alpha: int, outcome: int, v: Array) -> Array:
        """Apply the joint-space extension of an R projector to a joint vector."""
        return apply_on_b(self.r_proj(alpha, outcome), v, self.shape)


@dataclass(frozen=True)
class CorrelationTable:
    """Joint outcome probabilities for every pair of measurement indices."""

    probs: Mapping[tuple[int, int, int, int], float]
    indices: tuple[int, ...] = field(default=())

    def __post_init__(self):
        indices = tuple(sorted({k[0] for k in self.probs} | {k[1] for k in self.probs}))
        object.__setattr__(self, "indices", indices)
        clean = {}
        for key, value in self.probs.items():
            if value < -1e-12 or value > 1 + 1e-12:
                raise ValidationError(f"probability {value} at {key} outside [0, 1]")
            clean[key] = float(value)
        object.__setattr__(self, "probs", clean)
        for alpha in indices:
            for beta in indices:
                total = sum(clean[(alpha, beta, x, y)] for x in OUTCOMES for y in OUTCOMES)
                if abs(total - 1.0) > PAIR_SUM_TOL:
                    raise ValidationError(f"pair ({alpha},{beta}) probabilities sum to {total}")

    def entry(self, alpha: int, beta: int, x: int, y: int) -> float:
        return self.probs[(alpha, beta, x, y)]

    def max_abs_difference(self, other: "CorrelationTable") -> float:
        common = set(self.probs) & set(other.probs)
        return max(abs(self.probs[k] - other.probs[k]) for k in common)


def ideal_reference_table(indices: Sequence[int] = (1, 2, 3)) -> CorrelationTable:
    """Closed-form correlation table of the ideal source.

    Entries depend only on the angle difference of the two indices:
    matching outcomes see cos^2 of the difference, opposite outcomes sin^2,
    each weighted by the 1/2 branch probability.
    """
    probs = {}
    for alpha in indices:
        for beta in indices:
            delta = MEASUREMENT_ANGLES[alpha] - MEASUREMENT_ANGLES[beta]
            same = 0.5 * math.cos(delta) ** 2
            diff = 0.5 * math.sin(delta) ** 2
            for x in OUTCOMES:
                for y in OUTCOMES:
                    probs[(alpha, beta, x, y)] = same if x == y else diff
    return CorrelationTable(probs)


def build_ideal_source() -> Source:
    """The Bell state with matched rotated-basis measurements on both sides."""
    basis0 = basis_at_angle(0.0)
    psi = (tensor_vec(basis0.e0, basis0.e0) + tensor_vec(basis0.e1, basis0.e1)) / math.sqrt(2)
    family = angle_family()
    return Source(
        shape=BipartiteShape(2, 2),
        psi=psi,
        p_family=family,
        r_family=angle_family(),
        kind=SELF_CHECKING_CANDIDATE,
    )


def correlation_table(source: Source) -> CorrelationTable:
    """Exact joint outcome probabilities computed from the state."""
    probs = {}
    for beta in source.indices:
        for y in OUTCOMES:
            projected = source.apply_p(beta, y, source.psi)
            for alpha in source.indices:
                for x in OUTCOMES:
                    w = source.apply_r(alpha, x, projected)
                    probs[(alpha, beta, x, y)] = float(np.vdot(w, w).real)
    return CorrelationTable(probs)


def correlation_table_from_density(
    rho: Array, shape: BipartiteShape, p_family: MeasurementFamily, r_family: MeasurementFamily
) -> CorrelationTable:
    """Joint outcome probabilities tr((P (x) R) rho) for a mixed state."""
    mat = validate_density(rho)
    indices = tuple(sorted(set(p_family.indices) & set(r_family.indices)))
    probs = {}
    for beta in indices:
        for y in OUTCOMES:
            for alpha in indices:
                for x in OUTCOMES:
                    joint = np.kron(p_family.proj(beta, y), r_family.proj(alpha, x))
                    probs[(alpha, beta, x, y)] = float((joint @ mat).trace().real)
    return CorrelationTable(probs)


class EmitResult(NamedTuple):
    outcome: int
    density: Array
    normalized_density: Array


def emit(source: Source, button: int, rng: np.random.Generator) -> EmitResult:
    """Press one A-side button and emit the B-side state.

    The outcome is sampled from the Born probabilities of the selected
    measurement.  ``density`` carries the branch probability as its trace
    (the unnormalized convention); ``normalized_density`` is the same state
    scaled to unit trace.
    """
    if button not in source.p_family:
        raise ValidationError(f"button {button} is absent from the P family")
    plus_branch = source.apply_p(button, PLUS, source.psi)
    p_plus = float(np.vdot(plus_branch, plus_branch).real)
    outcome = PLUS if rng.random() < p_plus else MINUS
    branch = plus_branch if outcome == PLUS else source.apply_p(button, MINUS, source.psi)
    density = pure_density_on_b(branch, source.shape)
    weight = float(density.trace().real)
    return EmitResult(outcome, density, density / weight)


def purify(
    rho: Array,
    shape: BipartiteShape,
    p_family: MeasurementFamily,
    r_family: MeasurementFamily,
    rank_tol: float = 1e-12,
) -> Source:
    """Lift a mixed joint state to a pure-state source on an enlarged A factor.

    The ancilla absorbing the mixture is attached to the A side (new
    dim_a = dim_a * rank), P projectors are extended by the identity on the
    ancilla, and the resulting source reproduces the correlation table of
    the input density matrix.
    """
    mat = validate_density(as_operator(rho, shape.dim))
    evals, evecs = np.linalg.eigh(mat)
    order = np.argsort(evals)[::-1]
    evals, evecs = evals[order], evecs[:, order]
    rank = int((evals > rank_tol).sum())
    if rank == 0:
        raise ValidationError("density matrix has no positive spectrum")
    weights = np.sqrt(evals[:rank])
    # canonical eigenvector phase: largest-magnitude entry real positive
    for k in range(rank):
        pivot = evecs[np.argmax(np.abs(evecs[:, k])), k]
        if abs(pivot) > 0:
            evecs[:, k] *= pivot.conj() / abs(pivot)

    # joint index (a, b) with ancilla k -> new A index a * rank + k
    branch = (evecs[:, :rank] * weights).reshape(shape.dim_a, shape.dim_b, rank)
    psi = np.transpose(branch, (0, 2, 1)).ravel()
    psi = psi / np.linalg.norm(psi)

    extended = {
        alpha: (np.kron(pair[0], np.eye(rank)), np.kron(pair[1], np.eye(rank)))
        for alpha, pair in p_family.projectors.items()
    }
    kind = SELF_CHECKING_CANDIDATE if 1 in p_family else CONJUGATE_CODING
    return Source(
        shape=BipartiteShape(shape.dim_a * rank, shape.dim_b),
        psi=psi,
        p_family=MeasurementFamily(extended),
        r_family=r_family,
        kind=kind,
    )


def build_extended_ideal(blocks: Sequence[tuple[complex, Array, Array]]) -> Source:
    """Orthogonal sum of ideal 2-dim blocks embedded in larger factors.

    Each block is (weight, embed_a, embed_b) where the embeddings are
    isometries from C^2 into mutually orthogonal planes of the factors and
    the weights satisfy sum 2|weight|^2 = 1 so the state is normalized.
    Measurement projectors act on every block as the ideal rotated-basis
    projectors; the orthogonal complement of the block sum is assigned to
    the "-" outcome so each pair still resolves the identity.
    """
    if not blocks:
        raise ValidationError("at least one block is required")
    weights = [complex(b[0]) for b in blocks]
    embeds_a = [np.asarray(b[1], dtype=complex) for b in blocks]
    embeds_b = [np.asarray(b[2], dtype=complex) for b in blocks]
    dim_a, dim_b = embeds_a[0].shape[0], embeds_b[0].shape[0]
    for emb, dim in [(e, dim_a) for e in embeds_a] + [(e, dim_b) for e in embeds_b]:
        if emb.shape != (dim, 2):
            raise ShapeError(f"embedding must be a {dim}x2 isometry, got {emb.shape}")
        if np.abs(emb.conj().T @ emb - np.eye(2)).max() > 1e-10:
            raise ValidationError("embedding is not an isometry")
    for embeds in (embeds_a, embeds_b):
        for i in range(len(embeds)):
            for j in range(i + 1, len(embeds)):
                if np.abs(embeds[i].conj().T @ embeds[j]).max() > 1e-10:
                    raise ValidationError(f"blocks {i} and {j} are not orthogonal")
    total = sum(2 * abs(w) ** 2 for w in weights)
    if abs(total - 1.0) > 1e-9:
        raise ValidationError(f"block weights must satisfy sum 2|w|^2 = 1, got {total}")

    psi = np.zeros(dim_a * dim_b, dtype=complex)
    for w, ea, eb in zip(weights, embeds_a, embeds_b):
        psi += w * (tensor_vec(ea[:, 0], eb[:, 0]) + tensor_vec(ea[:, 1], eb[:, 1]))
    psi = psi / np.linalg.norm(psi)

    def family_for(embeds: list[Array], dim: int) -> MeasurementFamily:
        block_sum = sum(emb @ emb.conj().T for emb in embeds)
        complement = np.eye(dim) - block_sum
        projs = {}
        for alpha in (1, 2, 3):
            basis = basis_at_angle(MEASUREMENT_ANGLES[alpha])
            plus = sum(_rank1(emb @ basis.e0) for emb in embeds)
            minus = sum(_rank1(emb @ basis.e1) for emb in embeds) + complement
            projs[alpha] = (plus, minus)
        return MeasurementFamily(projs)

    return Source(
        shape=BipartiteShape(dim_a, dim_b),
        psi=psi,
        p_family=family_for(embeds_a, dim_a),
        r_family=family_for(embeds_b, dim_b),
        kind=SELF_CHECKING_CANDIDATE,
    )


def restrict_to_conjugate(source: Source) -> Source:
    """Drop measurement index 1 from both families."""
    if source.kind == CONJUGATE_CODING:
        return source
    trim = lambda fam: MeasurementFamily({a: fam.projectors[a] for a in (2, 3)})
    return Source(
        shape=source.shape,
        psi=source.psi,
        p_family=trim(source.p_family),
        r_family=trim(source.r_family),
        kind=CONJUGATE_CODING,
    )
