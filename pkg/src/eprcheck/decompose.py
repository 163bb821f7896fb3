"""Constructive extraction of the EPR block structure of a conforming source.

A source whose correlation table matches the ideal specification is an
orthogonal sum of Bell blocks.  The extraction follows the constructive
route: Schmidt-decompose the index-1 "+" branch of the state to obtain the
block weights and the (0)-vectors, then rotate each (0)-vector into its
partner with the difference of the two tilted projectors scaled by
beta = 1/(2 sin(pi/8) cos(pi/8)) = sqrt(2).

Every identity used along the way is verified numerically and reported
per identity: the projected-state identities (L1, L3 in both sign
variants, L4, and their P<->R swapped forms), the five-vector isomorphism
onto the reference u-vectors (globally and per block), the in-block
projector actions, the completion of the "-" branch, and the pairwise
orthogonality of the recovered blocks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .checker import CheckReport, DEFAULT_EXACT_TOL, check_self_checking
from .errors import ConformanceError, StructuralError
from .linalg import Array, apply_on_a, apply_on_b, frozen, gram_matrix, schmidt_decompose
from .sources import MINUS, PLUS, THETA, Source

SIN_COS = math.sin(THETA) * math.cos(THETA)
BETA = 1.0 / (2.0 * SIN_COS)  # = sqrt(2)

LEMMA_TOL = 1e-8
INTERBLOCK_FIX_TOL = 1e-8
BLOCK_VECTOR_TOL = 1e-9
DEFAULT_SIGMA_MIN = 1e-10


def u_vectors() -> Array:
    """The five reference vectors in C^2 the projected states map onto."""
    c2 = math.cos(THETA) ** 2
    s2 = math.sin(THETA) ** 2
    sc = SIN_COS
    return np.array(
        [
            [1.0, 0.0],
            [c2, sc],
            [s2, -sc],
            [c2, -sc],
            [s2, sc],
        ],
        dtype=complex,
    )


@dataclass(frozen=True)
class Block:
    """One Bell block: weight and the two basis vectors per factor."""

    alpha: complex
    a0: Array
    a1: Array
    b0: Array
    b1: Array

    def __post_init__(self):
        for name in ("a0", "a1", "b0", "b1"):
            object.__setattr__(self, name, frozen(np.asarray(getattr(self, name), dtype=complex)))


@dataclass(frozen=True)
class LemmaReport:
    """Maximum deviation per verified identity, with pass flags at a tolerance."""

    deviations: Mapping[str, float]
    tolerance: float

    @property
    def passes(self) -> dict[str, bool]:
        return {k: v <= self.tolerance for k, v in self.deviations.items()}

    @property
    def max_dev(self) -> float:
        return max(self.deviations.values()) if self.deviations else 0.0

    @property
    def all_pass(self) -> bool:
        return self.max_dev <= self.tolerance

    def merged_with(self, other: "LemmaReport") -> "LemmaReport":
        merged = dict(self.deviations)
        merged.update(other.deviations)
        return LemmaReport(merged, max(self.tolerance, other.tolerance))


@dataclass(frozen=True)
class Decomposition:
    """Recovered Bell blocks realizing the source state as their weighted sum."""

    blocks: tuple[Block, ...]
    residual: float
    diagnostics: LemmaReport

    @property
    def weight_sum(self) -> float:
        """sum 2|alpha_i|^2, equal to 1 for a normalized state."""
        return float(sum(2 * abs(b.alpha) ** 2 for b in self.blocks))

    def reconstruct(self, shape) -> Array:
        out = np.zeros(shape.dim, dtype=complex)
        for blk in self.blocks:
            out += blk.alpha * (np.kron(blk.a0, blk.b0) + np.kron(blk.a1, blk.b1))
        return out


def _local_op(source: Source, side: str, alpha: int, outcome: int) -> Array:
    fam = source.p_family if side == "p" else source.r_family
    return fam.proj(alpha, outcome)


def _projected(source: Source, ops: Sequence[tuple[str, int, int]]) -> Array:
    """Apply a chain of local projectors (left to right) to the source state."""
    v = source.psi
    for side, alpha, outcome in reversed(ops):
        if side == "p":
            v = apply_on_a(_local_op(source, "p", alpha, outcome), v, source.shape)
        else:
            v = apply_on_b(_local_op(source, "r", alpha, outcome), v, source.shape)
    return v


def verify_lemma_identities(source: Source, tol: float = LEMMA_TOL) -> LemmaReport:
    """Verify the projected-state identities directly on the source state.

    L1: every projected branch agrees between the two sides.
    L3: the difference of the two tilted "+" (and "-") B-side projections of
        the index-1 "+" branch is fixed by the index-1 "-" projector.
    L4: rotating the tilted-projected "+" branch reproduces the "-" branch
        up to the 2 (sin t cos t)^2 factor.
    Swapped variants exchange the roles of the two sides.
    """
    s = source
    psi = s.psi
    devs: dict[str, float] = {}

    l1 = 0.0
    for alpha in (1, 2, 3):
        for x in (PLUS, MINUS):
            l1 = max(l1, float(np.linalg.norm(s.apply_p(alpha, x, psi) - s.apply_r(alpha, x, psi))))
    devs["L1"] = l1

    cos2 = math.cos(THETA) ** 2
    factor = 2.0 * SIN_COS**2

    def l3(first: str, second: str, sign: int) -> float:
        h = _projected(s, [(first, 1, PLUS), (second, 3, sign)]) - _projected(
            s, [(first, 1, PLUS), (second, 2, sign)]
        )
        fixed = (
            apply_on_b(_local_op(s, "r", 1, MINUS), h, s.shape)
            if second == "r"
            else apply_on_a(_local_op(s, "p", 1, MINUS), h, s.shape)
        )
        return float(np.linalg.norm(fixed - h))

    devs["L3"] = l3("p", "r", PLUS)
    devs["L3_minus_variant"] = l3("p", "r", MINUS)
    devs["L3_swapped"] = l3("r", "p", PLUS)
    devs["L3_minus_variant_swapped"] = l3("r", "p", MINUS)

    def l4(swap: bool) -> float:
        first, second = ("r", "p") if swap else ("p", "r")
        plus1 = _projected(s, [(first, 1, PLUS)])
        k = _projected(s, [(first, 2, PLUS), (first, 1, PLUS)]) - cos2 * plus1
        if swap:
            rotated = apply_on_a(
                _local_op(s, "p", 2, PLUS) - _local_op(s, "p", 3, PLUS), k, s.shape
            )
            minus1 = s.apply_r(1, MINUS, psi)
        else:
            rotated = apply_on_b(
                _local_op(s, "r", 2, PLUS) - _local_op(s, "r", 3, PLUS), k, s.shape
            )
            minus1 = s.apply_p(1, MINUS, psi)
        return float(np.linalg.norm(rotated - factor * minus1))

    devs["L4"] = l4(swap=False)
    devs["L4_swapped"] = l4(swap=True)
    return LemmaReport(devs, tol)


def _five_states(source: Source, swap: bool) -> list[Array]:
    first, second = ("r", "p") if swap else ("p", "r")
    ops = [
        [(first, 1, PLUS)],
        [(first, 1, PLUS), (second, 3, PLUS)],
        [(first, 1, PLUS), (second, 3, MINUS)],
        [(first, 1, PLUS), (second, 2, PLUS)],
        [(first, 1, PLUS), (second, 2, MINUS)],
    ]
    return [_projected(source, chain) for chain in ops]


def verify_isomorphism(source: Source, decomp: Decomposition, tol: float = LEMMA_TOL) -> LemmaReport:
    """Check the five projected states are an isometric image of the u-vectors.

    Isometry of tuples is tested as Gram-matrix equality.  Globally, the
    five sqrt(2)-scaled projected states must reproduce the u-vector Gram
    matrix; per block, the same must hold for each recovered (0)-vector
    under the B-side projectors, extended by the (1)-vector which must sit
    where (0, 1) sits.  Swapped variants run the mirror check with the
    A-side projectors.
    """
    u5 = u_vectors()
    u6 = np.vstack([u5, np.array([[0.0, 1.0]], dtype=complex)])
    target5 = gram_matrix(u5).real
    target6 = gram_matrix(u6)
    devs: dict[str, float] = {}

    for name, swap in (("L2", False), ("L2_swapped", True)):
        gram = 2.0 * gram_matrix(np.array(_five_states(source, swap)))
        devs[name] = float(np.abs(gram - target5).max())

    def per_block(swap: bool) -> float:
        side = "p" if swap else "r"
        worst = 0.0
        for blk in decomp.blocks:
            v0, v1 = (blk.a0, blk.a1) if swap else (blk.b0, blk.b1)
            fam = source.p_family if swap else source.r_family
            vectors = [
                v0,
                fam.proj(3, PLUS) @ v0,
                fam.proj(3, MINUS) @ v0,
                fam.proj(2, PLUS) @ v0,
                fam.proj(2, MINUS) @ v0,
                v1,
            ]
            gram = gram_matrix(np.array(vectors))
            worst = max(worst, float(np.abs(gram - target6).max()))
        return worst

    devs["L7"] = per_block(swap=False)
    devs["L7_swapped"] = per_block(swap=True)
    return LemmaReport(devs, tol)


def verify_block_actions(source: Source, decomp: Decomposition, tol: float = LEMMA_TOL) -> LemmaReport:
    """Check every projector acts on every recovered block as in the 2-dim model.

    Within a block spanned by (v0, v1): index 1 fixes v0 and v1 on its two
    outcomes; indices 3 and 2 act as the rank-1 projectors onto the basis
    rotated by +theta and -theta.  The commutator of the two "+" tilted
    projectors has magnitude 1/2 on block vectors (the two bases are pi/4
    apart); diagonal models have commutator 0 and cannot carry the blocks.
    """
    c, s = math.cos(THETA), math.sin(THETA)
    action = 0.0
    commutator = 0.0
    for blk in decomp.blocks:
        for fam, v0, v1 in (
            (source.r_family, blk.b0, blk.b1),
            (source.p_family, blk.a0, blk.a1),
        ):
            action = max(action, float(np.linalg.norm(fam.proj(1, PLUS) @ v0 - v0)))
            action = max(action, float(np.linalg.norm(fam.proj(1, MINUS) @ v1 - v1)))
            targets = {
                (3, PLUS): c * v0 + s * v1,
                (3, MINUS): -s * v0 + c * v1,
                (2, PLUS): c * v0 - s * v1,
                (2, MINUS): s * v0 + c * v1,
            }
            for (alpha, outcome), w in targets.items():
                proj = fam.proj(alpha, outcome)
                for v in (v0, v1):
                    action = max(action, float(np.linalg.norm(proj @ v - w * np.vdot(w, v))))
            comm = fam.proj(2, PLUS) @ fam.proj(3, PLUS) - fam.proj(3, PLUS) @ fam.proj(2, PLUS)
            for v in (v0, v1):
                commutator = max(
                    commutator,
                    abs(float(np.linalg.norm(comm @ v)) - 0.5 * float(np.linalg.norm(v))),
                )
    return LemmaReport({"block_actions": action, "block_commutator": commutator}, tol)


def verify_completion(source: Source, decomp: Decomposition, tol: float = LEMMA_TOL) -> LemmaReport:
    """Check the "-" branch is exactly the sum of the rotated block terms.

    Three identities: the index-1 "-" branch equals the weighted sum of the
    (1)-vector products; the same branch is reproduced by the closed-form
    operator expression 2 beta^2 (R2+ - R3+)(P2+ - cos^2 t) applied to the
    "+" branch; and all recovered blocks are pairwise orthogonal in both
    factors.
    """
    s = source
    minus_branch = s.apply_p(1, MINUS, s.psi)
    rotated_sum = np.zeros_like(s.psi)
    for blk in decomp.blocks:
        rotated_sum += blk.alpha * np.kron(blk.a1, blk.b1)
    completion = float(np.linalg.norm(minus_branch - rotated_sum))

    plus_branch = s.apply_p(1, PLUS, s.psi)
    cos2 = math.cos(THETA) ** 2
    dim_a = s.shape.dim_a
    shifted = apply_on_a(_local_op(s, "p", 2, PLUS) - cos2 * np.eye(dim_a), plus_branch, s.shape)
    operator_form = 2.0 * BETA**2 * apply_on_b(
        _local_op(s, "r", 2, PLUS) - _local_op(s, "r", 3, PLUS), shifted, s.shape
    )
    operator_dev = float(np.linalg.norm(minus_branch - operator_form))

    overlap = 0.0
    for i, bi in enumerate(decomp.blocks):
        for bj in decomp.blocks[i + 1 :]:
            for u in (bi.a0, bi.a1):
                for v in (bj.a0, bj.a1):
                    overlap = max(overlap, abs(np.vdot(u, v)))
            for u in (bi.b0, bi.b1):
                for v in (bj.b0, bj.b1):
                    overlap = max(overlap, abs(np.vdot(u, v)))
    return LemmaReport(
        {
            "completion": completion,
            "completion_operator": operator_dev,
            "orthogonality": float(overlap),
        },
        tol,
    )


def _orthonormalize_across_blocks(vectors: list[Array]) -> list[Array]:
    # modified Gram-Schmidt; inputs are already orthonormal to ~1e-8, so
    # each vector moves by at most that much
    out: list[Array] = []
    for v in vectors:
        w = v.astype(complex).copy()
        for q in out:
            w -= q * np.vdot(q, w)
        out.append(w / np.linalg.norm(w))
    return out


def _build_blocks(source: Source, sigma_min: float) -> tuple[list[Block], float]:
    """Schmidt step plus the beta-rotation, with inter-block cleanup."""
    plus_branch = source.apply_p(1, PLUS, source.psi)
    schmidt = schmidt_decompose(plus_branch, source.shape, sigma_min=sigma_min)

    p_rot = source.p_family.proj(3, PLUS) - source.p_family.proj(2, PLUS)
    r_rot = source.r_family.proj(3, PLUS) - source.r_family.proj(2, PLUS)

    blocks = []
    for weight, a0, b0 in zip(schmidt.coefficients, schmidt.left_vectors, schmidt.right_vectors):
        a1 = BETA * (p_rot @ a0)
        b1 = BETA * (r_rot @ b0)
        blocks.append(Block(alpha=complex(weight), a0=a0, a1=a1, b0=b0, b1=b1))

    for blk in blocks:
        for name, v in (("a0", blk.a0), ("a1", blk.a1), ("b0", blk.b0), ("b1", blk.b1)):
            if abs(np.linalg.norm(v) - 1.0) > BLOCK_VECTOR_TOL:
                raise StructuralError(
                    f"block vector {name} has norm {np.linalg.norm(v):.6f}",
                    diagnostics={"vector": name, "norm": float(np.linalg.norm(v))},
                )
        for name, pair in (("a", (blk.a0, blk.a1)), ("b", (blk.b0, blk.b1))):
            ip = abs(np.vdot(pair[0], pair[1]))
            if ip > BLOCK_VECTOR_TOL:
                raise StructuralError(
                    f"in-block {name}-vectors are not orthogonal (|<0,1>| = {ip:.3e})",
                    diagnostics={"pair": name, "overlap": float(ip)},
                )

    raw_overlap = 0.0
    for i, bi in enumerate(blocks):
        for bj in blocks[i + 1 :]:
            for u, v in [(bi.a0, bj.a0), (bi.a0, bj.a1), (bi.a1, bj.a0), (bi.a1, bj.a1)]:
                raw_overlap = max(raw_overlap, abs(np.vdot(u, v)))
            for u, v in [(bi.b0, bj.b0), (bi.b0, bj.b1), (bi.b1, bj.b0), (bi.b1, bj.b1)]:
                raw_overlap = max(raw_overlap, abs(np.vdot(u, v)))
    if raw_overlap > INTERBLOCK_FIX_TOL:
        raise StructuralError(
            f"inter-block overlap {raw_overlap:.3e} exceeds {INTERBLOCK_FIX_TOL}",
            diagnostics={"overlap": float(raw_overlap)},
        )
    if raw_overlap > 0.0 and len(blocks) > 1:
        a_fixed = _orthonormalize_across_blocks([v for b in blocks for v in (b.a0, b.a1)])
        b_fixed = _orthonormalize_across_blocks([v for b in blocks for v in (b.b0, b.b1)])
        blocks = [
            Block(
                alpha=blk.alpha,
                a0=a_fixed[2 * i],
                a1=a_fixed[2 * i + 1],
                b0=b_fixed[2 * i],
                b1=b_fixed[2 * i + 1],
            )
            for i, blk in enumerate(blocks)
        ]
    return blocks, float(raw_overlap)


def decompose(
    source: Source,
    tol: float = DEFAULT_EXACT_TOL,
    lemma_tol: float = LEMMA_TOL,
    sigma_min: float = DEFAULT_SIGMA_MIN,
    diagnostic: bool = False,
) -> Decomposition:
    """Extract the Bell-block decomposition of a conforming source.

    The source must pass ``check_self_checking`` at ``tol``; otherwise a
    ConformanceError carrying the failing report is raised (with the lemma
    report attached when ``diagnostic`` is set, to localize which identity
    breaks).  On success the returned decomposition carries the
    reconstruction residual and a merged report of all identity checks.
    """
    report: CheckReport = check_self_checking(source, tol)
    if not report.passed:
        lemmas = verify_lemma_identities(source, lemma_tol) if diagnostic else None
        raise ConformanceError(
            f"source fails the self-checking conditions (max deviation {report.max_abs_dev:.3e})",
            report=report,
            lemmas=lemmas,
        )

    blocks, raw_overlap = _build_blocks(source, sigma_min)
    decomp = Decomposition(blocks=tuple(blocks), residual=0.0, diagnostics=LemmaReport({}, lemma_tol))
    residual = float(np.linalg.norm(source.psi - decomp.reconstruct(source.shape)))
    bound = 10.0 * tol * math.sqrt(source.shape.dim)
    if residual > max(bound, 1e-12):
        raise StructuralError(
            f"reconstruction residual {residual:.3e} exceeds {bound:.3e}",
            diagnostics={"residual": residual},
        )

    decomp = Decomposition(blocks=tuple(blocks), residual=residual, diagnostics=LemmaReport({}, lemma_tol))
    diagnostics = (
        verify_lemma_identities(source, lemma_tol)
        .merged_with(verify_isomorphism(source, decomp, lemma_tol))
        .merged_with(verify_block_actions(source, decomp, lemma_tol))
        .merged_with(verify_completion(source, decomp, lemma_tol))
    )
    diagnostics = LemmaReport(
        {**diagnostics.deviations, "interblock_overlap_pre_fix": raw_overlap}, lemma_tol
    )
    return Decomposition(blocks=tuple(blocks), residual=residual, diagnostics=diagnostics)
