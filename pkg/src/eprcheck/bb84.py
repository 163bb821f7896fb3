"""Desk-scale BB84 transmission and sifting on top of any source model.

Alice presses one of the two key buttons per round; the emitted state
(already traced down to the transmitted factor) travels to Bob, optionally
through an eavesdropper, and Bob measures it in a uniformly random key
basis.  Rounds are independent and identically distributed, so the run is
sampled stage by stage from exactly enumerated conditional probability
tables; ``exact_stats`` enumerates the same tables without sampling and
serves as the analytic reference for sampled runs.

Eavesdropper strategies: "none"; "intercept-resend" (measure in a random
key basis, pass on the post-measurement state); "classical-clone" (read
the diagonal hidden label without disturbance, only valid for sources
whose emitted states are all diagonal, such as the classical gallery
source).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import ValidationError
from .linalg import pure_density_on_b
from .sources import OUTCOMES, PLUS, Source

STRATEGIES = ("none", "intercept-resend", "classical-clone")
KEY_BUTTONS = (2, 3)


class TransmissionRecord(NamedTuple):
    index: int
    alice_button: int
    alice_bit: int
    bob_basis: int
    bob_bit: int
    eve_log: tuple[int, int] | None


@dataclass(frozen=True)
class ProtocolStats:
    n: int
    sifted_count: int
    sift_fraction: float
    qber: float
    eve_information_fraction: float


@dataclass(frozen=True)
class ExactStats:
    sift_fraction: float
    qber: float
    eve_information_fraction: float


@dataclass(frozen=True)
class _Tables:
    """Stage-wise branch distributions shared by sampling and enumeration."""

    p_bit: np.ndarray          # (2, 2): button -> alice bit
    densities: np.ndarray      # (2, 2, db, db): normalized emitted state
    bob_given_state: callable  # density -> (2, 2) bob basis/bit probabilities
    strategy: str
    eve_probs: np.ndarray | None = None   # IR: (2,2,2,2) btn,x,eve basis -> outcome
    eve_post: np.ndarray | None = None    # IR: post-measurement states
    clone_probs: np.ndarray | None = None  # clone: (2,2,db) label distribution
    clone_guess: np.ndarray | None = None  # clone: (db, 2) label -> guess per basis


def _bob_probs(source: Source, rho: np.ndarray) -> np.ndarray:
    out = np.empty((2, 2))
    for bi, basis in enumerate(KEY_BUTTONS):
        for y in OUTCOMES:
            out[bi, y] = float((source.r_proj(basis, y) @ rho).trace().real)
    return np.clip(out, 0.0, 1.0)


def _build_tables(source: Source, strategy: str) -> _Tables:
    if strategy not in STRATEGIES:
        raise ValidationError(f"unknown eavesdropper strategy {strategy!r}")
    for button in KEY_BUTTONS:
        if button not in source.p_family or button not in source.r_family:
            raise ValidationError(f"BB84 needs measurement index {button} on both sides")

    db = source.shape.dim_b
    p_bit = np.empty((2, 2))
    densities = np.zeros((2, 2, db, db), dtype=complex)
    for bi, button in enumerate(KEY_BUTTONS):
        for x in OUTCOMES:
            branch = source.apply_p(button, x, source.psi)
            weight = float(np.vdot(branch, branch).real)
            p_bit[bi, x] = weight
            if weight > 0:
                densities[bi, x] = pure_density_on_b(branch, source.shape) / weight

    tables = dict(p_bit=np.clip(p_bit, 0.0, 1.0), densities=densities, strategy=strategy,
                  bob_given_state=lambda rho: _bob_probs(source, rho))

    if strategy == "intercept-resend":
        eve_probs = np.zeros((2, 2, 2, 2))
        eve_post = np.zeros((2, 2, 2, 2, db, db), dtype=complex)
        for bi in range(2):
            for x in OUTCOMES:
                rho = densities[bi, x]
                for ei, ebasis in enumerate(KEY_BUTTONS):
                    for e in OUTCOMES:
                        proj = source.r_proj(ebasis, e)
                        post = proj @ rho @ proj
                        w = float(post.trace().real)
                        eve_probs[bi, x, ei, e] = max(w, 0.0)
                        if w > 1e-300:
                            eve_post[bi, x, ei, e] = post / w
        tables["eve_probs"] = eve_probs
        tables["eve_post"] = eve_post
    elif strategy == "classical-clone":
        offdiag = max(
            float(np.abs(densities[bi, x] - np.diag(densities[bi, x].diagonal())).max())
            for bi in range(2)
            for x in OUTCOMES
        )
        if offdiag > 1e-12:
            raise ValidationError(
                "classical-clone requires a hidden-label source: emitted states must be "
                f"diagonal, found off-diagonal weight {offdiag:.3e}"
            )
        clone_probs = np.stack(
            [[np.clip(densities[bi, x].diagonal().real, 0.0, 1.0) for x in OUTCOMES] for bi in range(2)]
        )
        clone_guess = np.empty((db, 2), dtype=int)
        for k in range(db):
            for bi, basis in enumerate(KEY_BUTTONS):
                diag = [source.r_proj(basis, y)[k, k].real for y in OUTCOMES]
                clone_guess[k, bi] = int(np.argmax(diag))
        tables["clone_probs"] = clone_probs
        tables["clone_guess"] = clone_guess
    return _Tables(**tables)


def run_protocol(
    source: Source,
    n: int,
    eve: str = "none",
    rng: np.random.Generator | int = 0,
) -> tuple[list[TransmissionRecord], ProtocolStats]:
    """Simulate ``n`` rounds and sift on matching bases.

    Returns the per-round records and the run statistics.  Identical
    (source, n, eve, seed) inputs give identical records.  ``n = 0``
    produces empty records and undefined (NaN) fractions.
    """
    if isinstance(rng, (int, np.integer)):
        rng = np.random.default_rng(rng)
    tables = _build_tables(source, eve)
    if n == 0:
        eve_frac = 0.0 if eve == "none" else math.nan
        return [], ProtocolStats(0, 0, math.nan, math.nan, eve_frac)

    btn = rng.integers(0, 2, size=n)
    x = np.where(rng.random(n) < tables.p_bit[btn, 0], 0, 1)

    eve_logs: list[tuple[int, int] | None]
    if eve == "none":
        bob_probs_key = np.stack(
            [[tables.bob_given_state(tables.densities[bi, xx]) for xx in OUTCOMES] for bi in range(2)]
        )  # (2, 2, 2, 2): btn, x, bob basis, bit
        bob = rng.integers(0, 2, size=n)
        y = np.where(rng.random(n) < bob_probs_key[btn, x, bob, 0], 0, 1)
        eve_logs = [None] * n
        eve_guess = None
    elif eve == "intercept-resend":
        ev = rng.integers(0, 2, size=n)
        e = np.where(rng.random(n) < tables.eve_probs[btn, x, ev, 0], 0, 1)
        bob_probs_ir = np.stack(
            [
                [
                    [
                        [tables.bob_given_state(tables.eve_post[bi, xx, ei, ee]) for ee in OUTCOMES]
                        for ei in range(2)
                    ]
                    for xx in OUTCOMES
                ]
                for bi in range(2)
            ]
        )  # (2, 2, 2, 2, 2, 2)
        bob = rng.integers(0, 2, size=n)
        y = np.where(rng.random(n) < bob_probs_ir[btn, x, ev, e, bob, 0], 0, 1)
        eve_logs = [(KEY_BUTTONS[b], int(bit)) for b, bit in zip(ev, e)]
        eve_guess = e
    else:  # classical-clone
        db = source.shape.dim_b
        cumulative = np.cumsum(tables.clone_probs, axis=2)
        k = (rng.random(n)[:, None] > cumulative[btn, x]).sum(axis=1).clip(0, db - 1)
        bob_probs_cl = np.array(
            [tables.bob_given_state(np.diag(np.eye(db)[kk]).astype(complex)) for kk in range(db)]
        )  # (db, 2, 2)
        bob = rng.integers(0, 2, size=n)
        y = np.where(rng.random(n) < bob_probs_cl[k, bob, 0], 0, 1)
        eve_guess = tables.clone_guess[k, btn]
        eve_logs = [
            (KEY_BUTTONS[b], int(g)) for b, g in zip(btn, eve_guess)
        ]

    records = [
        TransmissionRecord(
            index=i,
            alice_button=KEY_BUTTONS[btn[i]],
            alice_bit=int(x[i]),
            bob_basis=KEY_BUTTONS[bob[i]],
            bob_bit=int(y[i]),
            eve_log=eve_logs[i],
        )
        for i in range(n)
    ]

    sifted = btn == bob
    sifted_count = int(sifted.sum())
    if sifted_count:
        qber = float((x[sifted] != y[sifted]).mean())
    else:
        qber = math.nan
    if eve == "none":
        eve_frac = 0.0
    elif sifted_count:
        eve_frac = float((eve_guess[sifted] == x[sifted]).mean())
    else:
        eve_frac = math.nan
    return records, ProtocolStats(
        n=n,
        sifted_count=sifted_count,
        sift_fraction=sifted_count / n,
        qber=qber,
        eve_information_fraction=eve_frac,
    )


def exact_stats(source: Source, eve: str = "none") -> ExactStats:
    """Expected sift fraction, error rate, and eavesdropper knowledge.

    Computed by exhaustive enumeration over every (button, bit,
    eavesdropper branch, basis, outcome) combination weighted by its exact
    probability; no sampling is involved.
    """
    tables = _build_tables(source, eve)
    p_sift = p_err = p_eve = 0.0
    for bi in range(2):
        for x in OUTCOMES:
            # 1/2 button choice * bit prob * 1/2 for Bob landing on the same basis
            p_branch = 0.25 * tables.p_bit[bi, x]
            if p_branch == 0.0:
                continue
            if eve == "none":
                stages = [(1.0, tables.densities[bi, x], None)]
            elif eve == "intercept-resend":
                stages = [
                    (0.5 * tables.eve_probs[bi, x, ei, e], tables.eve_post[bi, x, ei, e], e)
                    for ei in range(2)
                    for e in OUTCOMES
                ]
            else:
                db = source.shape.dim_b
                stages = [
                    (tables.clone_probs[bi, x, k], np.diag(np.eye(db)[k]).astype(complex),
                     int(tables.clone_guess[k, bi]))
                    for k in range(db)
                ]
            for w, rho, guess in stages:
                if w == 0.0:
                    continue
                bob_probs = tables.bob_given_state(rho)
                # sifting keeps bob basis == alice button only
                for y in OUTCOMES:
                    p = p_branch * w * bob_probs[bi, y]
                    p_sift += p
                    if y != x:
                        p_err += p
                    if guess is not None and guess == x:
                        p_eve += p
    qber = p_err / p_sift if p_sift else math.nan
    if eve == "none":
        eve_frac = 0.0
    else:
        eve_frac = p_eve / p_sift if p_sift else math.nan
    return ExactStats(sift_fraction=p_sift, qber=qber, eve_information_fraction=eve_frac)
