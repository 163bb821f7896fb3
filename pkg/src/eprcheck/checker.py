"""Conformance checks of a candidate source against the ideal specification.

Deviations are keyed like correlation-table entries, (alpha, beta, x, y)
with alpha/x the B-side index and outcome: conditional and joint checks
use the full key, while A-side branch-probability checks leave alpha and x
as None.  Exact checks compare computed probabilities; the empirical check
compares sampled frequencies, with one independent seed stream per index
pair so pairs can be sampled in parallel and reports stay reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import product
from typing import Mapping

import numpy as np

from .errors import MissingIndexError, ValidationError
from .sources import (
    OUTCOMES,
    SELF_CHECKING_CANDIDATE,
    CorrelationTable,
    Source,
    correlation_table,
    ideal_reference_table,
)

DEFAULT_EXACT_TOL = 1e-9
DEGENERATE_BRANCH = 1e-14

DevKey = tuple[int | None, int, int | None, int]


@dataclass(frozen=True)
class CheckReport:
    """Per-equation deviations with a verdict at a tolerance."""

    mode: str
    deviations: Mapping[DevKey, float]
    tolerance: float
    sample_size: int | None = None
    degenerate: frozenset = field(default_factory=frozenset)

    @property
    def max_abs_dev(self) -> float:
        return max(self.deviations.values()) if self.deviations else 0.0

    @property
    def passed(self) -> bool:
        return self.max_abs_dev <= self.tolerance

    @property
    def verdict(self) -> str:
        return "pass" if self.passed else "fail"


def _branch_norms(source: Source, indices) -> dict[tuple[int, int], float]:
    norms = {}
    for beta in indices:
        for y in OUTCOMES:
            v = source.apply_p(beta, y, source.psi)
            norms[(beta, y)] = float(np.vdot(v, v).real)
    return norms


def check_conjugate(source: Source, tol: float = DEFAULT_EXACT_TOL) -> CheckReport:
    """Test the conjugate-coding equations on indices 2 and 3.

    Three families are checked: every A-side branch probability equals 1/2;
    the B-side repeat of the same index reproduces the A outcome exactly;
    and cross-index conditionals equal 1/2.  A branch with probability
    below DEGENERATE_BRANCH cannot support a conditional: such entries are
    reported as degenerate and fail unless their target is 0.
    """
    for alpha in (2, 3):
        if alpha not in source.p_family or alpha not in source.r_family:
            raise MissingIndexError(f"index {alpha} required for the conjugate-coding check")
    table = correlation_table(source)
    norms = _branch_norms(source, (2, 3))

    devs: dict[DevKey, float] = {}
    degenerate = set()
    for beta in (2, 3):
        for y in OUTCOMES:
            devs[(None, beta, None, y)] = abs(norms[(beta, y)] - 0.5)
    for alpha, beta in product((2, 3), repeat=2):
        for x, y in product(OUTCOMES, OUTCOMES):
            target = (1.0 if x == y else 0.0) if alpha == beta else 0.5
            denom = norms[(beta, y)]
            key = (alpha, beta, x, y)
            if denom < DEGENERATE_BRANCH:
                degenerate.add(key)
                devs[key] = 0.0 if table.entry(alpha, beta, x, y) < DEGENERATE_BRANCH and target == 0.0 else target
            else:
                devs[key] = abs(table.entry(alpha, beta, x, y) / denom - target)
    return CheckReport(
        mode="exact", deviations=devs, tolerance=tol, degenerate=frozenset(degenerate)
    )


def check_self_checking(source: Source, tol: float = DEFAULT_EXACT_TOL) -> CheckReport:
    """Compare the full 36-entry correlation table against the ideal one."""
    if source.kind != SELF_CHECKING_CANDIDATE or 1 not in source.p_family:
        raise MissingIndexError(
            "self-checking requires measurement index 1 on both sides; "
            "use check_conjugate for conjugate-coding sources"
        )
    table = correlation_table(source)
    reference = ideal_reference_table()
    devs = {
        key: abs(table.probs[key] - reference.probs[key])
        for key in sorted(reference.probs)
    }
    return CheckReport(mode="exact", deviations=devs, tolerance=tol)


def empirical_check(source: Source, n_samples: int, seed: int, eps: float) -> CheckReport:
    """Estimate the correlation table from simulated joint button presses.

    For every present index pair (alpha, beta), ``n_samples`` rounds press
    beta on the A side, then alpha on the B side, and record the outcome
    pair; frequencies are compared entrywise against the ideal table.  Each
    pair draws from its own seed stream derived from ``seed``.
    """
    if n_samples < 1:
        raise ValidationError("n_samples must be at least 1")
    indices = source.indices
    reference = ideal_reference_table(indices)
    table = correlation_table(source)
    norms = _branch_norms(source, indices)

    devs: dict[DevKey, float] = {}
    for alpha in indices:
        for beta in indices:
            rng = np.random.default_rng(
                np.random.SeedSequence(entropy=seed % 2**64, spawn_key=(alpha, beta))
            )
            p_y0 = norms[(beta, 0)]
            y = np.where(rng.random(n_samples) < p_y0, 0, 1)
            cond_x0 = np.empty(2)
            for yy in OUTCOMES:
                denom = norms[(beta, yy)]
                cond_x0[yy] = table.entry(alpha, beta, 0, yy) / denom if denom > 0 else 0.0
            x = np.where(rng.random(n_samples) < cond_x0[y], 0, 1)
            for xx in OUTCOMES:
                for yy in OUTCOMES:
                    freq = float(np.count_nonzero((x == xx) & (y == yy))) / n_samples
                    key = (alpha, beta, xx, yy)
                    devs[key] = abs(freq - reference.probs[key])
    return CheckReport(mode="empirical", deviations=devs, tolerance=eps, sample_size=n_samples)
