"""JSON encoding of every value type, plus atomic file output.

Complex numbers serialize as two-element [re, im] arrays, matrices as
row-major nested arrays, joint vectors as flat arrays in the A-major
convention.  Undefined statistics (NaN) map to null.  Serialization is
byte-stable: keys are sorted and entry lists are emitted in a fixed order.
"""

from __future__ import annotations

import json
import math
import os
import tempfile
from typing import Any

import numpy as np

from .bb84 import ExactStats, ProtocolStats, TransmissionRecord
from .checker import CheckReport
from .decompose import Decomposition
from .errors import ValidationError
from .gallery import GalleryEntry
from .linalg import BipartiteShape
from .sources import (
    CONJUGATE_CODING,
    OUTCOME_LABELS,
    SELF_CHECKING_CANDIDATE,
    CorrelationTable,
    MeasurementFamily,
    Source,
)

_LABEL_TO_OUTCOME = {"+": 0, "-": 1}


def complex_to_json(z: complex) -> list[float]:
    return [float(z.real), float(z.imag)]


def vector_to_json(v: np.ndarray) -> list[list[float]]:
    return [complex_to_json(z) for z in np.asarray(v, dtype=complex)]


def vector_from_json(data) -> np.ndarray:
    return np.array([complex(re, im) for re, im in data], dtype=complex)


def matrix_to_json(m: np.ndarray) -> list[list[list[float]]]:
    return [[complex_to_json(z) for z in row] for row in np.asarray(m, dtype=complex)]


def matrix_from_json(data) -> np.ndarray:
    return np.array([[complex(re, im) for re, im in row] for row in data], dtype=complex)


def _nan_to_none(x: float) -> float | None:
    return None if isinstance(x, float) and math.isnan(x) else x


def source_to_json(source: Source) -> dict[str, Any]:
    def family(fam: MeasurementFamily) -> dict[str, Any]:
        return {
            str(alpha): {"plus": matrix_to_json(pair[0]), "minus": matrix_to_json(pair[1])}
            for alpha, pair in sorted(fam.projectors.items())
        }

    return {
        "dim_a": source.shape.dim_a,
        "dim_b": source.shape.dim_b,
        "psi": vector_to_json(source.psi),
        "p": family(source.p_family),
        "r": family(source.r_family),
    }


def source_from_json(data) -> Source:
    try:
        shape = BipartiteShape(int(data["dim_a"]), int(data["dim_b"]))
        psi = vector_from_json(data["psi"])

        def family(block) -> MeasurementFamily:
            return MeasurementFamily(
                {
                    int(alpha): (matrix_from_json(pair["plus"]), matrix_from_json(pair["minus"]))
                    for alpha, pair in block.items()
                }
            )

        p_family = family(data["p"])
        r_family = family(data["r"])
    except (KeyError, TypeError, IndexError) as exc:
        raise ValidationError(f"malformed source file: {exc}") from exc
    kind = SELF_CHECKING_CANDIDATE if 1 in p_family else CONJUGATE_CODING
    return Source(shape=shape, psi=psi, p_family=p_family, r_family=r_family, kind=kind)


def table_to_json(table: CorrelationTable) -> dict[str, Any]:
    out: dict[str, Any] = {}
    for alpha in table.indices:
        out[str(alpha)] = {}
        for beta in table.indices:
            out[str(alpha)][str(beta)] = {
                OUTCOME_LABELS[x] + OUTCOME_LABELS[y]: table.entry(alpha, beta, x, y)
                for x in (0, 1)
                for y in (0, 1)
            }
    return out


def table_from_json(data) -> CorrelationTable:
    probs = {}
    for alpha, betas in data.items():
        for beta, cells in betas.items():
            for label, value in cells.items():
                x, y = _LABEL_TO_OUTCOME[label[0]], _LABEL_TO_OUTCOME[label[1]]
                probs[(int(alpha), int(beta), x, y)] = float(value)
    return CorrelationTable(probs)


def report_to_json(report: CheckReport) -> dict[str, Any]:
    entries = []
    for key in sorted(report.deviations, key=lambda k: tuple(-1 if v is None else v for v in k)):
        alpha, beta, x, y = key
        entry = {
            "alpha": alpha,
            "beta": beta,
            "x": None if x is None else OUTCOME_LABELS[x],
            "y": OUTCOME_LABELS[y],
            "value": report.deviations[key],
        }
        if key in report.degenerate:
            entry["degenerate"] = True
        entries.append(entry)
    return {
        "mode": report.mode,
        "tolerance": report.tolerance,
        "max_abs_dev": report.max_abs_dev,
        "verdict": report.verdict,
        "deviations": entries,
        "sample_size": report.sample_size,
    }


def decomposition_to_json(decomp: Decomposition) -> dict[str, Any]:
    return {
        "residual": decomp.residual,
        "blocks": [
            {
                "alpha": complex_to_json(blk.alpha),
                "a0": vector_to_json(blk.a0),
                "a1": vector_to_json(blk.a1),
                "b0": vector_to_json(blk.b0),
                "b1": vector_to_json(blk.b1),
            }
            for blk in decomp.blocks
        ],
        "lemmas": {
            name: {"dev": dev, "pass": dev <= decomp.diagnostics.tolerance}
            for name, dev in sorted(decomp.diagnostics.deviations.items())
        },
    }


def stats_to_json(stats: ProtocolStats | ExactStats, strategy: str, seed: int | None) -> dict[str, Any]:
    out = {
        "sift_fraction": _nan_to_none(stats.sift_fraction),
        "qber": _nan_to_none(stats.qber),
        "eve_information_fraction": _nan_to_none(stats.eve_information_fraction),
        "strategy": strategy,
        "seed": seed,
    }
    if isinstance(stats, ProtocolStats):
        out["n"] = stats.n
        out["sifted_count"] = stats.sifted_count
    return out


def records_to_csv(records: list[TransmissionRecord]) -> str:
    lines = ["index,alice_button,alice_bit,bob_basis,bob_bit,sifted,error"]
    for r in records:
        sifted = int(r.alice_button == r.bob_basis)
        error = int(sifted and r.alice_bit != r.bob_bit)
        lines.append(
            f"{r.index},{r.alice_button},{r.alice_bit},{r.bob_basis},{r.bob_bit},{sifted},{error}"
        )
    return "\n".join(lines) + "\n"


def manifest_to_json(entries: list[GalleryEntry], source_files: dict[str, str] | None = None) -> list[dict]:
    files = source_files or {}
    return [
        {
            "name": e.name,
            "source_file": files.get(e.name),
            "expected": dict(e.expected),
            "seed": e.seed,
            "notes": e.notes,
        }
        for e in entries
    ]


def dumps(payload) -> str:
    return json.dumps(payload, indent=2, sort_keys=True, allow_nan=False) + "\n"


def write_atomic(path: str, text: str) -> None:
    """Write via a temp file and rename, so readers never see partial output."""
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load_source(path: str) -> Source:
    with open(path) as handle:
        return source_from_json(json.load(handle))
