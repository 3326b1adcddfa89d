"""Report tables, summary statistics and least-squares lines."""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import InvalidInputError, InvalidParameterError, SingularFitError

REPORT_COLUMNS = ("trial", "subtpa", "packet", "checked", "mismatches", "first_error_packet", "signals")


@dataclass
class TrialMatrix:
    """Detected-error counts: one row per SUBTPA, one column per trial."""

    subtpas: list[int]
    trials: list[int]
    cells: np.ndarray

    def __post_init__(self):
        self.cells = np.asarray(self.cells, dtype=float)
        if self.cells.shape != (len(self.subtpas), len(self.trials)):
            raise InvalidInputError(f"cells shape {self.cells.shape} does not match "
                                    f"{len(self.subtpas)} x {len(self.trials)}")
        if (self.cells < 0).any():
            raise InvalidInputError("counts must be non-negative")

    @classmethod
    def from_outcomes(cls, outcomes: Sequence) -> "TrialMatrix":
        ids = [a.subtpa_id for a in outcomes[0].agents]
        cells = np.array([[a.detected_count for a in o.agents] for o in outcomes], dtype=float).T
        return cls(ids, [o.trial for o in outcomes], cells)

    @classmethod
    def from_report_rows(cls, rows: Iterable[dict]) -> "TrialMatrix":
        acc: dict[tuple[int, int], int] = {}
        for r in rows:
            k = (int(r["subtpa"]), int(r["trial"]))
            acc[k] = acc.get(k, 0) + int(r["mismatches"])
        subtpas = sorted({s for s, _ in acc})
        trials = sorted({t for _, t in acc})
        cells = np.zeros((len(subtpas), len(trials)))
        si = {s: i for i, s in enumerate(subtpas)}
        ti = {t: i for i, t in enumerate(trials)}
        for (s, t), v in acc.items():
            cells[si[s], ti[t]] = v
        return cls(subtpas, trials, cells)

    @property
    def column_totals(self) -> np.ndarray:
        return self.cells.sum(axis=0)

    @property
    def row_means(self) -> np.ndarray:
        return self.cells.mean(axis=1)


@dataclass(frozen=True)
class SummaryRow:
    subtpa: int
    max: float
    min: float
    mean: float
    stddev: float


def summarize(matrix: TrialMatrix) -> list[SummaryRow]:
    """Per-SUBTPA max, min, mean and population standard deviation."""
    if not matrix.trials:
        raise InvalidInputError("need at least one trial")
    c = matrix.cells
    return [SummaryRow(s, float(r.max()), float(r.min()), float(r.mean()), float(r.std()))
            for s, r in zip(matrix.subtpas, c)]


@dataclass(frozen=True)
class FittedLine:
    """y = A x + B; ``residual`` is the mean squared residual of the fit."""

    A: float
    B: float
    residual: float = 0.0

    def __call__(self, x):
        return self.A * np.asarray(x, dtype=float) + self.B

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)


def fit_line_from_sums(sum_x: float, sum_xx: float, sum_y: float, sum_xy: float, n: int) -> FittedLine:
    """Solve the normal equations
        sum_xx A + sum_x B = sum_xy
        sum_x  A + n     B = sum_y
    by Cramer's rule."""
    det = sum_xx * n - sum_x * sum_x
    if n < 2 or det == 0:
        raise SingularFitError("degenerate x values: normal equations are singular")
    a = (sum_xy * n - sum_x * sum_y) / det
    b = (sum_xx * sum_y - sum_x * sum_xy) / det
    return FittedLine(a, b)


def fit_line(points: Iterable[tuple[float, float]]) -> FittedLine:
    pts = np.asarray(list(points), dtype=float)
    if pts.ndim != 2 or pts.shape[0] < 2:
        raise SingularFitError("need at least two points")
    x, y = pts[:, 0], pts[:, 1]
    line = fit_line_from_sums(x.sum(), (x * x).sum(), y.sum(), (x * y).sum(), len(x))
    res = float(np.mean((y - line(x)) ** 2))
    return FittedLine(line.A, line.B, res)


def fit_matrix(matrix: TrialMatrix) -> FittedLine:
    """Line through (SUBTPA id, mean detected count)."""
    return fit_line(zip(matrix.subtpas, matrix.row_means))


@dataclass(frozen=True)
class DispersionReport:
    residual_a: float
    residual_b: float

    @property
    def smaller(self) -> str:
        if math.isclose(self.residual_a, self.residual_b, rel_tol=1e-12, abs_tol=1e-15):
            return "equal"
        return "a" if self.residual_a < self.residual_b else "b"


def dispersion_compare(matrix_a: TrialMatrix, matrix_b: TrialMatrix) -> DispersionReport:
    """Mean squared residual of each matrix's per-SUBTPA means about its own
    fitted line."""
    if matrix_a.cells.shape != matrix_b.cells.shape:
        raise InvalidInputError("matrices must have the same shape")
    return DispersionReport(fit_matrix(matrix_a).residual, fit_matrix(matrix_b).residual)


def random_sequence(rng: np.random.Generator, constant: int, seq_len: int) -> np.ndarray:
    """Pseudo-random baseline: seq_len distinct block numbers below constant."""
    if seq_len > constant:
        raise InvalidParameterError("seq_len exceeds constant")
    return rng.choice(constant, size=seq_len, replace=False).astype(np.int64)


def bucket_means(rows: Sequence[SummaryRow]) -> dict[int, list[int]]:
    """Integer-rounded mean -> SUBTPAs with that mean, ascending."""
    out: dict[int, list[int]] = {}
    for r in rows:
        out.setdefault(int(math.floor(r.mean + 0.5)), []).append(r.subtpa)
    return dict(sorted(out.items()))


def segment_counts(indices, constant: int, segments: int = 4) -> np.ndarray:
    idx = np.asarray(indices, dtype=np.int64)
    return np.bincount(idx * segments // constant, minlength=segments)


def segment_ratio(indices, constant: int, segments: int = 4) -> float:
    """max/min of the per-segment counts (inf when a segment is empty)."""
    c = segment_counts(indices, constant, segments)
    return float("inf") if c.min() == 0 else float(c.max() / c.min())


# -- files -------------------------------------------------------------------------

def write_report_csv(rows: Iterable[dict], fh) -> None:
    w = csv.DictWriter(fh, fieldnames=REPORT_COLUMNS, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow(r)


def read_report_csv(fh) -> list[dict]:
    reader = csv.DictReader(fh)
    missing = set(REPORT_COLUMNS) - set(reader.fieldnames or ())
    if missing:
        raise InvalidInputError(f"report is missing columns: {', '.join(sorted(missing))}")
    return list(reader)


def _fmt(v: float) -> str:
    return f"{v:.6f}"


def summary_csv(rows: Sequence[SummaryRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["subtpa", "max", "min", "avg", "stddev"])
    for r in rows:
        w.writerow([r.subtpa, _fmt(r.max), _fmt(r.min), _fmt(r.mean), _fmt(r.stddev)])
    return buf.getvalue()


def fit_json(line: FittedLine) -> str:
    return json.dumps({"A": round(line.A, 10), "B": round(line.B, 10), "residual": round(line.residual, 10)},
                      sort_keys=True) + "\n"
