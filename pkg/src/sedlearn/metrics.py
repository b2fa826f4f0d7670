"""Frame-level polyphonic sound event detection metrics.

Scoring is micro-averaged over all (class, frame) cells. The error rate
follows the substitution/deletion/insertion decomposition: per frame,
S = min(FN, FP), D = max(0, FN - FP), I = max(0, FP - FN), normalized by
the number of active reference classes.

Degenerate-case conventions (documented because the metric definitions
leave them open): F1 is 1 when both rolls are entirely empty and 0 when
there are errors but no hits; ER uses max(1, sum N) in the denominator so
insertions against an empty reference stay finite.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DataFormatError


@dataclass(frozen=True)
class EventRoll:
    """Binary class-by-time activity matrix."""

    data: np.ndarray  # shape (C, T), entries in {0, 1}
    labels: tuple

    def __post_init__(self):
        arr = np.asarray(self.data)
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError(f"roll must be C x T with C,T >= 1, got {arr.shape}")
        if not np.all((arr == 0) | (arr == 1)):
            raise ValueError("roll entries must be 0 or 1")
        object.__setattr__(self, "data", arr.astype(np.uint8))
        object.__setattr__(self, "labels", tuple(self.labels))
        if len(self.labels) != arr.shape[0]:
            raise ValueError(
                f"{len(self.labels)} labels for {arr.shape[0]} classes"
            )

    @property
    def n_classes(self):
        return self.data.shape[0]

    @property
    def n_frames(self):
        return self.data.shape[1]


def make_roll(data, labels=None):
    data = np.asarray(data)
    if labels is None:
        labels = tuple(f"class_{i}" for i in range(data.shape[0]))
    return EventRoll(data=data, labels=labels)


def _as_array(roll):
    return roll.data if isinstance(roll, EventRoll) else np.asarray(roll)


def _check_shapes(pred, truth):
    p, t = _as_array(pred), _as_array(truth)
    if p.shape != t.shape:
        raise ValueError(f"roll shapes differ: pred {p.shape} vs truth {t.shape}")
    return p.astype(np.int64), t.astype(np.int64)


@dataclass(frozen=True)
class ScoreReport:
    f1: float
    er: float
    tp: int
    fp: int
    fn: int
    substitutions: int
    deletions: int
    insertions: int
    n_ref: int


def score_report(pred, truth):
    """All counts plus both metrics, for test oracles and CSV export."""
    p, t = _check_shapes(pred, truth)
    tp = int(np.sum((p == 1) & (t == 1)))
    fp = int(np.sum((p == 1) & (t == 0)))
    fn = int(np.sum((p == 0) & (t == 1)))

    fn_t = ((p == 0) & (t == 1)).sum(axis=0)
    fp_t = ((p == 1) & (t == 0)).sum(axis=0)
    s = int(np.minimum(fn_t, fp_t).sum())
    d = int(np.maximum(0, fn_t - fp_t).sum())
    i = int(np.maximum(0, fp_t - fn_t).sum())
    n_ref = int(t.sum())

    if tp + fp + fn == 0:
        f1 = 1.0
    elif tp == 0:
        f1 = 0.0
    else:
        precision = tp / (tp + fp)
        recall = tp / (tp + fn)
        f1 = 2 * precision * recall / (precision + recall)
    er = (s + d + i) / max(1, n_ref)
    return ScoreReport(
        f1=f1, er=er, tp=tp, fp=fp, fn=fn,
        substitutions=s, deletions=d, insertions=i, n_ref=n_ref,
    )


def frame_f1(pred, truth):
    """Micro-averaged F1 over all (class, frame) cells."""
    return score_report(pred, truth).f1


def frame_error_rate(pred, truth):
    """Sum of substitution, deletion and insertion rates."""
    return score_report(pred, truth).er


def write_roll_csv(path, roll):
    """Dump a roll as CSV: header frame_index,class_0..class_{C-1}."""
    roll = roll if isinstance(roll, EventRoll) else make_roll(roll)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["frame_index"] + [f"class_{i}" for i in range(roll.n_classes)])
        for t in range(roll.n_frames):
            writer.writerow([t] + [int(v) for v in roll.data[:, t]])


def read_roll_csv(path):
    """Parse a roll CSV; raises DataFormatError naming the bad line."""
    path = Path(path)
    rows = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataFormatError(f"{path}: empty roll file") from None
        if not header or header[0] != "frame_index":
            raise DataFormatError(f"{path}: line 1: expected 'frame_index' header")
        n_classes = len(header) - 1
        if n_classes < 1:
            raise DataFormatError(f"{path}: line 1: no class columns")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != n_classes + 1:
                raise DataFormatError(
                    f"{path}: line {lineno}: expected {n_classes + 1} fields, got {len(row)}"
                )
            try:
                values = [int(v) for v in row[1:]]
            except ValueError:
                raise DataFormatError(
                    f"{path}: line {lineno}: non-integer roll entry"
                ) from None
            if any(v not in (0, 1) for v in values):
                raise DataFormatError(f"{path}: line {lineno}: entries must be 0/1")
            rows.append(values)
    if not rows:
        raise DataFormatError(f"{path}: no frames")
    return make_roll(np.array(rows, dtype=np.uint8).T)
