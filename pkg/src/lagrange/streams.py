"""Training streams: time-ordered example generators and CSV ingestion.

A stream is one pass worth of base points plus a traversal rule (ping-pong or
loop) and a supervision mask; the experiment runner turns it into the actual
event sequence, spacing events by the sampling step tau.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "StreamFormatError",
    "TrainingEvent",
    "TrainingStream",
    "interval_sweep",
    "interval_classification",
    "trajectory_2d",
    "grid_set",
    "ingest_csv",
    "diamond_label",
]


class StreamFormatError(ValueError):
    """A stream file is malformed; carries the offending row number when known."""

    def __init__(self, message: str, row: int | None = None):
        self.row = row
        if row is not None:
            message = f"row {row}: {message}"
        super().__init__(message)


@dataclass(frozen=True)
class TrainingEvent:
    """One example: arrival index k, arrival time k*tau, input, optional target."""

    index: int
    time: float
    u: np.ndarray
    target: np.ndarray | None = None


@dataclass
class TrainingStream:
    """Base points of one pass plus traversal and supervision bookkeeping.

    ``supervised`` marks points that fire gradient impulses; ``labeled`` marks
    points that carry usable targets for evaluation (a superset of the
    supervised ones for generated streams, the same set for CSV streams).
    """

    inputs: np.ndarray
    targets: np.ndarray
    supervised: np.ndarray
    labeled: np.ndarray = field(default=None)  # type: ignore[assignment]
    classification: bool = False
    traversal: str = "forward-backward"

    def __post_init__(self) -> None:
        self.inputs = np.atleast_2d(np.asarray(self.inputs, dtype=float))
        self.targets = np.atleast_2d(np.asarray(self.targets, dtype=float))
        self.supervised = np.asarray(self.supervised, dtype=bool)
        if self.labeled is None:
            self.labeled = np.ones(self.size, dtype=bool)
        self.labeled = np.asarray(self.labeled, dtype=bool)
        if self.traversal not in ("forward-backward", "loop"):
            raise ValueError("traversal must be 'forward-backward' or 'loop'")
        if not (
            self.targets.shape[0] == self.size
            and self.supervised.shape == (self.size,)
            and self.labeled.shape == (self.size,)
        ):
            raise ValueError("inputs, targets and masks must agree in length")

    @property
    def size(self) -> int:
        return self.inputs.shape[0]

    @property
    def input_dim(self) -> int:
        return self.inputs.shape[1]

    @property
    def target_dim(self) -> int:
        return self.targets.shape[1]

    def order(self, iteration: int) -> np.ndarray:
        """Visit order for one directional pass; odd passes run backward."""
        if self.traversal == "loop" or iteration % 2 == 0:
            return np.arange(self.size)
        return np.arange(self.size - 1, -1, -1)


def _strided_mask(count: int, supervised_count: int | None) -> np.ndarray:
    mask = np.zeros(count, dtype=bool)
    if supervised_count is None or supervised_count >= count:
        mask[:] = True
        return mask
    if supervised_count < 0:
        raise ValueError("supervised_count must be >= 0")
    if supervised_count:
        mask[(np.arange(supervised_count) * count) // supervised_count] = True
    return mask


def interval_sweep(
    low: float,
    high: float,
    count: int,
    slope: float,
    intercept: float,
    supervised_count: int | None = None,
    traversal: str = "forward-backward",
) -> TrainingStream:
    """Equally spaced points on [low, high] with affine targets slope*u + intercept.

    ``traversal`` picks the visit pattern: ``forward-backward`` alternates the
    sweep direction per pass, ``loop`` repeats forward passes.  (The ping-pong
    pattern modulates the feedback at the turnaround period and can resonate
    with the weight loop for some sweep lengths; ``loop`` keeps the same
    spacing without that modulation.)  When ``supervised_count`` is smaller
    than ``count`` the supervised points are evenly strided across the sweep.
    """
    if count < 2:
        raise ValueError("need at least two points")
    if not low < high:
        raise ValueError("low must be below high")
    u = np.linspace(low, high, count)
    return TrainingStream(
        inputs=u[:, None],
        targets=(slope * u + intercept)[:, None],
        supervised=_strided_mask(count, supervised_count),
        traversal=traversal,
    )


def diamond_label(points: np.ndarray, half_width: float = 0.5) -> np.ndarray:
    """True where the L1 norm of the point is at most half_width."""
    return np.abs(np.atleast_2d(points)).sum(axis=1) <= half_width


def _one_hot_true_false(true_mask: np.ndarray) -> np.ndarray:
    targets = np.zeros((true_mask.size, 2))
    targets[true_mask, 0] = 1.0
    targets[~true_mask, 1] = 1.0
    return targets


def interval_classification(
    low: float,
    high: float,
    count: int,
    supervised_count: int | None = None,
    half_width: float = 0.5,
    traversal: str = "forward-backward",
) -> TrainingStream:
    """1-d two-class stream: |u| <= half_width is class true = one-hot (1, 0)."""
    if count < 2:
        raise ValueError("need at least two points")
    if not low < high:
        raise ValueError("low must be below high")
    u = np.linspace(low, high, count)
    return TrainingStream(
        inputs=u[:, None],
        targets=_one_hot_true_false(np.abs(u) <= half_width),
        supervised=_strided_mask(count, supervised_count),
        classification=True,
        traversal=traversal,
    )


def trajectory_2d(kind: str, steps: int = 100) -> TrainingStream:
    """Planar trajectory stream at integer times t = 1..steps, fully supervised.

    ``spiral``: u(t) = (t/100)(cos t, sin t); ``flower``: cos(10t)(cos t, sin t).
    Class true is the diamond |x| + |y| <= 0.5, targets one-hot.
    """
    if steps < 1:
        raise ValueError("steps must be >= 1")
    t = np.arange(1, steps + 1, dtype=float)
    if kind == "spiral":
        pts = np.column_stack(((t / 100.0) * np.cos(t), (t / 100.0) * np.sin(t)))
    elif kind == "flower":
        pts = np.column_stack((np.cos(10 * t) * np.cos(t), np.cos(10 * t) * np.sin(t)))
    else:
        raise ValueError(f"unknown trajectory kind {kind!r}")
    return TrainingStream(
        inputs=pts,
        targets=_one_hot_true_false(diamond_label(pts)),
        supervised=np.ones(steps, dtype=bool),
        classification=True,
        traversal="loop",
    )


def grid_set(half_width: float = 0.5, count: int = 100) -> TrainingStream:
    """Evaluation grid over the square [-hw, hw]^2, labeled by the diamond rule.

    Cell-centered points alone put a full ring on the |x|+|y| = hw boundary,
    so the columns are nudged by (d, 2d) with a tiny d: that sends exactly
    half the ring inside and half outside, producing the required even split
    with no boundary ties.
    """
    side = math.isqrt(count)
    if side * side != count:
        raise ValueError("count must be a perfect square")
    cell = 2.0 * half_width / side
    nudge = 1e-9 * half_width
    xs = -half_width + cell / 2.0 + cell * np.arange(side) + nudge
    ys = -half_width + cell / 2.0 + cell * np.arange(side) + 2.0 * nudge
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    pts = np.column_stack((gx.ravel(), gy.ravel()))
    labels = diamond_label(pts, half_width)
    if labels.sum() * 2 != count:
        raise RuntimeError(
            f"grid construction produced a {labels.sum()}/{count - labels.sum()} split "
            "instead of an even one"
        )
    return TrainingStream(
        inputs=pts,
        targets=_one_hot_true_false(labels),
        supervised=np.ones(count, dtype=bool),
        classification=True,
        traversal="loop",
    )


def ingest_csv(path) -> TrainingStream:
    """Read a feature stream: header ``dim=<d>,labeled=<0|1>``, rows of d floats.

    When the header declares ``labeled=1`` each row carries one trailing
    integer class cell; leaving it empty makes the row unsupervised.  Labels
    become one-hot targets over ``max(label) + 1`` classes.  Ragged rows and
    non-numeric cells raise :class:`StreamFormatError` with the row number.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        rows = [(i + 1, row) for i, row in enumerate(reader) if row]
    if not rows:
        raise StreamFormatError("empty stream file")
    header_no, header = rows[0]
    try:
        dim_part, labeled_part = (cell.strip() for cell in header)
        if not (dim_part.startswith("dim=") and labeled_part.startswith("labeled=")):
            raise ValueError
        dim = int(dim_part.removeprefix("dim="))
        labeled_flag = int(labeled_part.removeprefix("labeled="))
        if dim < 1 or labeled_flag not in (0, 1):
            raise ValueError
    except ValueError:
        raise StreamFormatError(
            "header must be 'dim=<d>,labeled=<0|1>'", row=header_no
        ) from None
    features, labels = [], []
    for lineno, row in rows[1:]:
        expected = dim + labeled_flag
        if len(row) != expected:
            raise StreamFormatError(
                f"expected {expected} cells, found {len(row)}", row=lineno
            )
        try:
            features.append([float(cell) for cell in row[:dim]])
        except ValueError:
            raise StreamFormatError("non-numeric feature cell", row=lineno) from None
        if labeled_flag:
            cell = row[dim].strip()
            if cell:
                try:
                    labels.append(int(cell))
                except ValueError:
                    raise StreamFormatError(
                        f"label must be an integer, found {cell!r}", row=lineno
                    ) from None
            else:
                labels.append(None)
        else:
            labels.append(None)
    if not features:
        raise StreamFormatError("stream file has a header but no data rows")
    inputs = np.asarray(features)
    has_label = np.array([lbl is not None for lbl in labels])
    if labeled_flag and has_label.any():
        n_classes = max(lbl for lbl in labels if lbl is not None) + 1
        targets = np.zeros((inputs.shape[0], n_classes))
        for i, lbl in enumerate(labels):
            if lbl is not None:
                targets[i, lbl] = 1.0
    else:
        targets = np.zeros((inputs.shape[0], 1))
    return TrainingStream(
        inputs=inputs,
        targets=targets,
        supervised=has_label,
        labeled=has_label,
        classification=bool(labeled_flag),
        traversal="loop",
    )
