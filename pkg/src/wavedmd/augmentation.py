"""State augmentation: snapshot matrices with derivative and delay blocks.

The augmented state stacks the measured variables with up to four time
derivatives and any number of time-shifted copies.  Leading samples for both
kinds of block come from real history preceding the training window, never
from padding.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EmptyWindowError, InsufficientHistoryError
from .timeseries import TimeSeries

MAX_DERIVATIVES = 4

#: Supported derivative schemes.  ``backward2`` is the three-point
#: second-order backward stencil, applied recursively for higher orders.
SCHEMES = ("backward2",)


@dataclass(frozen=True)
class AugmentationSpec:
    """Layout of the augmented state: ``nde`` derivative blocks then ``nts``
    delay blocks, each of the original variable dimension."""

    nde: int = 0
    nts: int = 0
    scheme: str = "backward2"

    def __post_init__(self):
        if not 0 <= self.nde <= MAX_DERIVATIVES:
            raise ValueError(f"nde must be in 0..{MAX_DERIVATIVES}, got {self.nde}")
        if self.nts < 0:
            raise ValueError(f"nts must be nonnegative, got {self.nts}")
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown derivative scheme {self.scheme!r}")

    @property
    def lead_required(self) -> int:
        """History steps needed ahead of the training window."""
        need_d = 2 * self.nde if self.nde > 0 else 0
        need_s = self.nts + 1 if self.nts > 0 else 0
        return max(need_d, need_s)

    def state_dim(self, n: int) -> int:
        return n * (1 + self.nde + self.nts)

    def block_labels(self) -> tuple[str, ...]:
        return (
            "state",
            *(f"d{i}" for i in range(1, self.nde + 1)),
            *(f"shift{s}" for s in range(1, self.nts + 1)),
        )


@dataclass(frozen=True)
class SnapshotPair:
    """Matrices (X, Xp) feeding the least-squares operator fit.

    Column ``j`` of ``Xp`` is the augmented snapshot one step after column
    ``j`` of ``X``; ``layout`` records the fixed block order so variables can
    be extracted from forecasts unambiguously.
    """

    X: np.ndarray
    Xp: np.ndarray
    n: int
    layout: tuple[str, ...]

    def __post_init__(self):
        if self.X.shape != self.Xp.shape:
            raise ValueError(f"X {self.X.shape} and Xp {self.Xp.shape} must have identical shape")
        if self.X.shape[0] != self.n * len(self.layout):
            raise ValueError(
                f"{self.X.shape[0]} rows inconsistent with {len(self.layout)} blocks of {self.n} variables"
            )

    @property
    def p(self) -> int:
        return self.X.shape[0]

    @property
    def x_last(self) -> np.ndarray:
        """Last training snapshot (the forecast's t = 0 reference)."""
        return self.Xp[:, -1]


def _stencil_first(values: np.ndarray, dt: float) -> np.ndarray:
    """Second-order backward first derivative of every column index >= 2."""
    return (3.0 * values[:, 2:] - 4.0 * values[:, 1:-1] + values[:, :-2]) / (2.0 * dt)


def derivative(series: TimeSeries, order: int, history: TimeSeries) -> np.ndarray:
    """i-th time derivative of ``series`` by recursive application of the
    second-order backward stencil, using ``history`` for leading samples.

    Output has the same number of columns as ``series``.
    """
    if order < 1:
        raise ValueError(f"order must be >= 1, got {order}")
    need = 2 * order
    if history.m < need:
        raise InsufficientHistoryError(
            f"derivative of order {order} needs {need} history steps, got {history.m}"
        )
    work = np.hstack([history.values[:, history.m - need:], series.values])
    for _ in range(order):
        work = _stencil_first(work, series.dt)
    return work


def hankel_shifts(series: TimeSeries, nts: int, history: TimeSeries) -> np.ndarray:
    """Stack ``nts`` delayed copies of ``series``: block ``s`` holds the state
    ``s`` steps in the past, drawing leading entries from ``history``."""
    if nts < 1:
        raise ValueError(f"nts must be >= 1, got {nts}")
    if history.m < nts:
        raise InsufficientHistoryError(f"{nts} shifts need {nts} history steps, got {history.m}")
    full = np.hstack([history.values[:, history.m - nts:], series.values])
    q = series.m
    return np.vstack([full[:, nts - s: nts - s + q] for s in range(1, nts + 1)])


def augmented_sequence(
    train: TimeSeries, history: TimeSeries, spec: AugmentationSpec
) -> np.ndarray:
    """Augmented snapshot at every training step, blocks in layout order."""
    blocks = [train.values]
    for i in range(1, spec.nde + 1):
        blocks.append(derivative(train, i, history))
    if spec.nts > 0:
        blocks.append(hankel_shifts(train, spec.nts, history))
    return np.vstack(blocks)


def build_snapshots(
    train: TimeSeries, history: TimeSeries, spec: AugmentationSpec
) -> SnapshotPair:
    """Build the (possibly augmented) snapshot pair from a training window.

    With ``nde = nts = 0`` this reduces exactly to the plain pair of the
    unaugmented measurements.
    """
    if train.m < 2:
        raise EmptyWindowError(f"training window of {train.m} steps cannot form a snapshot pair")
    if history.m < spec.lead_required:
        raise InsufficientHistoryError(
            f"augmentation (nde={spec.nde}, nts={spec.nts}) needs {spec.lead_required} "
            f"history steps, got {history.m}"
        )
    seq = augmented_sequence(train, history, spec)
    return SnapshotPair(X=seq[:, :-1], Xp=seq[:, 1:], n=train.n, layout=spec.block_labels())
