"""Uniformly sampled multivariate records, standardization, and window extraction.

A record holds an ``n x m`` value matrix (one row per variable, one column per
time step), the sampling step ``dt``, variable names, and the number of steps
that make up one encounter wave.  All downstream window arithmetic is done in
integer steps; encounter-wave units are a presentation-layer conversion via
``steps_per_wave``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace

import numpy as np

from .errors import (
    CsvFormatError,
    NoValidWindowError,
    OutOfBoundsError,
    ZeroVarianceError,
)

# Relative tolerance for verifying uniform spacing of the CSV time column.
TIME_AXIS_RTOL = 1e-6


@dataclass(frozen=True)
class TimeSeries:
    """Immutable uniformly sampled record.

    ``values`` has shape ``(n, m)``.  Slices produced by window extraction may
    be shorter than two steps (an empty history, for instance); operations that
    need a minimum length enforce it themselves.
    """

    values: np.ndarray
    dt: float
    names: tuple[str, ...]
    steps_per_wave: int = 32

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 2:
            raise ValueError(f"values must be 2-D (n variables x m steps), got shape {values.shape}")
        if not np.all(np.isfinite(values)):
            raise ValueError("values must be finite")
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if self.steps_per_wave < 1:
            raise ValueError(f"steps_per_wave must be a positive integer, got {self.steps_per_wave}")
        names = tuple(str(s) for s in self.names)
        if len(names) != values.shape[0]:
            raise ValueError(f"{len(names)} names for {values.shape[0]} variables")
        if len(set(names)) != len(names):
            raise ValueError("variable names must be distinct")
        values = values.copy()
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "names", names)
        object.__setattr__(self, "dt", float(self.dt))
        object.__setattr__(self, "steps_per_wave", int(self.steps_per_wave))

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def m(self) -> int:
        return self.values.shape[1]

    @property
    def wave_period(self) -> float:
        """Duration of one encounter wave in seconds."""
        return self.steps_per_wave * self.dt

    def slice_steps(self, start: int, stop: int) -> "TimeSeries":
        if start < 0 or stop > self.m or start > stop:
            raise OutOfBoundsError(f"slice [{start}, {stop}) outside record of {self.m} steps")
        return replace(self, values=self.values[:, start:stop])


@dataclass(frozen=True)
class StandardizationRecord:
    """Per-variable affine transform: standardized = (x - mean) / std."""

    mean: np.ndarray
    std: np.ndarray

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=float).copy()
        std = np.asarray(self.std, dtype=float).copy()
        if mean.shape != std.shape or mean.ndim != 1:
            raise ValueError("mean and std must be 1-D arrays of equal length")
        if not np.all(std > 0):
            raise ValueError("std entries must be positive")
        mean.setflags(write=False)
        std.setflags(write=False)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "std", std)

    def apply(self, values: np.ndarray) -> np.ndarray:
        return (values - self.mean[:, None]) / self.std[:, None]

    def invert(self, values: np.ndarray) -> np.ndarray:
        return values * self.std[:, None] + self.mean[:, None]


@dataclass(frozen=True)
class WindowSpec:
    """One sampled evaluation window.

    ``start_index`` is the first training step; ``lead`` steps of history
    immediately precede it, ``niw`` input waves of training follow, and
    ``now`` output waves of test data follow the training segment.
    """

    start_index: int
    niw: int
    now: int
    lead: int = 0

    def __post_init__(self):
        if self.niw < 1 or self.now < 1:
            raise ValueError("niw and now must be positive")
        if self.lead < 0:
            raise ValueError("lead must be nonnegative")

    def train_range(self, steps_per_wave: int) -> tuple[int, int]:
        return self.start_index, self.start_index + self.niw * steps_per_wave

    def test_range(self, steps_per_wave: int) -> tuple[int, int]:
        end = self.start_index + (self.niw + self.now) * steps_per_wave
        return self.start_index + self.niw * steps_per_wave, end


def standardize(
    ts: TimeSeries, segment: tuple[int, int] | None = None
) -> tuple[TimeSeries, StandardizationRecord]:
    """Translate and scale every variable to zero mean, unit variance on ``segment``.

    Statistics are computed only on the given step range (population variance);
    the whole record, including steps outside the segment, is transformed with
    those statistics.  Raises :class:`ZeroVarianceError` naming the first
    constant variable.
    """
    if segment is None:
        segment = (0, ts.m)
    start, stop = segment
    if start < 0 or stop > ts.m or stop - start < 1:
        raise OutOfBoundsError(f"segment [{start}, {stop}) outside record of {ts.m} steps")
    seg = ts.values[:, start:stop]
    mean = seg.mean(axis=1)
    std = seg.std(axis=1)
    for i, s in enumerate(std):
        if not s > 0:
            raise ZeroVarianceError(ts.names[i])
    record = StandardizationRecord(mean=mean, std=std)
    return replace(ts, values=record.apply(ts.values)), record


def destandardize(ts: TimeSeries, record: StandardizationRecord) -> TimeSeries:
    return replace(ts, values=record.invert(ts.values))


def extract_window(
    ts: TimeSeries, w: WindowSpec
) -> tuple[TimeSeries, TimeSeries, TimeSeries]:
    """Split the record into (train, test, history) for one window.

    ``history`` holds the ``lead`` steps immediately preceding the training
    segment; train and test are contiguous and disjoint.
    """
    spw = ts.steps_per_wave
    t0, t1 = w.train_range(spw)
    _, t2 = w.test_range(spw)
    if t0 - w.lead < 0 or t2 > ts.m:
        raise OutOfBoundsError(
            f"window start={w.start_index} lead={w.lead} niw={w.niw} now={w.now} "
            f"needs steps [{t0 - w.lead}, {t2}) in a record of {ts.m} steps"
        )
    return ts.slice_steps(t0, t1), ts.slice_steps(t1, t2), ts.slice_steps(t0 - w.lead, t0)


def valid_start_range(ts: TimeSeries, niw: int, now: int, lead: int) -> tuple[int, int]:
    """Half-open range of feasible training-start indices."""
    last = ts.m - (niw + now) * ts.steps_per_wave
    return lead, last + 1


def sample_windows(
    ts: TimeSeries, niw: int, now: int, lead: int, count: int, seed: int
) -> list[WindowSpec]:
    """Draw ``count`` window starts uniformly (with replacement) over all valid values."""
    if count < 1:
        raise ValueError("count must be positive")
    lo, hi = valid_start_range(ts, niw, now, lead)
    if hi <= lo:
        raise NoValidWindowError(
            f"record of {ts.m} steps cannot fit lead={lead} plus "
            f"{(niw + now) * ts.steps_per_wave} window steps"
        )
    rng = np.random.default_rng(seed)
    starts = rng.integers(lo, hi, size=count)
    return [WindowSpec(start_index=int(s), niw=niw, now=now, lead=lead) for s in starts]


def read_csv(path) -> TimeSeries:
    """Load a record from CSV: header row, first column ``t`` in seconds, one
    column per variable.  Spacing of ``t`` must be uniform to relative
    tolerance ``TIME_AXIS_RTOL``."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise CsvFormatError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        if not header or header[0] != "t":
            raise CsvFormatError(f"{path}: first column must be named 't', got {header[:1]}")
        names = header[1:]
        if not names:
            raise CsvFormatError(f"{path}: no variable columns")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise CsvFormatError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
            try:
                rows.append([float(v) for v in row])
            except ValueError as exc:
                raise CsvFormatError(f"{path}:{lineno}: {exc}") from None
    if len(rows) < 2:
        raise CsvFormatError(f"{path}: need at least 2 rows, got {len(rows)}")
    data = np.asarray(rows, dtype=float)
    t = data[:, 0]
    dt = (t[-1] - t[0]) / (len(t) - 1)
    if not dt > 0:
        raise CsvFormatError(f"{path}: time column must be strictly increasing")
    steps = np.diff(t)
    bad = np.abs(steps - dt) > TIME_AXIS_RTOL * abs(dt)
    if np.any(bad):
        i = int(np.argmax(bad))
        raise CsvFormatError(
            f"{path}: non-uniform time spacing at row {i + 2}: "
            f"step {steps[i]:.9g} vs mean {dt:.9g}"
        )
    try:
        return TimeSeries(values=data[:, 1:].T, dt=float(dt), names=tuple(names))
    except ValueError as exc:
        raise CsvFormatError(f"{path}: {exc}") from None


def write_csv(ts: TimeSeries, path, t0: float = 0.0) -> None:
    """Write a record in the same layout :func:`read_csv` accepts."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", *ts.names])
        for j in range(ts.m):
            writer.writerow(
                [repr(float(t0 + j * ts.dt)), *(repr(float(v)) for v in ts.values[:, j])]
            )
