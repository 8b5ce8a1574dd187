"""Full-factorial assessment sweep over randomly sampled windows.

For every (NIW, NOW) pair a fresh batch of windows is sampled; within the
pair, all (NDE, NTS) augmentations share the same windows so comparisons are
paired.  Each window evaluation standardizes on the training segment, builds
the augmented snapshot pair, fits the operator, optionally clamps growing
modes, forecasts the test horizon, and scores all four metrics on the original
variables in standardized space.

The sweep uses a Gram-matrix fitting kernel that is numerically equivalent to
the library path (same operator, spectrum, and forecast) but shares work
across the augmentation grid: block Gram matrices are computed once per window
and each augmentation selects a submatrix.  Rank-deficient windows fall back
to the pseudo-inverse path.  Results are reduced in fixed window order, so
worker count never changes the report.
"""

from __future__ import annotations

import json
import os
from concurrent import futures
from dataclasses import dataclass, replace

import numpy as np
from scipy.linalg import lapack, solve_triangular

from .augmentation import AugmentationSpec
from .dmd import ZERO_EIGENVALUE_TOL, DmdModel, normalize_modes, continuous_frequencies
from .errors import (
    ConfigInfeasibleError,
    MissingCellError,
    ZeroVarianceError,
)
from .modal import ModeStatistics, aggregate, sort_modes
from .timeseries import StandardizationRecord, TimeSeries, sample_windows

METRIC_NAMES = ("nrmse", "pearson_r", "aam", "nammae")

# Reciprocal condition bound below which the Gram normal equations are not
# trusted and the pseudo-inverse fallback is used.
GRAM_RCOND_MIN = 1e-10


@dataclass(frozen=True)
class ExperimentConfig:
    """Factorial grids and sampling controls for one sweep."""

    niw_set: tuple[int, ...] = (1, 2, 4, 8)
    now_set: tuple[int, ...] = (1, 2, 4)
    nde_set: tuple[int, ...] = (0, 1, 2, 3, 4)
    nts_set: tuple[int, ...] = (0, 2, 4, 8, 16)
    samples: int = 1001
    seed: int = 0
    stabilize: bool = True
    steps_per_wave: int = 32

    def __post_init__(self):
        for name in ("niw_set", "now_set", "nde_set", "nts_set"):
            vals = tuple(int(v) for v in getattr(self, name))
            if not vals:
                raise ValueError(f"{name} must not be empty")
            if len(set(vals)) != len(vals):
                raise ValueError(f"{name} has duplicates: {vals}")
            object.__setattr__(self, name, vals)
        if any(v < 1 for v in self.niw_set + self.now_set):
            raise ValueError("niw and now values must be positive")
        if any(v < 0 for v in self.nde_set + self.nts_set):
            raise ValueError("nde and nts values must be nonnegative")
        for nde in self.nde_set:
            AugmentationSpec(nde=nde, nts=0)
        if self.samples < 1:
            raise ValueError("samples must be positive")
        if self.steps_per_wave < 2:
            raise ValueError("steps_per_wave must be at least 2")

    @property
    def pairs(self) -> list[tuple[int, int]]:
        return [(niw, now) for niw in self.niw_set for now in self.now_set]

    @property
    def combos(self) -> list[tuple[int, int]]:
        return [(nde, nts) for nde in self.nde_set for nts in self.nts_set]

    @property
    def max_lead(self) -> int:
        return max(
            AugmentationSpec(nde=nde, nts=nts).lead_required for nde, nts in self.combos
        )

    def pair_seed(self, niw: int, now: int) -> int:
        """Deterministic window-sampling seed for one (NIW, NOW) pair."""
        return int(np.random.SeedSequence((self.seed, niw, now)).generate_state(1)[0])

    def to_dict(self) -> dict:
        return {
            "niw_set": list(self.niw_set),
            "now_set": list(self.now_set),
            "nde_set": list(self.nde_set),
            "nts_set": list(self.nts_set),
            "samples": self.samples,
            "seed": self.seed,
            "stabilize": self.stabilize,
            "steps_per_wave": self.steps_per_wave,
        }


@dataclass(frozen=True)
class BoxSummary:
    """Five-number box summary with 1.5 IQR whiskers."""

    lo_whisker: float
    q1: float
    median: float
    q3: float
    hi_whisker: float
    outliers: tuple[float, ...]

    @classmethod
    def from_values(cls, values: np.ndarray) -> "BoxSummary":
        values = np.asarray(values, dtype=float)
        q1, med, q3 = np.percentile(values, [25.0, 50.0, 75.0])
        iqr = q3 - q1
        lo_fence = q1 - 1.5 * iqr
        hi_fence = q3 + 1.5 * iqr
        inside = values[(values >= lo_fence) & (values <= hi_fence)]
        out = values[(values < lo_fence) | (values > hi_fence)]
        return cls(
            lo_whisker=float(inside.min()),
            q1=float(q1),
            median=float(med),
            q3=float(q3),
            hi_whisker=float(inside.max()),
            outliers=tuple(sorted(float(v) for v in out)),
        )

    def to_dict(self) -> dict:
        return {
            "lo_whisker": self.lo_whisker,
            "q1": self.q1,
            "median": self.median,
            "q3": self.q3,
            "hi_whisker": self.hi_whisker,
            "outliers": list(self.outliers),
        }


@dataclass(frozen=True)
class CellResult:
    """Metric distributions of one grid cell."""

    niw: int
    now: int
    nde: int
    nts: int
    evaluated: int
    failed: int
    metrics: dict[str, BoxSummary]
    values: dict[str, np.ndarray]

    @property
    def key(self) -> tuple[int, int, int, int]:
        return (self.niw, self.now, self.nde, self.nts)

    def to_dict(self) -> dict:
        return {
            "niw": self.niw,
            "now": self.now,
            "nde": self.nde,
            "nts": self.nts,
            "evaluated": self.evaluated,
            "failed": self.failed,
            "metrics": {k: v.to_dict() for k, v in self.metrics.items()},
        }


@dataclass(frozen=True)
class ModalSelection:
    """Aggregated mode statistics of one selected configuration."""

    label: str
    niw: int
    now: int
    nde: int
    nts: int
    realizations: int
    failed: int
    layout: tuple[str, ...]
    stats: ModeStatistics

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "niw": self.niw,
            "now": self.now,
            "nde": self.nde,
            "nts": self.nts,
            "realizations": self.realizations,
            "failed": self.failed,
            "layout": list(self.layout),
            "stats": self.stats.to_dict(),
        }


@dataclass(frozen=True)
class ExperimentReport:
    """Distributions for every grid cell plus best-setup and modal tables."""

    config: ExperimentConfig
    record_info: dict
    cells: dict[tuple[int, int, int, int], CellResult]
    best: dict[tuple[int, int], tuple[int, int] | None]
    modal: dict[str, ModalSelection]

    def cell(self, niw: int, now: int, nde: int, nts: int) -> CellResult:
        key = (niw, now, nde, nts)
        if key not in self.cells:
            raise MissingCellError(f"no cell {key} in report")
        return self.cells[key]

    def to_dict(self) -> dict:
        return {
            "format": "wavedmd-report",
            "version": 1,
            "config": self.config.to_dict(),
            "record": self.record_info,
            "cells": [self.cells[k].to_dict() for k in sorted(self.cells)],
            "best": [
                {"niw": niw, "now": now, "nde": v[0] if v else None, "nts": v[1] if v else None}
                for (niw, now), v in sorted(self.best.items())
            ],
            "modal": {k: v.to_dict() for k, v in sorted(self.modal.items())},
        }

    def to_json_bytes(self) -> bytes:
        return (json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":")) + "\n").encode()


def best_setup(report: ExperimentReport, niw: int, now: int) -> tuple[int, int]:
    """Augmentation with the lowest median NRMSE in the (niw, now) cell;
    ties prefer fewer derivatives, then fewer shifts."""
    if (niw, now) not in report.best:
        raise MissingCellError(f"no ({niw}, {now}) cell in report")
    value = report.best[(niw, now)]
    if value is None:
        raise MissingCellError(f"all configurations failed for ({niw}, {now})")
    return value


# ---------------------------------------------------------------------------
# Window evaluation kernel
# ---------------------------------------------------------------------------


def _derivative_stencil(values: np.ndarray, dt: float) -> np.ndarray:
    return (3.0 * values[:, 2:] - 4.0 * values[:, 1:-1] + values[:, :-2]) / (2.0 * dt)


class _WindowPlan:
    """Precomputed row indices and block structure shared by all windows of
    one (NIW, NOW) pair."""

    def __init__(self, n: int, combos: list[tuple[int, int]]):
        self.n = n
        self.max_nde = max(nde for nde, _ in combos)
        self.max_nts = max(nts for _, nts in combos)
        self.lead = max(
            AugmentationSpec(nde=nde, nts=nts).lead_required for nde, nts in combos
        )
        self.n_blocks = 1 + self.max_nde + self.max_nts
        self.rows_total = n * self.n_blocks
        self.combos = combos
        self.combo_rows = []
        for nde, nts in combos:
            head = np.arange(n * (1 + nde))
            tail = np.arange(n * (1 + self.max_nde), n * (1 + self.max_nde) + n * nts)
            self.combo_rows.append(np.concatenate([head, tail]))
        # The backward-difference block of order i is an exact stencil
        # combination of the state and shifts 1..2i, so with nts >= 2i it adds
        # nothing to the least-squares fit: the full operator is a lift of the
        # reduced one with identical state forecasts.  Cells that reduce to
        # the same row set share one evaluation.
        groups: dict[tuple, list[int]] = {}
        order: list[tuple] = []
        for ci, (nde, nts) in enumerate(combos):
            kept = tuple(i for i in range(1, nde + 1) if 2 * i > nts)
            key = (kept, nts)
            if key not in groups:
                groups[key] = []
                order.append(key)
            groups[key].append(ci)
        self.problems = []
        for key in order:
            kept, nts = key
            blocks = [np.arange(n)]
            blocks += [np.arange(n * i, n * (i + 1)) for i in kept]
            base = n * (1 + self.max_nde)
            blocks.append(np.arange(base, base + n * nts))
            self.problems.append((np.concatenate(blocks), groups[key]))


def _build_augmented(values, start, q, lead, plan: _WindowPlan, dt):
    """Standardize on the training segment and stack all blocks once."""
    n = plan.n
    train = values[:, start:start + q]
    mean = train.mean(axis=1)
    std = train.std(axis=1)
    if not np.all(std > 0):
        raise ZeroVarianceError(str(int(np.argmin(std))))
    ext = (values[:, start - lead:start + q] - mean[:, None]) / std[:, None]
    Z = np.empty((plan.rows_total, q))
    Z[:n] = ext[:, lead:]
    work = ext
    for i in range(1, plan.max_nde + 1):
        work = _derivative_stencil(work, dt)
        Z[n * i:n * (i + 1)] = work[:, lead - 2 * i:lead - 2 * i + q]
    for s in range(1, plan.max_nts + 1):
        base = n * (1 + plan.max_nde) + n * (s - 1)
        Z[base:base + n] = ext[:, lead - s:lead - s + q]
    return Z, mean, std


class _WindowFactors:
    """Snapshot factorizations for one window.

    For augmentations with no more rows than snapshot columns the operator is
    the unique Frobenius minimizer; it is computed from Gram submatrices of
    the row-equilibrated data (an exact diagonal similarity), shared across
    the augmentation grid.  Row-deficient cases (more rows than columns) keep
    the original row scaling, because the minimum-norm operator of the
    pseudo-inverse is not scale-covariant there.
    """

    def __init__(self, Z: np.ndarray, n: int):
        self.n = n
        self.Z = Z
        norms = np.sqrt(np.einsum("ij,ij->i", Z, Z))
        self.scale = 1.0 / np.maximum(norms, 1e-300)
        self.Zs = Z * self.scale[:, None]
        self.q = Z.shape[1]
        self.X = self.Zs[:, :-1]
        self.Xp = self.Zs[:, 1:]
        self.x0 = self.Zs[:, -1]
        self.G_big = self.X @ self.X.T
        self.N_big = self.Xp @ self.X.T


def _chol_solve(G: np.ndarray, rhs: np.ndarray):
    """Cholesky solve with a reciprocal-condition guard; None when the Gram
    matrix is not safely positive definite."""
    anorm = np.abs(G).sum(axis=0).max()
    c, info = lapack.dpotrf(G, lower=0, overwrite_a=0)
    if info != 0:
        return None
    rcond, info = lapack.dpocon(c, anorm)
    if info != 0 or rcond < GRAM_RCOND_MIN:
        return None
    x, info = lapack.dpotrs(c, rhs, lower=0)
    if info != 0:
        return None
    return x


# Relative bound on the triangular factor's diagonal below which the QR path
# declares rank deficiency and defers to the pseudo-inverse fallback.  Sits
# just above the pseudo-inverse truncation threshold max(p, q) * eps, so the
# QR path never handles a system the fallback would rank-truncate.
QR_RANK_RTOL = 1e-13


def _finish_direct(fac: _WindowFactors, rows: np.ndarray, A: np.ndarray):
    lam, V = np.linalg.eig(A)
    try:
        b = np.linalg.solve(V, fac.x0[rows].astype(complex))
    except np.linalg.LinAlgError:
        b, _, _, _ = np.linalg.lstsq(V, fac.x0[rows].astype(complex), rcond=None)
    return lam, V[: fac.n], b, fac.scale[: fac.n]


def _eig_direct(fac: _WindowFactors, rows: np.ndarray):
    """Spectrum of A = Xp X^+ for p <= cols, on the equilibrated data (an
    exact diagonal similarity for the unique minimizer).

    The Gram normal equations shared across the augmentation grid are used
    when safely conditioned; otherwise a Householder QR of the data handles
    the near-collinear delay blocks at full accuracy.
    """
    G = fac.G_big[np.ix_(rows, rows)]
    N = fac.N_big[np.ix_(rows, rows)]
    at = _chol_solve(G, N.T)
    if at is not None:
        return _finish_direct(fac, rows, at.T)
    Q, R = np.linalg.qr(fac.X[rows].T)
    diag = np.abs(np.diag(R))
    if diag.size == 0 or diag.min() <= QR_RANK_RTOL * diag.max():
        return None
    # A = Xp Q R^-T from X^T = Q R.
    at = solve_triangular(R, (fac.Xp[rows] @ Q).T, lower=False, check_finite=False)
    return _finish_direct(fac, rows, at.T)


def _eig_tall(fac: _WindowFactors, rows: np.ndarray):
    """Nonzero spectrum of A = Xp X^+ for p > cols from the cols x cols
    operator B = X^+ Xp, with the same singular-value truncation as the
    pseudo-inverse path.

    The omitted modes have exactly zero eigenvalue and never contribute to
    forecasts; amplitudes are the projection of the last snapshot onto the
    retained data subspace (the full pseudo-inverse coordinates).
    """
    X = fac.Z[rows, :-1]
    Xp = fac.Z[rows, 1:]
    p, cols = X.shape
    u, s, vt = np.linalg.svd(X, full_matrices=False)
    if s.size == 0 or not s[0] > 0:
        return None
    cutoff = max(p, cols + 1) * np.finfo(float).eps * s[0]
    rank = int(np.count_nonzero(s > cutoff))
    if rank == 0:
        return None
    ut_xp = u[:, :rank].T @ Xp
    B = (vt[:rank].T * (1.0 / s[:rank])) @ ut_xp
    lam, W = np.linalg.eig(B)
    keep = np.abs(lam) >= ZERO_EIGENVALUE_TOL
    b = np.zeros(lam.shape, dtype=complex)
    if np.any(keep):
        proj = ut_xp.astype(complex) @ W[:, keep]
        sol, _, _, _ = np.linalg.lstsq(proj, ut_xp[:, -1].astype(complex), rcond=None)
        b[keep] = sol
    Vtop = Xp[: fac.n] @ W
    return lam, Vtop, b, None


def _eig_fallback(fac: _WindowFactors, rows: np.ndarray):
    """Pseudo-inverse path for rank-deficient windows (library semantics)."""
    X = fac.Z[rows, :-1]
    Xp = fac.Z[rows, 1:]
    p, cols = X.shape
    rcond = max(p, cols + 1) * np.finfo(float).eps
    at, _, rank, _ = np.linalg.lstsq(X.T, Xp.T, rcond=rcond)
    if rank == 0:
        return None
    try:
        lam, V = np.linalg.eig(at.T)
    except np.linalg.LinAlgError:
        return None
    b, _, _, _ = np.linalg.lstsq(V, fac.Z[rows, -1].astype(complex), rcond=None)
    return lam, V[: fac.n], b, None


def _forecast_top(lam, Vtop, b, horizon, state_scale):
    """Re(phi_k b_k lambda_k^j) over the state block, in standardized units.

    ``state_scale`` is the equilibration factor of the state rows when the
    eigenpairs came from scaled data, None otherwise.
    """
    k = lam.shape[0]
    powers = np.broadcast_to(lam[:, None], (k, horizon))
    powers = np.cumprod(powers, axis=1)
    pred = (Vtop @ (b[:, None] * powers)).real
    if state_scale is not None:
        pred = pred / state_scale[:, None]
    return pred


def _metrics4(pred: np.ndarray, meas: np.ndarray):
    """The four averaged metrics; None when a metric is undefined."""
    stdm = meas.std(axis=1)
    if not np.all(stdm > 0):
        return None
    err = pred - meas
    nr = np.mean(np.sqrt(np.mean(err * err, axis=1)) / stdm)
    dx = pred - pred.mean(axis=1, keepdims=True)
    dy = meas - meas.mean(axis=1, keepdims=True)
    sx = np.sqrt(np.einsum("ij,ij->i", dx, dx))
    sy = np.sqrt(np.einsum("ij,ij->i", dy, dy))
    if not np.all(sx > 0):
        return None
    r = np.mean(np.einsum("ij,ij->i", dx, dy) / (sx * sy))
    d2 = pred * pred + meas * meas
    d = np.sqrt(d2)
    wsum = d.sum(axis=1)
    if not np.all(wsum > 0):
        return None
    with np.errstate(invalid="ignore", divide="ignore"):
        ratio = np.where(d > 0, np.abs(pred + meas) / np.sqrt(2.0 * d2), 1.0)
    alpha = np.arccos(np.clip(ratio, 0.0, 1.0))
    aam_v = np.mean(1.0 - (4.0 / np.pi) * np.einsum("ij,ij->i", d, alpha) / wsum)
    na = np.mean(
        (np.abs(pred.min(axis=1) - meas.min(axis=1)) + np.abs(pred.max(axis=1) - meas.max(axis=1)))
        / (2.0 * stdm)
    )
    out = (float(nr), float(r), float(aam_v), float(na))
    if not all(np.isfinite(v) for v in out):
        return None
    return out


def _evaluate_window(values, dt, start, q, horizon, plan: _WindowPlan, stabilize_flag):
    """Metrics of every augmentation on one window.

    Returns (metrics array (n_combos, 4), failed mask).  Failures never
    propagate; they are counted per configuration.
    """
    n_combos = len(plan.combos)
    out = np.full((n_combos, 4), np.nan)
    failed = np.ones(n_combos, dtype=bool)
    try:
        Z, mean, std = _build_augmented(values, start, q, plan.lead, plan, dt)
    except ZeroVarianceError:
        return out, failed
    meas = (values[:, start + q:start + q + horizon] - mean[:, None]) / std[:, None]
    cols = q - 1
    fac = _WindowFactors(Z, plan.n)

    def evaluate_rows(res):
        if res is None:
            return None
        lam, Vtop, b, state_scale = res
        if stabilize_flag:
            mag = np.abs(lam)
            grow = mag > 1.0
            if np.any(grow):
                lam = lam.copy()
                lam[grow] = lam[grow] / mag[grow]
        return _metrics4(_forecast_top(lam, Vtop, b, horizon, state_scale), meas)

    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        for rows, aliases in plan.problems:
            if rows.size <= cols:
                # The lift of the reduced fit equals the full fit only when
                # the reduced problem has full row rank, which the direct
                # path's guards certify.
                res = _eig_direct(fac, rows)
                if res is not None:
                    metrics = evaluate_rows(res)
                    if metrics is not None:
                        for ci in aliases:
                            out[ci] = metrics
                            failed[ci] = False
                    continue
            for ci in aliases:
                full_rows = plan.combo_rows[ci]
                res = _eig_tall(fac, full_rows) if full_rows.size > cols else None
                if res is None:
                    res = _eig_fallback(fac, full_rows)
                metrics = evaluate_rows(res)
                if metrics is not None:
                    out[ci] = metrics
                    failed[ci] = False
    return out, failed


def _fit_window_model(
    values,
    dt,
    start,
    q,
    spec: AugmentationSpec,
    names,
    steps_per_wave,
    stabilize_flag,
) -> DmdModel:
    """Full model (all mode slots, unit-norm phase-fixed eigenvectors) for the
    modal pass, via the same equilibrated Gram kernel."""
    combos = [(spec.nde, spec.nts)]
    plan = _WindowPlan(len(names), combos)
    Z, mean, std = _build_augmented(values, start, q, spec.lead_required, plan, dt)
    cols = q - 1
    p = Z.shape[0]
    fac = _WindowFactors(Z, plan.n)
    lam = None
    raw_modes = None
    if p <= cols:
        at = _chol_solve(fac.G_big, fac.N_big.T)
        if at is None:
            Q, R = np.linalg.qr(fac.X.T)
            diag = np.abs(np.diag(R))
            if diag.size and diag.min() > QR_RANK_RTOL * diag.max():
                at = solve_triangular(R, (fac.Xp @ Q).T, lower=False, check_finite=False)
        if at is not None:
            lam, modes_scaled = np.linalg.eig(at.T)
            # Undo the row equilibration (a diagonal similarity).
            raw_modes = modes_scaled / fac.scale[:, None]
    else:
        X = Z[:, :-1]
        Xp = Z[:, 1:]
        Qf, Rf = np.linalg.qr(X, mode="complete")
        R = Rf[:cols]
        diag = np.abs(np.diag(R))
        if diag.min() > QR_RANK_RTOL * diag.max():
            B = solve_triangular(R, Qf[:, :cols].T @ Xp, lower=False, check_finite=False)
            lam_act, W = np.linalg.eig(B)
            # Orthonormal complement of range(X): exact zero eigenvectors.
            lam = np.concatenate([lam_act, np.zeros(p - cols, dtype=complex)])
            raw_modes = np.hstack([Xp @ W, Qf[:, cols:].astype(complex)])
    if lam is None:
        X = Z[:, :-1]
        Xp = Z[:, 1:]
        rcond = max(p, q) * np.finfo(float).eps
        at, _, rank, _ = np.linalg.lstsq(X.T, Xp.T, rcond=rcond)
        lam, raw_modes = np.linalg.eig(at.T)
    lam = lam.astype(complex)
    modes = normalize_modes(raw_modes)
    x0 = Z[:, -1]
    try:
        b = np.linalg.solve(modes, x0.astype(complex))
    except np.linalg.LinAlgError:
        b, _, _, _ = np.linalg.lstsq(modes, x0.astype(complex), rcond=None)
    model = DmdModel(
        eigenvalues=lam,
        modes=modes,
        omegas=continuous_frequencies(lam, dt),
        amplitudes=b,
        dt=dt,
        n=plan.n,
        names=tuple(names),
        layout=spec.block_labels(),
        standardization=StandardizationRecord(mean=mean, std=std),
        stabilized=np.zeros(p, dtype=bool),
        excluded=np.abs(lam) < ZERO_EIGENVALUE_TOL,
        x0=x0,
        steps_per_wave=steps_per_wave,
        train_end=start + q,
    )
    if stabilize_flag:
        from .dmd import stabilize as _stab

        model = _stab(model)
    return sort_modes(model)


# ---------------------------------------------------------------------------
# Parallel driver
# ---------------------------------------------------------------------------

_WORKER = {}


def _init_worker(values, dt, stabilize_flag, combos, n):
    try:
        from threadpoolctl import threadpool_limits

        threadpool_limits(1)
    except ImportError:
        pass
    _WORKER["values"] = values
    _WORKER["dt"] = dt
    _WORKER["stabilize"] = stabilize_flag
    _WORKER["plan"] = _WindowPlan(n, combos)


def _run_batch(args):
    pair_idx, starts, q, horizon = args
    plan = _WORKER["plan"]
    metrics = np.empty((len(starts), len(plan.combos), 4))
    failed = np.empty((len(starts), len(plan.combos)), dtype=bool)
    for i, start in enumerate(starts):
        metrics[i], failed[i] = _evaluate_window(
            _WORKER["values"], _WORKER["dt"], start, q, horizon, plan, _WORKER["stabilize"]
        )
    return pair_idx, starts, metrics, failed


def run(
    ts: TimeSeries,
    cfg: ExperimentConfig,
    jobs: int = 1,
    with_modal: bool = True,
) -> ExperimentReport:
    """Run the full-factorial sweep and assemble the report.

    Identical (record, config) inputs give bitwise-identical reports,
    independent of ``jobs``.
    """
    spw = cfg.steps_per_wave
    if ts.steps_per_wave != spw:
        ts = replace(ts, steps_per_wave=spw)
    combos = cfg.combos
    lead = cfg.max_lead
    largest = lead + (max(cfg.niw_set) + max(cfg.now_set)) * spw
    if ts.m < largest:
        raise ConfigInfeasibleError(
            f"record of {ts.m} steps cannot fit the largest window of {largest} steps"
        )

    pairs = cfg.pairs
    pair_windows = {}
    for niw, now in pairs:
        windows = sample_windows(ts, niw, now, lead, cfg.samples, cfg.pair_seed(niw, now))
        pair_windows[(niw, now)] = np.asarray([w.start_index for w in windows])

    batches = []
    batch_size = 16
    for pi, (niw, now) in enumerate(pairs):
        starts = pair_windows[(niw, now)]
        q = niw * spw
        horizon = now * spw
        for lo in range(0, len(starts), batch_size):
            batches.append((pi, starts[lo:lo + batch_size], q, horizon))

    acc_metrics = {
        pi: np.full((cfg.samples, len(combos), 4), np.nan) for pi in range(len(pairs))
    }
    acc_failed = {pi: np.ones((cfg.samples, len(combos)), dtype=bool) for pi in range(len(pairs))}
    offsets = {pi: 0 for pi in range(len(pairs))}

    def _store(pair_idx, starts, metrics, failed):
        lo = offsets[pair_idx]
        acc_metrics[pair_idx][lo:lo + len(starts)] = metrics
        acc_failed[pair_idx][lo:lo + len(starts)] = failed
        offsets[pair_idx] = lo + len(starts)

    init_args = (ts.values, ts.dt, cfg.stabilize, combos, ts.n)
    if jobs is None:
        jobs = os.cpu_count() or 1
    if jobs <= 1:
        _init_worker(*init_args)
        for batch in batches:
            _store(*_run_batch(batch))
    else:
        with futures.ProcessPoolExecutor(
            max_workers=jobs, initializer=_init_worker, initargs=init_args
        ) as pool:
            # Map preserves submission order, so reduction order is fixed.
            for pair_idx, starts, metrics, failed in pool.map(_run_batch, batches, chunksize=4):
                _store(pair_idx, starts, metrics, failed)

    cells = {}
    best: dict[tuple[int, int], tuple[int, int] | None] = {}
    for pi, (niw, now) in enumerate(pairs):
        metrics_all = acc_metrics[pi]
        failed_all = acc_failed[pi]
        best_key = None
        for ci, (nde, nts) in enumerate(combos):
            ok = ~failed_all[:, ci]
            evaluated = int(np.count_nonzero(ok))
            values = {
                name: metrics_all[ok, ci, mi].copy() for mi, name in enumerate(METRIC_NAMES)
            }
            summaries = (
                {name: BoxSummary.from_values(values[name]) for name in METRIC_NAMES}
                if evaluated
                else {}
            )
            cells[(niw, now, nde, nts)] = CellResult(
                niw=niw,
                now=now,
                nde=nde,
                nts=nts,
                evaluated=evaluated,
                failed=cfg.samples - evaluated,
                metrics=summaries,
                values=values,
            )
            if evaluated:
                key = (summaries["nrmse"].median, nde, nts)
                if best_key is None or key < best_key:
                    best_key = key
        best[(niw, now)] = (best_key[1], best_key[2]) if best_key is not None else None

    modal: dict[str, ModalSelection] = {}
    if with_modal:
        modal = _modal_selections(ts, cfg, cells, pair_windows)

    record_info = {
        "n": ts.n,
        "m": ts.m,
        "dt": ts.dt,
        "names": list(ts.names),
        "steps_per_wave": ts.steps_per_wave,
    }
    return ExperimentReport(
        config=cfg, record_info=record_info, cells=cells, best=best, modal=modal
    )


def _modal_selections(ts, cfg, cells, pair_windows) -> dict[str, ModalSelection]:
    """Aggregate mode statistics for the plain and best augmented setups at
    the longest forecast horizon."""
    now = max(cfg.now_set)
    selections = {}
    plain = [
        c for c in cells.values() if c.now == now and c.nde == 0 and c.nts == 0 and c.evaluated
    ]
    if plain:
        c = min(plain, key=lambda c: (c.metrics["nrmse"].median, c.niw))
        selections["dmd"] = (c.niw, c.now, 0, 0)
    augmented = [
        c
        for c in cells.values()
        if c.now == now and (c.nde, c.nts) != (0, 0) and c.evaluated
    ]
    if augmented:
        c = min(augmented, key=lambda c: (c.metrics["nrmse"].median, c.niw, c.nde, c.nts))
        selections["admd"] = (c.niw, c.now, c.nde, c.nts)

    out = {}
    for label, (niw, sel_now, nde, nts) in selections.items():
        spec = AugmentationSpec(nde=nde, nts=nts)
        starts = pair_windows[(niw, sel_now)]
        q = niw * cfg.steps_per_wave
        models = []
        failures = 0
        for start in starts:
            try:
                models.append(
                    _fit_window_model(
                        ts.values, ts.dt, int(start), q, spec, ts.names,
                        cfg.steps_per_wave, cfg.stabilize,
                    )
                )
            except Exception:
                failures += 1
        if not models:
            continue
        out[label] = ModalSelection(
            label=label,
            niw=niw,
            now=sel_now,
            nde=nde,
            nts=nts,
            realizations=len(models),
            failed=failures,
            layout=spec.block_labels(),
            stats=aggregate(models),
        )
    return out
