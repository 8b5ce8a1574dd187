"""Variable-averaged forecast-accuracy metrics.

All four metrics compare an ``n x m`` prediction against a measured test
segment of the same shape and average the per-variable values.  NRMSE and
NAMMAE normalize by the measured population standard deviation; Pearson uses
the standard product-moment form; AAM weights per-step angular mismatch by
the point's distance from the origin.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import AllZeroError, ZeroVarianceError


def _check_shapes(pred: np.ndarray, meas: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    pred = np.asarray(pred, dtype=float)
    meas = np.asarray(meas, dtype=float)
    if pred.ndim == 1:
        pred = pred[None, :]
    if meas.ndim == 1:
        meas = meas[None, :]
    if pred.shape != meas.shape:
        raise ValueError(f"shapes differ: {pred.shape} vs {meas.shape}")
    if pred.shape[1] == 0:
        raise ValueError("empty series")
    return pred, meas


def _meas_std(meas: np.ndarray) -> np.ndarray:
    std = meas.std(axis=1)
    for i, s in enumerate(std):
        if not s > 0:
            raise ZeroVarianceError(str(i), f"measured variable {i} is constant")
    return std


def nrmse_per_variable(pred: np.ndarray, meas: np.ndarray) -> np.ndarray:
    pred, meas = _check_shapes(pred, meas)
    std = _meas_std(meas)
    rmse = np.sqrt(np.mean((pred - meas) ** 2, axis=1))
    return rmse / std


def nrmse(pred: np.ndarray, meas: np.ndarray) -> float:
    """Root mean square error normalized by the measured standard deviation,
    averaged over variables."""
    return float(np.mean(nrmse_per_variable(pred, meas)))


def pearson_per_variable(pred: np.ndarray, meas: np.ndarray) -> np.ndarray:
    pred, meas = _check_shapes(pred, meas)
    dx = pred - pred.mean(axis=1, keepdims=True)
    dy = meas - meas.mean(axis=1, keepdims=True)
    sx = np.sqrt(np.sum(dx * dx, axis=1))
    sy = np.sqrt(np.sum(dy * dy, axis=1))
    for i in range(len(sx)):
        if not (sx[i] > 0 and sy[i] > 0):
            raise ZeroVarianceError(str(i), f"variable {i} is constant")
    return np.sum(dx * dy, axis=1) / (sx * sy)


def pearson(pred: np.ndarray, meas: np.ndarray) -> float:
    """Pearson product-moment correlation, averaged over variables."""
    return float(np.mean(pearson_per_variable(pred, meas)))


def aam_per_variable(pred: np.ndarray, meas: np.ndarray) -> np.ndarray:
    pred, meas = _check_shapes(pred, meas)
    d2 = pred * pred + meas * meas
    d = np.sqrt(d2)
    weight_sums = d.sum(axis=1)
    for i, w in enumerate(weight_sums):
        if not w > 0:
            raise AllZeroError(f"variable {i}: predicted and measured both identically zero")
    # |x+y| / (sqrt(2) d) computed as |x+y| / sqrt(2 d^2) so equal series give
    # an argument of exactly 1 (arccos is infinitely sensitive there).
    with np.errstate(invalid="ignore", divide="ignore"):
        ratio = np.abs(pred + meas) / np.sqrt(2.0 * d2)
    # d = 0 makes the ratio undefined but carries zero weight anyway.
    ratio = np.where(d > 0, ratio, 1.0)
    alpha = np.arccos(np.clip(ratio, 0.0, 1.0))
    return 1.0 - (4.0 / np.pi) * np.sum(d * np.abs(alpha), axis=1) / weight_sums


def aam(pred: np.ndarray, meas: np.ndarray) -> float:
    """Average angle measure: 1 for perfect agreement, -1 for sign-flipped."""
    return float(np.mean(aam_per_variable(pred, meas)))


def nammae_per_variable(pred: np.ndarray, meas: np.ndarray) -> np.ndarray:
    pred, meas = _check_shapes(pred, meas)
    std = _meas_std(meas)
    dmin = np.abs(pred.min(axis=1) - meas.min(axis=1))
    dmax = np.abs(pred.max(axis=1) - meas.max(axis=1))
    return (dmin + dmax) / (2.0 * std)


def nammae(pred: np.ndarray, meas: np.ndarray) -> float:
    """Normalized average minimum/maximum absolute error (extrema mismatch)."""
    return float(np.mean(nammae_per_variable(pred, meas)))


@dataclass(frozen=True)
class MetricReport:
    """The four averaged metrics plus their per-variable values."""

    nrmse: float
    pearson_r: float
    aam: float
    nammae: float
    per_variable: dict[str, np.ndarray]

    def to_dict(self) -> dict:
        return {
            "nrmse": self.nrmse,
            "pearson_r": self.pearson_r,
            "aam": self.aam,
            "nammae": self.nammae,
            "per_variable": {k: v.tolist() for k, v in self.per_variable.items()},
        }


def evaluate(pred: np.ndarray, meas: np.ndarray) -> MetricReport:
    per = {
        "nrmse": nrmse_per_variable(pred, meas),
        "pearson_r": pearson_per_variable(pred, meas),
        "aam": aam_per_variable(pred, meas),
        "nammae": nammae_per_variable(pred, meas),
    }
    return MetricReport(
        nrmse=float(np.mean(per["nrmse"])),
        pearson_r=float(np.mean(per["pearson_r"])),
        aam=float(np.mean(per["aam"])),
        nammae=float(np.mean(per["nammae"])),
        per_variable=per,
    )
