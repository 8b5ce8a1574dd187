"""Linear operator fit, eigenpairs, spectrum stabilization, and forecasting.

The operator is fit directly from the full pseudo-inverse of the snapshot
matrix (no rank truncation beyond the numerical threshold).  Forecasts use the
modal expansion restricted to the original-state block; an iterated-map path
is provided as an independent cross-check.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace

import numpy as np

from .augmentation import SnapshotPair
from .errors import (
    DegenerateDataError,
    DimensionMismatchError,
    EigFailureError,
    ModelFormatError,
)
from .timeseries import StandardizationRecord

#: Eigenvalues below this magnitude have no finite logarithm; the mode is
#: flagged and excluded from forecasting.
ZERO_EIGENVALUE_TOL = 1e-14


@dataclass(frozen=True)
class DmdModel:
    """Fitted operator spectrum plus the context needed to forecast.

    ``modes`` holds unit-norm eigenvectors as columns, phase-fixed so each
    vector's largest-magnitude component is real positive.  ``omegas`` are the
    continuous frequencies ln(lambda)/dt on the principal branch; zero
    eigenvalues carry a real part of -inf and are excluded from forecasts.
    ``x0`` is the augmented snapshot at the end of the training window, in
    standardized units, and ``train_end`` its absolute step index + 1 in the
    source record.
    """

    eigenvalues: np.ndarray
    modes: np.ndarray
    omegas: np.ndarray
    amplitudes: np.ndarray
    dt: float
    n: int
    names: tuple[str, ...]
    layout: tuple[str, ...]
    standardization: StandardizationRecord
    stabilized: np.ndarray
    excluded: np.ndarray
    x0: np.ndarray
    steps_per_wave: int = 32
    train_end: int = 0

    @property
    def dim(self) -> int:
        return self.modes.shape[0]

    @property
    def n_excluded(self) -> int:
        return int(np.count_nonzero(self.excluded))


def fit(pair: SnapshotPair, dt: float) -> np.ndarray:
    """Best-fit operator A minimizing ||Xp - A X||_F via the Moore-Penrose
    pseudo-inverse, with singular values below max(p, q) * eps * sigma_max
    treated as zero."""
    if pair.X.size == 0:
        raise DegenerateDataError("empty snapshot pair")
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    p, cols = pair.X.shape
    rcond = max(p, cols + 1) * np.finfo(float).eps
    # lstsq(X^T, Xp^T) returns the minimum-norm solution of A X = Xp row by row.
    at, _, rank, _ = np.linalg.lstsq(pair.X.T, pair.Xp.T, rcond=rcond)
    if rank == 0:
        raise DegenerateDataError("all singular values below rank threshold")
    return at.T


def normalize_modes(modes: np.ndarray) -> np.ndarray:
    """Unit 2-norm columns, phase rotated so the largest-magnitude component
    of each vector is real positive."""
    modes = np.array(modes, dtype=complex)
    for k in range(modes.shape[1]):
        v = modes[:, k]
        norm = np.linalg.norm(v)
        if norm > 0:
            v = v / norm
        j = int(np.argmax(np.abs(v)))
        pivot = v[j]
        if np.abs(pivot) > 0:
            v = v * (np.conj(pivot) / np.abs(pivot))
        modes[:, k] = v
    return modes


def continuous_frequencies(eigenvalues: np.ndarray, dt: float) -> np.ndarray:
    """omega = ln(lambda)/dt on the principal branch; -inf real part for
    eigenvalues with no finite logarithm."""
    eigenvalues = np.asarray(eigenvalues, dtype=complex)
    omegas = np.empty(eigenvalues.shape, dtype=complex)
    zero = np.abs(eigenvalues) < ZERO_EIGENVALUE_TOL
    omegas[zero] = complex(-np.inf, 0.0)
    omegas[~zero] = np.log(eigenvalues[~zero]) / dt
    return omegas


def eigendecompose(A: np.ndarray, dt: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Eigenvalues, unit-norm phase-fixed eigenvectors, and continuous
    frequencies of the fitted operator."""
    A = np.asarray(A)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"A must be square, got shape {A.shape}")
    try:
        eigenvalues, modes = np.linalg.eig(A)
    except np.linalg.LinAlgError as exc:
        raise EigFailureError(str(exc)) from exc
    eigenvalues = eigenvalues.astype(complex)
    return eigenvalues, normalize_modes(modes), continuous_frequencies(eigenvalues, dt)


def amplitudes(model: DmdModel, x0: np.ndarray) -> np.ndarray:
    """Modal coordinates of ``x0`` in the eigenvector basis: the minimum-norm
    least-squares solution of modes @ b = x0."""
    x0 = np.asarray(x0, dtype=complex)
    if x0.shape != (model.dim,):
        raise DimensionMismatchError(f"x0 has shape {x0.shape}, expected ({model.dim},)")
    b, _, _, _ = np.linalg.lstsq(model.modes, x0, rcond=None)
    return b


def fit_model(
    pair: SnapshotPair,
    dt: float,
    standardization: StandardizationRecord,
    names: tuple[str, ...],
    steps_per_wave: int = 32,
    train_end: int = 0,
) -> DmdModel:
    """Fit, decompose, and package a model; amplitudes are taken against the
    last training snapshot."""
    A = fit(pair, dt)
    eigenvalues, modes, omegas = eigendecompose(A, dt)
    x0 = pair.x_last.astype(float)
    excluded = np.abs(eigenvalues) < ZERO_EIGENVALUE_TOL
    model = DmdModel(
        eigenvalues=eigenvalues,
        modes=modes,
        omegas=omegas,
        amplitudes=np.zeros(len(eigenvalues), dtype=complex),
        dt=dt,
        n=pair.n,
        names=tuple(names),
        layout=pair.layout,
        standardization=standardization,
        stabilized=np.zeros(len(eigenvalues), dtype=bool),
        excluded=excluded,
        x0=x0,
        steps_per_wave=steps_per_wave,
        train_end=train_end,
    )
    return replace(model, amplitudes=amplitudes(model, x0))


def stabilize(model: DmdModel) -> DmdModel:
    """Clamp growing modes: any omega with positive real part keeps only its
    imaginary part, and the eigenvalue is recomputed as exp(omega * dt).
    Modes and amplitudes are untouched.  Idempotent."""
    growing = np.real(model.omegas) > 0
    if not np.any(growing):
        return replace(model, stabilized=model.stabilized.copy())
    omegas = model.omegas.copy()
    omegas[growing] = 1j * np.imag(omegas[growing])
    eigenvalues = model.eigenvalues.copy()
    eigenvalues[growing] = np.exp(omegas[growing] * model.dt)
    return replace(
        model,
        omegas=omegas,
        eigenvalues=eigenvalues,
        stabilized=model.stabilized | growing,
    )


def forecast(model: DmdModel, x0: np.ndarray | None = None, horizon: int = 0) -> np.ndarray:
    """Modal-expansion forecast of the original variables.

    Column ``j`` (1-based) is Re(sum_k phi_k b_k exp(omega_k j dt)) restricted
    to the state block, in standardized units.  All finite modes contribute;
    zero-eigenvalue modes are excluded.
    """
    if horizon < 0:
        raise ValueError(f"horizon must be nonnegative, got {horizon}")
    if x0 is None:
        b = model.amplitudes
    else:
        b = amplitudes(model, x0)
    if horizon == 0:
        return np.zeros((model.n, 0))
    active = ~model.excluded
    t = np.arange(1, horizon + 1) * model.dt
    growth = np.exp(np.outer(model.omegas[active], t))
    top = model.modes[: model.n, active]
    return np.real(top @ (b[active, None] * growth))


def one_step_matrix_forecast(
    operator: DmdModel | np.ndarray, x0: np.ndarray, horizon: int
) -> np.ndarray:
    """Iterate the fitted discrete map x_{k+1} = A x_k.

    Cross-check path: agrees with the modal forecast when no stabilization was
    applied and the operator is comfortably diagonalizable.  Given a raw
    matrix, all rows are returned; given a model, the matrix is rebuilt from
    the eigenpairs and the result is restricted to the state block.
    """
    if isinstance(operator, DmdModel):
        lam = np.where(operator.excluded, 0.0, operator.eigenvalues)
        A = np.real(operator.modes @ (lam[:, None] * np.linalg.pinv(operator.modes)))
        top = operator.n
    else:
        A = np.asarray(operator, dtype=float)
        top = A.shape[0]
    x = np.asarray(x0, dtype=float)
    out = np.empty((A.shape[0], horizon))
    for j in range(horizon):
        x = A @ x
        out[:, j] = x
    return out[:top]


def _complex_to_json(arr: np.ndarray) -> dict:
    return {"re": np.real(arr).tolist(), "im": np.imag(arr).tolist()}


def _complex_from_json(obj: dict) -> np.ndarray:
    return np.asarray(obj["re"], dtype=float) + 1j * np.asarray(obj["im"], dtype=float)


def save_model(model: DmdModel, path) -> None:
    """Serialize to a self-describing JSON document (complex values as re/im)."""
    doc = {
        "format": "wavedmd-model",
        "version": 1,
        "dim": model.dim,
        "n": model.n,
        "names": list(model.names),
        "layout": list(model.layout),
        "dt": model.dt,
        "steps_per_wave": model.steps_per_wave,
        "train_end": model.train_end,
        "eigenvalues": _complex_to_json(model.eigenvalues),
        "modes": _complex_to_json(model.modes),
        "omegas": _complex_to_json(model.omegas),
        "amplitudes": _complex_to_json(model.amplitudes),
        "stabilized": model.stabilized.tolist(),
        "excluded": model.excluded.tolist(),
        "x0": model.x0.tolist(),
        "standardization": {
            "mean": model.standardization.mean.tolist(),
            "std": model.standardization.std.tolist(),
        },
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)
        fh.write("\n")


def load_model(path) -> DmdModel:
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ModelFormatError(f"{path}: {exc}") from None
    if doc.get("format") != "wavedmd-model":
        raise ModelFormatError(f"{path}: not a wavedmd model file")
    try:
        return DmdModel(
            eigenvalues=_complex_from_json(doc["eigenvalues"]),
            modes=_complex_from_json(doc["modes"]),
            omegas=_complex_from_json(doc["omegas"]),
            amplitudes=_complex_from_json(doc["amplitudes"]),
            dt=float(doc["dt"]),
            n=int(doc["n"]),
            names=tuple(doc["names"]),
            layout=tuple(doc["layout"]),
            standardization=StandardizationRecord(
                mean=np.asarray(doc["standardization"]["mean"], dtype=float),
                std=np.asarray(doc["standardization"]["std"], dtype=float),
            ),
            stabilized=np.asarray(doc["stabilized"], dtype=bool),
            excluded=np.asarray(doc["excluded"], dtype=bool),
            x0=np.asarray(doc["x0"], dtype=float),
            steps_per_wave=int(doc["steps_per_wave"]),
            train_end=int(doc["train_end"]),
        )
    except (KeyError, TypeError) as exc:
        raise ModelFormatError(f"{path}: missing or malformed field ({exc})") from None
