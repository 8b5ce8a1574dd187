"""Mode sorting, modal participation, and statistics across realizations."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .dmd import DmdModel
from .errors import DegenerateAmplitudesError, DimensionMismatchError


def participation(model: DmdModel, kind: str = "amplitude", horizon: int | None = None) -> np.ndarray:
    """Nonnegative mode weights summing to 1.

    ``amplitude`` weighs each mode by |b_k| * ||phi_k|| (the modal coordinate
    magnitude of the initial condition).  ``energy`` integrates the decaying
    modal magnitude over ``horizon`` forecast steps instead, as a sensitivity
    alternative.  Excluded zero-eigenvalue modes get weight 0.
    """
    norms = np.linalg.norm(model.modes, axis=0)
    if kind == "amplitude":
        w = np.abs(model.amplitudes) * norms
    elif kind == "energy":
        steps = model.steps_per_wave if horizon is None else horizon
        t = np.arange(1, steps + 1) * model.dt
        rates = np.real(model.omegas)
        rates = np.where(np.isfinite(rates), rates, 0.0)
        decay = np.exp(2.0 * np.outer(rates, t)).sum(axis=1)
        w = (np.abs(model.amplitudes) * norms) ** 2 * decay
    else:
        raise ValueError(f"unknown participation kind {kind!r}")
    w = np.where(model.excluded, 0.0, w)
    total = w.sum()
    if not total > 0:
        raise DegenerateAmplitudesError("all modal amplitudes vanish")
    return w / total


def sort_modes(model: DmdModel) -> DmdModel:
    """Permute eigenpairs jointly so Im(omega) ascends; ties broken by
    ascending Re(omega), then by descending participation."""
    try:
        part = participation(model)
    except DegenerateAmplitudesError:
        part = np.zeros(model.dim)
    im = np.imag(model.omegas)
    re = np.real(model.omegas)
    order = np.lexsort((-part, re, im))
    return replace(
        model,
        eigenvalues=model.eigenvalues[order],
        modes=model.modes[:, order],
        omegas=model.omegas[order],
        amplitudes=model.amplitudes[order],
        stabilized=model.stabilized[order],
        excluded=model.excluded[order],
    )


@dataclass(frozen=True)
class Band:
    """Median and quartiles of one quantity across realizations."""

    median: np.ndarray
    q1: np.ndarray
    q3: np.ndarray

    @property
    def iqr(self) -> np.ndarray:
        return self.q3 - self.q1


@dataclass(frozen=True)
class ModeStatistics:
    """Per-slot spectra and participation statistics over many fitted models,
    plus eigenvector-magnitude bands for the two most participated slots."""

    count: int
    dim: int
    re_omega: Band
    im_omega: Band
    participation: Band
    top_slots: tuple[int, int]
    component_bands: dict[int, Band]

    def to_dict(self) -> dict:
        def band(b: Band) -> dict:
            return {"median": b.median.tolist(), "q1": b.q1.tolist(), "q3": b.q3.tolist()}

        return {
            "count": self.count,
            "dim": self.dim,
            "re_omega": band(self.re_omega),
            "im_omega": band(self.im_omega),
            "participation": band(self.participation),
            "top_slots": list(self.top_slots),
            "component_bands": {str(k): band(v) for k, v in self.component_bands.items()},
        }


def _band(values: np.ndarray) -> Band:
    # values: (realizations, slots); linear-interpolation quantiles.
    q1, med, q3 = np.percentile(values, [25.0, 50.0, 75.0], axis=0)
    return Band(median=med, q1=q1, q3=q3)


def aggregate(realizations: list[DmdModel]) -> ModeStatistics:
    """Medians and quartiles per mode slot across sorted realizations.

    All realizations must share the augmented dimension; slots are aligned by
    the :func:`sort_modes` ordering, so callers sort first.
    """
    if not realizations:
        raise ValueError("no realizations to aggregate")
    dim = realizations[0].dim
    for r in realizations:
        if r.dim != dim:
            raise DimensionMismatchError(f"realization dimension {r.dim} != {dim}")
    re = np.vstack([np.real(r.omegas) for r in realizations])
    im = np.vstack([np.imag(r.omegas) for r in realizations])
    part = np.vstack([participation(r) for r in realizations])
    part_band = _band(part)
    # Two slots with highest median participation, lower index on ties.
    top = np.lexsort((np.arange(dim), -part_band.median))[:2]
    top_slots = (int(top[0]), int(top[1] if dim > 1 else top[0]))
    component_bands = {}
    for slot in dict.fromkeys(top_slots):
        mags = np.vstack([np.abs(r.modes[:, slot]) for r in realizations])
        component_bands[int(slot)] = _band(mags)
    return ModeStatistics(
        count=len(realizations),
        dim=dim,
        re_omega=_band(re),
        im_omega=_band(im),
        participation=part_band,
        top_slots=top_slots,
        component_bands=component_bands,
    )


def mode_table_rows(model: DmdModel) -> list[dict]:
    """Flat rows (one per sorted mode slot) for the CLI's plot-data files."""
    srt = sort_modes(model)
    part = participation(srt)
    rows = []
    for k in range(srt.dim):
        rows.append(
            {
                "slot": k,
                "re_omega": float(np.real(srt.omegas[k])),
                "im_omega": float(np.imag(srt.omegas[k])),
                "abs_eigenvalue": float(np.abs(srt.eigenvalues[k])),
                "participation": float(part[k]),
                "stabilized": bool(srt.stabilized[k]),
                "excluded": bool(srt.excluded[k]),
            }
        )
    return rows


def statistics_rows(stats: ModeStatistics) -> list[dict]:
    """Flat rows (one per slot) of the aggregated spectra statistics."""
    rows = []
    for k in range(stats.dim):
        rows.append(
            {
                "slot": k,
                "re_omega_median": float(stats.re_omega.median[k]),
                "re_omega_q1": float(stats.re_omega.q1[k]),
                "re_omega_q3": float(stats.re_omega.q3[k]),
                "im_omega_median": float(stats.im_omega.median[k]),
                "im_omega_q1": float(stats.im_omega.q1[k]),
                "im_omega_q3": float(stats.im_omega.q3[k]),
                "participation_median": float(stats.participation.median[k]),
                "participation_q1": float(stats.participation.q1[k]),
                "participation_q3": float(stats.participation.q3[k]),
            }
        )
    return rows


def component_rows(stats: ModeStatistics, labels: tuple[str, ...], names: tuple[str, ...]) -> list[dict]:
    """Eigenvector-magnitude bands of the top two slots, one row per component."""
    rows = []
    n = len(names)
    for slot, band in stats.component_bands.items():
        for i in range(stats.dim):
            rows.append(
                {
                    "slot": slot,
                    "component": i,
                    "block": labels[i // n],
                    "variable": names[i % n],
                    "magnitude_median": float(band.median[i]),
                    "magnitude_q1": float(band.q1[i]),
                    "magnitude_q3": float(band.q3[i]),
                }
            )
    return rows
