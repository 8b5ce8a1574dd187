"""Seeded synthetic records for self-contained validation.

Every kind has a documented closed form so analytic continuations exist:

- ``single-tone``:   x_i(t) = a_i sin(2 pi t / T_e + phi_i)
- ``two-tone``:      adds a second tone of period T_e / golden (incommensurate,
  so the signal never exactly repeats)
- ``quasi-periodic-with-drift``: four tones of periods T_e, T_e/golden,
  golden*T_e, and 4*sqrt(2)*T_e (a slow drift), plus weak Gaussian noise
  (default SNR 34 dB) so every forecast error floor is macroscopic
- ``tone-plus-noise``: single tone plus Gaussian noise at a prescribed SNR
  (default 20 dB)

T_e is ``steps_per_wave * dt``; amplitudes are drawn in [0.5, 1.5] and phases
in [0, 2 pi) per variable and per tone, so the dominant period is T_e by
construction.  Identical seeds reproduce identical records, and the tone
parameters of the noisy kinds match the corresponding noise-free kind drawn
with the same seed.
"""

from __future__ import annotations

import numpy as np

from .timeseries import TimeSeries

GOLDEN = (1.0 + np.sqrt(5.0)) / 2.0

KINDS = ("single-tone", "two-tone", "quasi-periodic-with-drift", "tone-plus-noise")

_DEFAULT_SNR_DB = {"tone-plus-noise": 20.0, "quasi-periodic-with-drift": 34.0}


def tone_periods(kind: str, wave_period: float) -> tuple[float, ...]:
    """Tone periods of each kind, longest-known dominant first."""
    if kind in ("single-tone", "tone-plus-noise"):
        return (wave_period,)
    if kind == "two-tone":
        return (wave_period, wave_period / GOLDEN)
    if kind == "quasi-periodic-with-drift":
        return (wave_period, wave_period / GOLDEN, wave_period * GOLDEN, 4.0 * np.sqrt(2.0) * wave_period)
    raise ValueError(f"unknown synthetic kind {kind!r}")


def tone_angular_frequencies(kind: str, wave_period: float) -> tuple[float, ...]:
    return tuple(2.0 * np.pi / p for p in tone_periods(kind, wave_period))


def generate(
    kind: str,
    n: int,
    m: int,
    seed: int,
    dt: float = 0.1,
    steps_per_wave: int = 32,
    snr_db: float | None = None,
) -> TimeSeries:
    """Generate a deterministic synthetic record with ``n`` variables and
    ``m`` steps."""
    if kind not in KINDS:
        raise ValueError(f"unknown synthetic kind {kind!r}; expected one of {KINDS}")
    if m < 4 * steps_per_wave:
        raise ValueError(f"m must be at least 4 * steps_per_wave = {4 * steps_per_wave}, got {m}")
    rng = np.random.default_rng(seed)
    t = np.arange(m) * dt
    wave_period = steps_per_wave * dt
    values = np.zeros((n, m))
    for period in tone_periods(kind, wave_period):
        amps = rng.uniform(0.5, 1.5, size=n)
        phases = rng.uniform(0.0, 2.0 * np.pi, size=n)
        values += amps[:, None] * np.sin(2.0 * np.pi * t[None, :] / period + phases[:, None])
    if kind in _DEFAULT_SNR_DB:
        level = _DEFAULT_SNR_DB[kind] if snr_db is None else snr_db
        noise_std = values.std(axis=1) / 10.0 ** (level / 20.0)
        values = values + noise_std[:, None] * rng.standard_normal((n, m))
    names = tuple(f"x{i + 1}" for i in range(n))
    return TimeSeries(values=values, dt=dt, names=names, steps_per_wave=steps_per_wave)
