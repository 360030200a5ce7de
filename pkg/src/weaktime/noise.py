"""Poisson shot noise on count records and estimator-precision sweeps."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, WeakTimeError
from .grid import TemporalGrid
from .interferometer import MeasurementSettings, background_rate, forward_rates
from .records import BROADBAND, RecordTable
from .states import ReferencePulse, pure_to_density
from .tomography import estimate_weak_value_subtracted, weak_value_time_projector

# numpy's Poisson sampler rejects means above ~9.2e18
_MAX_MEAN = 1e18
_NEG_ROUNDOFF = 1e-12


@dataclass(frozen=True)
class ShotNoiseConfig:
    """Photon-pair budget and RNG seed.

    The budget is split evenly over the distinct measurement settings
    (reference time, probe phase, strength) present in the table being
    sampled; within a setting the frequency bins share it according to the
    rate.
    """

    total_pairs: int
    seed: int = 0

    def __post_init__(self):
        if self.total_pairs < 1:
            raise DomainError("total_pairs must be >= 1")


def rng_for(seed: int, *stream: int) -> np.random.Generator:
    """Independent generator for ``(seed, stream...)``; order-free."""
    return np.random.default_rng(np.random.SeedSequence([int(seed) & (2**64 - 1), *stream]))


def count_scale(records: RecordTable, cfg: ShotNoiseConfig, grid: TemporalGrid,
                grid_2: TemporalGrid | None = None) -> np.ndarray:
    """Per-record factor turning a rate into a Poisson mean:
    ``total_pairs * cell measure / n_settings``."""
    keys = [records.t_ref, records.phi, records.theta]
    measure = np.where(records.omega_index == BROADBAND, 1.0, grid.domega)
    if records.is_pair:
        keys += [records.t2, records.phi2, records.theta2]
        measure = measure * (grid_2 or grid).domega
    n_settings = len(np.unique(np.stack(keys, axis=1), axis=0))
    return cfg.total_pairs * measure / n_settings


def expected_counts(records: RecordTable, cfg: ShotNoiseConfig, grid: TemporalGrid,
                    grid_2: TemporalGrid | None = None) -> np.ndarray:
    v = records.value
    # rates are non-negative analytically; allow round-off below that
    tol = _NEG_ROUNDOFF * np.max(np.abs(v), initial=0.0)
    if np.any(v < -tol):
        raise DomainError("rates must be non-negative to sample counts")
    mean = np.clip(v, 0.0, None) * count_scale(records, cfg, grid, grid_2)
    if np.max(mean, initial=0.0) > _MAX_MEAN:
        raise OverflowError(f"Poisson mean {np.max(mean):.3e} exceeds sampler range")
    return mean


def sample_counts(records: RecordTable, cfg: ShotNoiseConfig, grid: TemporalGrid,
                  grid_2: TemporalGrid | None = None, stream: tuple = ()) -> RecordTable:
    """Independent Poisson draw per cell; deterministic in (seed, stream)."""
    mean = expected_counts(records, cfg, grid, grid_2)
    counts = rng_for(cfg.seed, *stream).poisson(mean)
    return records.with_values(counts.astype(float), is_sampled=True)


@dataclass(frozen=True)
class SweepRow:
    theta: float
    mean: float
    std: float
    stderr: float
    n_ok: int
    n_failed: int
    truth: float


def _trial_estimate(cell, cfg, grid, i_theta, trial, theta, background_counts):
    counts = sample_counts(cell, cfg, grid, stream=(i_theta, trial))
    try:
        return estimate_weak_value_subtracted(counts, theta=theta, background=background_counts)
    except WeakTimeError:
        return np.nan


def estimator_variance_sweep(state, thetas, cfg: ShotNoiseConfig, n_trials: int,
                             t_ref: float | None = None, omega_index: int | None = None,
                             workers: int = 1) -> list[SweepRow]:
    """Monte Carlo spread of the background-subtracted weak-value estimate.

    For each strength the cell ``(t_ref, omega_index)`` is measured at probe
    phases 0 and pi with ``cfg.total_pairs`` pairs, Poisson counts are drawn
    and the estimator applied with the analytic back-action floor. Failed
    trials (e.g. no counts) are excluded and counted.
    """
    if n_trials < 100:
        raise DomainError("n_trials must be >= 100")
    rho = pure_to_density(state) if not hasattr(state, "rho") else state
    g = rho.grid
    if t_ref is None:
        t_ref = g.times[np.argmax(np.real(np.diag(rho.rho)))]
    if omega_index is None:
        omega_index = g.center_omega_index()
    truth = weak_value_time_projector(rho, t_ref, omega_index).real
    rows = []
    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        for i_theta, theta in enumerate(thetas):
            cell = forward_rates(rho, [theta], [0.0, np.pi], reference_times=[t_ref],
                                 omega_indices=[omega_index])
            bg = background_rate(MeasurementSettings(theta, 0.0, ReferencePulse(t_ref)))
            bg = bg * count_scale(cell, cfg, g)[0]
            est = np.array(list(pool.map(
                lambda tr: _trial_estimate(cell, cfg, g, i_theta, tr, theta, bg),
                range(n_trials))))
            ok = est[~np.isnan(est)]
            std = float(np.std(ok, ddof=1)) if len(ok) > 1 else np.nan
            rows.append(SweepRow(float(theta), float(np.mean(ok)) if len(ok) else np.nan, std,
                                 std / np.sqrt(len(ok)) if len(ok) else np.nan,
                                 int(len(ok)), int(n_trials - len(ok)), float(truth)))
    return rows
