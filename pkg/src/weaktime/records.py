"""Count-rate records and their CSV form.

A single measurement cell is a :class:`CountRecord`; collections are kept
column-wise in a :class:`RecordTable` so the forward model and the
reconstructions can work on whole numpy arrays.

CSV column order is fixed::

    omega, t_ref, phi, theta, rate, is_sampled[, omega2, t2, phi2, theta2]

``omega`` is the frequency value (not the bin index); an empty/NaN omega
marks a frequency-unresolved (broadband) record, stored with
``omega_index == -1``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Iterator

import numpy as np

from .errors import DimensionError
from .grid import TemporalGrid

BROADBAND = -1

SINGLE_COLUMNS = ("omega", "t_ref", "phi", "theta", "rate", "is_sampled")
PAIR_COLUMNS = ("omega2", "t2", "phi2", "theta2")


@dataclass(frozen=True)
class CountRecord:
    omega_index: int
    reference_peak_time: float
    phi: float
    theta: float
    rate_or_count: float
    is_sampled: bool = False
    omega2_index: int | None = None
    t2: float | None = None
    phi2: float | None = None
    theta2: float | None = None

    def __post_init__(self):
        if self.rate_or_count < 0:
            raise ValueError(f"negative rate {self.rate_or_count!r}")
        if self.is_sampled and self.rate_or_count != int(self.rate_or_count):
            raise ValueError("sampled counts must be integers")


@dataclass
class RecordTable:
    omega_index: np.ndarray
    t_ref: np.ndarray
    phi: np.ndarray
    theta: np.ndarray
    value: np.ndarray
    is_sampled: np.ndarray
    omega2_index: np.ndarray | None = None
    t2: np.ndarray | None = None
    phi2: np.ndarray | None = None
    theta2: np.ndarray | None = None

    def __post_init__(self):
        self.omega_index = np.asarray(self.omega_index, dtype=np.int64)
        n = self.omega_index.shape[0]
        for name in ("t_ref", "phi", "theta", "value"):
            setattr(self, name, np.asarray(getattr(self, name), dtype=float))
        self.is_sampled = np.broadcast_to(np.asarray(self.is_sampled, dtype=bool), (n,)).copy()
        if self.omega2_index is not None:
            self.omega2_index = np.asarray(self.omega2_index, dtype=np.int64)
            for name in ("t2", "phi2", "theta2"):
                setattr(self, name, np.asarray(getattr(self, name), dtype=float))
        for f in fields(self):
            col = getattr(self, f.name)
            if col is not None and col.shape != (n,):
                raise DimensionError(f"column {f.name} has shape {col.shape}, expected ({n},)")

    def __len__(self) -> int:
        return self.omega_index.shape[0]

    @property
    def is_pair(self) -> bool:
        return self.omega2_index is not None

    def _columns(self):
        names = ["omega_index", "t_ref", "phi", "theta", "value", "is_sampled"]
        if self.is_pair:
            names += ["omega2_index", "t2", "phi2", "theta2"]
        return names

    def select(self, mask) -> "RecordTable":
        return RecordTable(**{k: getattr(self, k)[mask] for k in self._columns()})

    def with_values(self, values, is_sampled: bool) -> "RecordTable":
        cols = {k: getattr(self, k) for k in self._columns()}
        cols["value"] = values
        cols["is_sampled"] = is_sampled
        return RecordTable(**cols)

    @staticmethod
    def concat(tables) -> "RecordTable":
        tables = list(tables)
        names = tables[0]._columns()
        return RecordTable(**{k: np.concatenate([getattr(t, k) for t in tables]) for k in names})

    def rows(self) -> Iterator[CountRecord]:
        for i in range(len(self)):
            kw = {}
            if self.is_pair:
                kw = dict(omega2_index=int(self.omega2_index[i]), t2=float(self.t2[i]),
                          phi2=float(self.phi2[i]), theta2=float(self.theta2[i]))
            yield CountRecord(int(self.omega_index[i]), float(self.t_ref[i]), float(self.phi[i]),
                              float(self.theta[i]), float(self.value[i]), bool(self.is_sampled[i]),
                              **kw)

    @classmethod
    def from_records(cls, records) -> "RecordTable":
        records = list(records)
        pair = bool(records) and records[0].omega2_index is not None
        cols = dict(
            omega_index=[r.omega_index for r in records],
            t_ref=[r.reference_peak_time for r in records],
            phi=[r.phi for r in records],
            theta=[r.theta for r in records],
            value=[r.rate_or_count for r in records],
            is_sampled=[r.is_sampled for r in records],
        )
        if pair:
            cols.update(omega2_index=[r.omega2_index for r in records], t2=[r.t2 for r in records],
                        phi2=[r.phi2 for r in records], theta2=[r.theta2 for r in records])
        return cls(**cols)

    # ------------------------------------------------------------- CSV

    def to_csv(self, path, grid: TemporalGrid, grid_2: TemporalGrid | None = None) -> None:
        grid_2 = grid_2 or grid
        header = list(SINGLE_COLUMNS) + (list(PAIR_COLUMNS) if self.is_pair else [])
        om = _omega_values(grid, self.omega_index)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            om2 = _omega_values(grid_2, self.omega2_index) if self.is_pair else None
            for i in range(len(self)):
                row = [_fmt(om[i]), _fmt(self.t_ref[i]), _fmt(self.phi[i]), _fmt(self.theta[i]),
                       _fmt(self.value[i]), "1" if self.is_sampled[i] else "0"]
                if self.is_pair:
                    row += [_fmt(om2[i]), _fmt(self.t2[i]), _fmt(self.phi2[i]), _fmt(self.theta2[i])]
                w.writerow(row)

    @classmethod
    def from_csv(cls, path, grid: TemporalGrid, grid_2: TemporalGrid | None = None) -> "RecordTable":
        grid_2 = grid_2 or grid
        with open(Path(path), newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            rows = list(reader)
        if tuple(header[:6]) != SINGLE_COLUMNS or (len(header) > 6 and tuple(header[6:]) != PAIR_COLUMNS):
            raise ValueError(f"unexpected CSV header {header}")
        data = np.array([[float(x) if x != "" else np.nan for x in r] for r in rows], dtype=float)
        if data.size == 0:
            data = data.reshape(0, len(header))
        cols = dict(
            omega_index=_omega_indices(grid, data[:, 0]),
            t_ref=data[:, 1], phi=data[:, 2], theta=data[:, 3],
            value=data[:, 4], is_sampled=data[:, 5] != 0,
        )
        if len(header) > 6:
            cols.update(omega2_index=_omega_indices(grid_2, data[:, 6]), t2=data[:, 7],
                        phi2=data[:, 8], theta2=data[:, 9])
        return cls(**cols)


def _fmt(x) -> str:
    return "nan" if np.isnan(x) else f"{x:.17g}"


def _omega_values(grid, idx):
    idx = np.asarray(idx)
    out = np.full(idx.shape, np.nan)
    ok = idx != BROADBAND
    out[ok] = grid.omegas[idx[ok]]
    return out


def _omega_indices(grid, values):
    out = np.full(values.shape, BROADBAND, dtype=np.int64)
    for i, v in enumerate(values):
        if not np.isnan(v):
            out[i] = grid.omega_index(v)
    return out
