"""Delimiter-separated trajectory files: one file per replica, streamable.

Every file starts with a header line naming its columns, then one row per
(sample time, trait) pair:

    micro / ode :  time,trait_id,mass
    jump process:  time,trait_id,b,d,mass           (chain attributes kept)
    genotype    :  time,genotype,trait_id,b,d,mass  (both labelings kept)

All traits of the (final) chain appear at every sample time, zeros
included, so a reader can reconstruct the full mass matrix without
guessing the chain.  Floats are written with shortest round-trip
formatting: write -> read -> write is byte-identical, which is what makes
manifest-driven reruns byte-reproducible.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

__all__ = [
    "TrajectoryTable",
    "write_micro_trajectory",
    "write_ode_trajectory",
    "write_tst_trajectory",
    "write_gst_trajectory",
    "read_trajectory",
]

_FLOAT_COLUMNS = {"time", "mass", "b", "d"}


def _fmt(x: float) -> str:
    return repr(float(x))


def _write_rows(path, header: Sequence[str], rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)
    return path


def write_micro_trajectory(path, result) -> Path:
    """Write a sampled stochastic run (``RunResult`` with a grid)."""
    if result.grid_times is None or result.grid_mass is None:
        raise ValueError("the run carries no sample grid; pass grid=... to run()")
    ids = [t.id for t in result.space.traits]
    rows = []
    for i, t in enumerate(result.grid_times):
        for j, tid in enumerate(ids):
            rows.append((_fmt(t), tid, _fmt(result.grid_mass[i, j])))
    return _write_rows(path, ("time", "trait_id", "mass"), rows)


def write_ode_trajectory(path, result, space) -> Path:
    """Write a deterministic integration (``OdeResult``)."""
    ids = [t.id for t in space.traits]
    rows = []
    for i, t in enumerate(result.times):
        for j, tid in enumerate(ids):
            rows.append((_fmt(t), tid, _fmt(result.states[i, j])))
    return _write_rows(path, ("time", "trait_id", "mass"), rows)


def write_tst_trajectory(path, states) -> Path:
    """Write a jump-process path (list of ``TstState``), chain attributes kept.

    One block per jump: every trait of the then-current chain with its
    birth/death rates and its equilibrium mass (zero when unoccupied).
    """
    rows = []
    for state in states:
        for trait in state.space.traits:
            rows.append(
                (
                    _fmt(state.time),
                    trait.id,
                    _fmt(trait.b),
                    _fmt(trait.d),
                    _fmt(state.config.mass(trait.id)),
                )
            )
    return _write_rows(path, ("time", "trait_id", "b", "d", "mass"), rows)


def write_gst_trajectory(path, states) -> Path:
    """Write a genotype jump path: genotype labels alongside chain trait ids."""
    rows = []
    for state in states:
        for genotype, trait in zip(state.gs.genotypes, state.gs.space.traits):
            rows.append(
                (
                    _fmt(state.time),
                    genotype.label,
                    trait.id,
                    _fmt(trait.b),
                    _fmt(trait.d),
                    _fmt(state.config.mass(trait.id)),
                )
            )
    return _write_rows(
        path, ("time", "genotype", "trait_id", "b", "d", "mass"), rows
    )


@dataclass(frozen=True)
class TrajectoryTable:
    """A parsed trajectory file."""

    path: str
    header: tuple[str, ...]
    columns: dict

    def __len__(self) -> int:
        return len(self.columns["time"]) if self.columns else 0

    def mass_matrix(self) -> tuple[np.ndarray, list[str], np.ndarray]:
        """Reconstruct (times, trait ids, T-by-n mass matrix).

        Requires complete blocks: every sample time lists the same traits
        in the same order.  Raises ValueError otherwise (schema mismatch).
        """
        times_col = self.columns["time"]
        ids_col = self.columns["trait_id"]
        mass_col = self.columns["mass"]
        if not times_col:
            raise ValueError(f"{self.path}: empty trajectory")
        ids: list[str] = []
        for tid in ids_col:
            if tid in ids:
                break
            ids.append(tid)
        n = len(ids)
        if n == 0 or len(times_col) % n != 0:
            raise ValueError(
                f"{self.path}: rows ({len(times_col)}) do not form complete "
                f"blocks of {n} traits"
            )
        T = len(times_col) // n
        for i in range(T):
            block = ids_col[i * n : (i + 1) * n]
            if block != ids:
                raise ValueError(
                    f"{self.path}: block {i} lists traits {block}, expected {ids}"
                )
            t0 = times_col[i * n]
            if any(times_col[i * n + j] != t0 for j in range(n)):
                raise ValueError(f"{self.path}: block {i} mixes sample times")
        times = np.asarray(times_col[::n], dtype=float)
        masses = np.asarray(mass_col, dtype=float).reshape(T, n)
        return times, ids, masses


def read_trajectory(path) -> TrajectoryTable:
    """Parse a trajectory file written by any of the writers above."""
    path = Path(path)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = tuple(next(reader))
        except StopIteration:
            raise ValueError(f"{path}: empty file") from None
        for required in ("time", "trait_id", "mass"):
            if required not in header:
                raise ValueError(
                    f"{path}: header {header} lacks required column {required!r}"
                )
        columns: dict = {name: [] for name in header}
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise ValueError(
                    f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}"
                )
            for name, value in zip(header, row):
                columns[name].append(
                    float(value) if name in _FLOAT_COLUMNS else value
                )
    return TrajectoryTable(path=str(path), header=header, columns=columns)
