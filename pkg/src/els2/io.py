"""Checkpoint persistence and diagnostics serialization.

Checkpoint layout (all multi-byte values little-endian):

    offset  size  field
    0       4     magic "ELS2"
    4       4     format version (u32, currently 1)
    8       4     Lmax (u32)
    12      4     n_lat (u32)
    16      4     n_lon (u32)
    20      8     simulation time t (f64)
    28      8*N   psi values, row-major latitude-major (N = n_lat*n_lon)
    28+8N   24*N  director values, component-major (all x, all y, all z)

Round trips are bit-exact: arrays are written as raw '<f8' buffers.  Only the
stream function is stored for the flow; u = rot psi reconstructs the velocity
exactly on load.

Diagnostics rows are CSV with 17 significant digits, which reproduces every
f64 exactly on re-parse.
"""

from __future__ import annotations

import os
import struct
from typing import IO

import numpy as np

from .errors import CheckpointError
from .fields import DirectorField, State
from .sphere import ScalarField, SphereGrid

CHECKPOINT_MAGIC = b"ELS2"
CHECKPOINT_VERSION = 1
_HEADER = struct.Struct("<4sIIIId")

CSV_COLUMNS = (
    "t", "KE", "E", "E_partial", "E_antipartial", "deg_raw", "deg",
    "residual", "dissipation", "mean_ux", "mean_uy", "mean_uz",
    "local_max", "dt", "energy_residual",
)
CSV_HEADER = ",".join(CSV_COLUMNS)


def write_checkpoint(state: State, path: str | os.PathLike) -> None:
    grid = state.grid
    header = _HEADER.pack(
        CHECKPOINT_MAGIC, CHECKPOINT_VERSION,
        grid.l_max, grid.n_lat, grid.n_lon, state.t,
    )
    psi_bytes = np.ascontiguousarray(state.psi.values, dtype="<f8").tobytes()
    d_bytes = b"".join(
        np.ascontiguousarray(state.d.values[..., a], dtype="<f8").tobytes()
        for a in range(3)
    )
    tmp = os.fspath(path) + ".tmp"
    with open(tmp, "wb") as fh:
        fh.write(header)
        fh.write(psi_bytes)
        fh.write(d_bytes)
    os.replace(tmp, path)


def read_checkpoint(path: str | os.PathLike, grid: SphereGrid) -> State:
    """Load a state; validates magic, version, and grid dimensions."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < _HEADER.size:
        raise CheckpointError(
            f"truncated checkpoint: {len(blob)} bytes < header size {_HEADER.size}",
            offset=len(blob),
        )
    magic, version, l_max, n_lat, n_lon, t = _HEADER.unpack_from(blob, 0)
    if magic != CHECKPOINT_MAGIC:
        raise CheckpointError(f"bad magic {magic!r} at offset 0", offset=0)
    if version != CHECKPOINT_VERSION:
        raise CheckpointError(
            f"unsupported format version {version} at offset 4", offset=4
        )
    if (l_max, n_lat, n_lon) != (grid.l_max, grid.n_lat, grid.n_lon):
        raise CheckpointError(
            f"dimension mismatch at offset 8: file has Lmax={l_max}, "
            f"n_lat={n_lat}, n_lon={n_lon}; active grid is Lmax={grid.l_max}, "
            f"n_lat={grid.n_lat}, n_lon={grid.n_lon}",
            offset=8,
        )
    n = n_lat * n_lon
    expected = _HEADER.size + 8 * n * 4
    if len(blob) != expected:
        raise CheckpointError(
            f"truncated checkpoint: {len(blob)} bytes, expected {expected}",
            offset=min(len(blob), expected),
        )
    data = np.frombuffer(blob, dtype="<f8", count=4 * n, offset=_HEADER.size)
    psi = data[:n].reshape(n_lat, n_lon).astype(float)
    d = np.stack(
        [data[(1 + a) * n : (2 + a) * n].reshape(n_lat, n_lon) for a in range(3)],
        axis=-1,
    ).astype(float)
    return State(t, ScalarField(grid, psi), DirectorField(grid, d))


# ----------------------------------------------------------------------
# diagnostics CSV
# ----------------------------------------------------------------------


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def write_diagnostics_header(stream: IO[str]) -> None:
    stream.write(CSV_HEADER + "\n")


def write_diagnostics_row(report, stream: IO[str], dt: float = 0.0,
                          energy_residual: float = 0.0) -> None:
    """One CSV row per report at full f64 precision."""
    fields = [
        _fmt(report.t), _fmt(report.kinetic), _fmt(report.dirichlet),
        _fmt(report.e_partial), _fmt(report.e_antipartial),
        _fmt(report.degree_raw), str(int(report.degree)),
        _fmt(report.residual), _fmt(report.dissipation),
        _fmt(report.mean_u[0]), _fmt(report.mean_u[1]), _fmt(report.mean_u[2]),
        _fmt(report.local_max), _fmt(dt), _fmt(energy_residual),
    ]
    stream.write(",".join(fields) + "\n")


def read_diagnostics(path: str | os.PathLike) -> dict[str, np.ndarray]:
    """Diagnostics table as column name -> array; degrees come back as ints."""
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip()
        if header != CSV_HEADER:
            raise IOError(f"unexpected diagnostics header: {header!r}")
        rows = [line.strip().split(",") for line in fh if line.strip()]
    if any(len(r) != len(CSV_COLUMNS) for r in rows):
        raise IOError("malformed diagnostics row")
    table = np.array(rows, dtype=float) if rows else np.zeros((0, len(CSV_COLUMNS)))
    out: dict[str, np.ndarray] = {}
    for k, name in enumerate(CSV_COLUMNS):
        col = table[:, k] if rows else np.zeros(0)
        out[name] = col.astype(int) if name == "deg" else col
    return out


# ----------------------------------------------------------------------
# output-directory lock
# ----------------------------------------------------------------------


class OutputLock:
    """Exclusive lockfile guarding one output directory against concurrent runs."""

    def __init__(self, directory: str | os.PathLike):
        self.path = os.path.join(os.fspath(directory), ".els2.lock")
        self._fd: int | None = None

    def __enter__(self) -> "OutputLock":
        try:
            self._fd = os.open(self.path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
        except FileExistsError:
            raise IOError(
                f"output directory is locked by {self.path}; "
                "remove the file if no other run is active"
            ) from None
        os.write(self._fd, str(os.getpid()).encode())
        return self

    def __exit__(self, *exc) -> None:
        if self._fd is not None:
            os.close(self._fd)
            self._fd = None
        try:
            os.unlink(self.path)
        except FileNotFoundError:
            pass
