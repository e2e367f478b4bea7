"""Periodic grid, spectral calculus, and field serialization.

The domain is [-L, L) sampled at N equispaced nodes (N a power of two).
Derivatives are Fourier multipliers (i k)^order acting through rfft/irfft.
The unpaired Nyquist mode is annihilated for every order, so the discrete
calculus is closed under composition (D^a D^b = D^(a+b)) and summation by
parts is exact; resolved fields carry machine-zero Nyquist content anyway.

Quadrature is the trapezoid rule, which is spectrally accurate for periodic
integrands. Fields whose real-line integrals are approximated on the
truncated domain should have negligible boundary values; GridField exposes
boundary_magnitude so callers can check adequacy.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

_BINARY_MAGIC = b"BLGF"


@dataclass(frozen=True)
class PeriodicGrid:
    """Equispaced periodic grid on [-half_length, half_length)."""

    half_length: float
    n_points: int

    def __post_init__(self) -> None:
        if not (self.half_length > 0.0 and np.isfinite(self.half_length)):
            raise ValueError(f"half_length must be positive, got {self.half_length}")
        n = self.n_points
        if n < 16 or (n & (n - 1)) != 0:
            raise ValueError(f"n_points must be a power of two >= 16, got {n}")

    @property
    def spacing(self) -> float:
        return 2.0 * self.half_length / self.n_points

    @property
    def nodes(self) -> np.ndarray:
        return -self.half_length + self.spacing * np.arange(self.n_points)

    @property
    def wavenumbers(self) -> np.ndarray:
        """rfft wavenumbers k_j = j*pi/L, j = 0..N/2."""
        return 2.0 * np.pi * np.fft.rfftfreq(self.n_points, d=self.spacing)

    def multiplier(self, order: int) -> np.ndarray:
        """(i k)^order with the Nyquist bin zeroed."""
        m = (1j * self.wavenumbers) ** order
        m[-1] = 0.0
        return m


@dataclass(frozen=True)
class GridField:
    """Real field sampled on a PeriodicGrid at time time_tag."""

    grid: PeriodicGrid
    values: np.ndarray
    time_tag: float = 0.0

    def __post_init__(self) -> None:
        vals = np.asarray(self.values, dtype=float)
        if vals.shape != (self.grid.n_points,):
            raise ValueError(
                f"values shape {vals.shape} does not match grid ({self.grid.n_points},)"
            )
        if not np.all(np.isfinite(vals)):
            raise ValueError("field values must be finite")
        vals = vals.copy()
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)

    @property
    def boundary_magnitude(self) -> float:
        return float(max(abs(self.values[0]), abs(self.values[-1])))

    def with_values(self, values: np.ndarray, time_tag: float | None = None) -> "GridField":
        return GridField(self.grid, values, self.time_tag if time_tag is None else time_tag)


def sample(evaluator, grid: PeriodicGrid, t: float = 0.0) -> GridField:
    """Sample a callable (t, x) -> values on the grid nodes."""
    vals = np.asarray(evaluator(t, grid.nodes), dtype=float)
    return GridField(grid, vals, time_tag=t)


def derivative(f: GridField, order: int) -> GridField:
    if order < 0:
        raise ValueError("order must be nonnegative")
    if order == 0:
        return f
    fh = np.fft.rfft(f.values)
    out = np.fft.irfft(fh * f.grid.multiplier(order), n=f.grid.n_points)
    return f.with_values(out)


def quadrature(f: GridField) -> float:
    """Trapezoid rule; exact Parseval pairing for periodic integrands."""
    return float(f.grid.spacing * np.sum(f.values))


def cumulative_quadrature(f: GridField) -> GridField:
    """Cumulative integral from the left edge, spectrally exact.

    Splits f into its mean (integrated as a ramp) plus the zero-mean part
    (antiderivative via division by ik), so the result carries none of the
    O(h^2) truncation a running trapezoid sum would have.
    """
    fh = np.fft.rfft(f.values)
    mean = fh[0].real / f.grid.n_points
    k = f.grid.wavenumbers
    anti = np.zeros_like(fh)
    anti[1:] = fh[1:] / (1j * k[1:])
    anti[-1] = 0.0
    osc = np.fft.irfft(anti, n=f.grid.n_points)
    ramp = mean * (f.grid.nodes + f.grid.half_length)
    vals = ramp + osc - osc[0]
    return f.with_values(vals)


def sobolev_norm(f: GridField, order: int) -> float:
    """L2-based Sobolev norm: sqrt(sum_{j<=order} int (d^j f)^2)."""
    if order not in (0, 1, 2):
        raise ValueError(f"order must be 0, 1 or 2, got {order}")
    total = quadrature(f.with_values(f.values**2))
    for j in range(1, order + 1):
        dj = derivative(f, j)
        total += quadrature(dj.with_values(dj.values**2))
    return float(np.sqrt(total))


def inner_product(f: GridField, g: GridField) -> float:
    if f.grid != g.grid:
        raise ValueError("fields live on different grids")
    return float(f.grid.spacing * np.dot(f.values, g.values))


def write_csv(f: GridField, path: str | Path) -> None:
    """Two-column x,value CSV with 17 significant digits."""
    lines = ["x,value"]
    for xv, fv in zip(f.grid.nodes, f.values):
        lines.append(f"{xv:.17g},{fv:.17g}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_csv(path: str | Path) -> tuple[np.ndarray, np.ndarray]:
    rows = Path(path).read_text().strip().splitlines()[1:]
    data = np.array([[float(tok) for tok in row.split(",")] for row in rows])
    return data[:, 0], data[:, 1]


def write_binary(f: GridField, path: str | Path) -> None:
    """Checkpoint format: magic, N (int64), L, t (float64), then values."""
    with open(path, "wb") as fh:
        fh.write(_BINARY_MAGIC)
        fh.write(struct.pack("<qdd", f.grid.n_points, f.grid.half_length, f.time_tag))
        fh.write(np.ascontiguousarray(f.values, dtype="<f8").tobytes())


def read_binary(path: str | Path) -> GridField:
    raw = Path(path).read_bytes()
    if raw[:4] != _BINARY_MAGIC:
        raise ValueError(f"{path}: not a grid-field checkpoint")
    n, half_length, t = struct.unpack("<qdd", raw[4:28])
    vals = np.frombuffer(raw[28:], dtype="<f8")
    if vals.shape[0] != n:
        raise ValueError(f"{path}: expected {n} values, found {vals.shape[0]}")
    return GridField(PeriodicGrid(half_length, int(n)), vals.astype(float), time_tag=t)


def default_grid(beta: float, n_points: int = 1024) -> PeriodicGrid:
    """Half-length 30/min(beta, 1) keeps exp(-2*beta*L) below quadrature tolerances."""
    return PeriodicGrid(30.0 / min(beta, 1.0), n_points)
