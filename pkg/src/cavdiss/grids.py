"""Uniform Fourier grids, wavefunctions on them, and spectral kinetic steps.

Both coordinates are represented on equally spaced points with periodic
(FFT) momentum companions.  ``q`` is the molecular bond coordinate and ``x``
the cavity-mode quadrature; a 2D wavefunction is stored with shape
``(q.n, x.n)``.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.fft as sfft

MIN_POINTS = 8


class GridError(ValueError):
    pass


@dataclass(frozen=True)
class Grid1D:
    min: float
    max: float
    n: int
    name: str = "q"

    def __post_init__(self):
        if not (np.isfinite(self.min) and np.isfinite(self.max)) or self.max <= self.min:
            raise GridError(f"grid {self.name}: need max > min, got [{self.min}, {self.max}]")
        if int(self.n) != self.n or self.n < MIN_POINTS:
            raise GridError(f"grid {self.name}: need an integer n >= {MIN_POINTS}, got {self.n}")
        object.__setattr__(self, "n", int(self.n))

    @property
    def spacing(self) -> float:
        return (self.max - self.min) / (self.n - 1)

    @property
    def points(self) -> np.ndarray:
        return np.linspace(self.min, self.max, self.n)

    @property
    def momenta(self) -> np.ndarray:
        """Conjugate momenta in FFT ordering; the Nyquist entry is -pi/spacing."""
        return 2.0 * np.pi * sfft.fftfreq(self.n, self.spacing)

    @property
    def p_max(self) -> float:
        return np.pi / self.spacing

    @classmethod
    def centered(cls, center: float, half_width: float, n: int, name: str = "x") -> "Grid1D":
        return cls(center - half_width, center + half_width, n, name)


def make_grid(min: float, max: float, n: int, name: str = "q") -> Grid1D:
    return Grid1D(min, max, n, name)


@dataclass(frozen=True)
class Grid2D:
    q_axis: Grid1D
    x_axis: Grid1D

    def __post_init__(self):
        if self.q_axis.name == self.x_axis.name:
            raise GridError("the two axes of a Grid2D need distinct names")

    @property
    def shape(self) -> tuple[int, int]:
        return (self.q_axis.n, self.x_axis.n)

    @property
    def size(self) -> int:
        return self.q_axis.n * self.x_axis.n

    @property
    def axes(self) -> tuple[Grid1D, Grid1D]:
        return (self.q_axis, self.x_axis)


AnyGrid = Grid1D | Grid2D


def grid_axes(grid: AnyGrid) -> tuple[Grid1D, ...]:
    return grid.axes if isinstance(grid, Grid2D) else (grid,)


def grid_shape(grid: AnyGrid) -> tuple[int, ...]:
    return tuple(ax.n for ax in grid_axes(grid))


def volume_element(grid: AnyGrid) -> float:
    return float(np.prod([ax.spacing for ax in grid_axes(grid)]))


def axis_index(grid: AnyGrid, axis: str) -> int:
    for i, ax in enumerate(grid_axes(grid)):
        if ax.name == axis:
            return i
    names = [ax.name for ax in grid_axes(grid)]
    raise GridError(f"axis {axis!r} not in grid (axes: {names})")


def coordinates(grid: AnyGrid) -> tuple[np.ndarray, ...]:
    """Coordinate arrays shaped for broadcasting over the grid."""
    axes = grid_axes(grid)
    if len(axes) == 1:
        return (axes[0].points,)
    return (axes[0].points[:, None], axes[1].points[None, :])


def momentum_coordinates(grid: AnyGrid) -> tuple[np.ndarray, ...]:
    axes = grid_axes(grid)
    if len(axes) == 1:
        return (axes[0].momenta,)
    return (axes[0].momenta[:, None], axes[1].momenta[None, :])


@dataclass
class Wavefunction:
    grid: AnyGrid
    amplitudes: np.ndarray
    time: float = 0.0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.amplitudes = np.asarray(self.amplitudes, dtype=np.complex128)
        if self.amplitudes.shape != grid_shape(self.grid):
            raise GridError(
                f"amplitude shape {self.amplitudes.shape} does not match grid {grid_shape(self.grid)}"
            )

    @property
    def dv(self) -> float:
        return volume_element(self.grid)

    def norm2(self) -> float:
        return float(np.vdot(self.amplitudes, self.amplitudes).real * self.dv)

    def normalized(self) -> "Wavefunction":
        n = self.norm2()
        if n <= 0:
            raise ValueError("cannot normalize a zero wavefunction")
        return Wavefunction(self.grid, self.amplitudes / np.sqrt(n), self.time)

    def copy(self) -> "Wavefunction":
        return Wavefunction(self.grid, self.amplitudes.copy(), self.time, dict(self.meta))

    def density(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2


def apply_kinetic_phase(psi: Wavefunction, axis: str, mass: float, dt: float) -> Wavefunction:
    """Free evolution exp(-i p^2 dt / 2m) along one axis, applied spectrally."""
    i = axis_index(psi.grid, axis)
    if dt == 0:
        return psi.copy()
    p = grid_axes(psi.grid)[i].momenta
    phase = np.exp(-0.5j * p**2 * dt / mass)
    shape = [1] * psi.amplitudes.ndim
    shape[i] = p.size
    out = sfft.ifft(sfft.fft(psi.amplitudes, axis=i) * phase.reshape(shape), axis=i)
    return Wavefunction(psi.grid, out, psi.time + 0.0)


def expectation_diagonal(psi: Wavefunction, f) -> float:
    """Sum of f * |psi|^2 * dv.  `f` is a callable of the grid coordinates or an array.

    Not divided by the norm; NaN in `f` propagates to the result.
    """
    values = f(*coordinates(psi.grid)) if callable(f) else np.asarray(f)
    return float(np.sum(values * psi.density()) * psi.dv)


def inner_product(psi1: Wavefunction, psi2: Wavefunction) -> complex:
    if psi1.grid != psi2.grid:
        raise GridError("inner product of wavefunctions on different grids")
    return complex(np.vdot(psi1.amplitudes, psi2.amplitudes) * psi1.dv)


# --- snapshot I/O ---------------------------------------------------------
#
# little-endian layout:
#   8s   magic b"CAVDWF01"
#   u32  number of axes (1 or 2)
#   per axis: 8s name (ascii, NUL padded), f64 min, f64 max, u64 n
#   f64  time (a.u.)
#   then prod(n) complex values as interleaved (re, im) f64, C order (x index varies fastest)

SNAPSHOT_MAGIC = b"CAVDWF01"


def save_snapshot(psi: Wavefunction, path: str | Path) -> None:
    axes = grid_axes(psi.grid)
    parts = [SNAPSHOT_MAGIC, struct.pack("<I", len(axes))]
    for ax in axes:
        parts.append(struct.pack("<8sddQ", ax.name.encode("ascii"), ax.min, ax.max, ax.n))
    parts.append(struct.pack("<d", psi.time))
    parts.append(np.ascontiguousarray(psi.amplitudes, dtype="<c16").tobytes())
    Path(path).write_bytes(b"".join(parts))


def load_snapshot(path: str | Path) -> Wavefunction:
    raw = Path(path).read_bytes()
    if raw[:8] != SNAPSHOT_MAGIC:
        raise GridError(f"{path}: not a wavefunction snapshot")
    (ndim,) = struct.unpack_from("<I", raw, 8)
    off = 12
    axes = []
    for _ in range(ndim):
        name, lo, hi, n = struct.unpack_from("<8sddQ", raw, off)
        off += struct.calcsize("<8sddQ")
        axes.append(Grid1D(lo, hi, n, name.rstrip(b"\0").decode("ascii")))
    (time,) = struct.unpack_from("<d", raw, off)
    off += 8
    grid = axes[0] if ndim == 1 else Grid2D(*axes)
    data = np.frombuffer(raw, dtype="<c16", offset=off).reshape(grid_shape(grid))
    return Wavefunction(grid, data.astype(np.complex128), time)
