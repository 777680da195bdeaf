"""Periodic grids, model parameters, and conserved-variable states.

Everything downstream works with cell averages on a uniform mesh of the
d-torus [0, L)^d, d in {1, 2}. Scalar fields are arrays of shape grid.shape;
vector fields carry a leading component axis, shape (dim,) + grid.shape.
Reductions use numpy's fixed C-order summation, so identical inputs give
bitwise-identical results run to run.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._io import write_csv

Array = np.ndarray

VACUUM_FLOOR_FACTOR = 1e-12


class SolverError(RuntimeError):
    """Raised when a time integration leaves its validity regime."""


@dataclass(frozen=True)
class PeriodicGrid:
    """Uniform Cartesian mesh of [0, L)^d with cell-centered unknowns."""

    dim: int
    cells_per_axis: int
    length_per_axis: float = 1.0

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise ValueError(f"dim must be 1 or 2, got {self.dim}")
        if self.cells_per_axis < 4:
            raise ValueError("need at least 4 cells per axis")
        if not self.length_per_axis > 0:
            raise ValueError("domain length must be positive")

    @property
    def cell_size(self) -> float:
        return self.length_per_axis / self.cells_per_axis

    @property
    def cell_volume(self) -> float:
        return self.cell_size**self.dim

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.cells_per_axis,) * self.dim

    @property
    def total_measure(self) -> float:
        return self.length_per_axis**self.dim

    def axis_coords(self) -> Array:
        """Cell-center coordinates along one axis."""
        return (np.arange(self.cells_per_axis) + 0.5) * self.cell_size

    def centers(self) -> tuple[Array, ...]:
        """Cell-center coordinate arrays, one per axis ('ij' indexing)."""
        x = self.axis_coords()
        if self.dim == 1:
            return (x,)
        return tuple(np.meshgrid(x, x, indexing="ij"))

    def signed_offsets(self) -> tuple[Array, ...]:
        """Nearest-image displacement components for every cell offset.

        Offset k along an axis maps to (k - N*[k >= ceil(N/2)]) * h, so each
        component lies in [-L/2, L/2); for even N the half-way offset k = N/2
        lands exactly on -L/2. Built from integer indices so the half-way
        plane is exact in floating point.
        """
        k = np.arange(self.cells_per_axis)
        k = k - self.cells_per_axis * (k >= (self.cells_per_axis + 1) // 2)
        r = k * self.cell_size
        if self.dim == 1:
            return (r,)
        return tuple(np.meshgrid(r, r, indexing="ij"))

    def halfway_masks(self) -> tuple[Array, ...]:
        """Boolean masks of the self-mirrored offset plane per axis.

        For even N the axis offset k = N/2 is its own periodic mirror; odd
        tables must vanish there. Empty masks for odd N.
        """
        k = np.arange(self.cells_per_axis)
        m = (2 * k) == self.cells_per_axis
        if self.dim == 1:
            return (m,)
        mx, my = np.meshgrid(m, m, indexing="ij")
        return (mx, my)


@dataclass(frozen=True)
class ModelParams:
    """Physical parameters shared by the solvers and diagnostics.

    gamma   pressure exponent, p(rho) = rho**gamma, gamma > 1
    kappa   interaction strength, >= 0
    alpha   kernel exponent, W(x) = sign * |x|**alpha / alpha with -d < alpha < 0
    sign    +1 attractive, -1 repulsive
    nu      friction rate of the unscaled system, >= 0
    epsilon inertia parameter of the scaled system, > 0
    """

    gamma: float = 2.0
    kappa: float = 0.0
    alpha: float = -0.5
    sign: int = 1
    nu: float = 0.0
    epsilon: float = 1.0

    def __post_init__(self):
        if not self.gamma > 1:
            raise ValueError("gamma must exceed 1")
        if self.kappa < 0:
            raise ValueError("kappa must be nonnegative")
        if self.sign not in (1, -1):
            raise ValueError("sign must be +1 or -1")
        if self.nu < 0:
            raise ValueError("nu must be nonnegative")
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")

    def beta(self, dim: int) -> float:
        return self.alpha + dim

    def theorem_regime(self, dim: int) -> tuple[bool, list[str]]:
        """Check the parameter window where the stability estimates are proved.

        Returns (ok, reasons); reasons lists every violated condition. Runs
        outside the window are allowed, only labeled.
        """
        reasons = []
        if dim <= 1:
            reasons.append("dim must exceed 1")
        if not (1 - dim < self.alpha < 0):
            reasons.append(f"alpha={self.alpha} outside (1-d, 0)")
        gmin = 2 - self.beta(dim) / dim
        if self.gamma < gmin:
            reasons.append(f"gamma={self.gamma} below {gmin}")
        return (not reasons, reasons)


@dataclass
class State:
    """Cell-averaged density and momentum at one instant."""

    rho: Array
    mom: Array  # shape (dim,) + grid.shape
    time: float = 0.0

    def copy(self) -> "State":
        return State(self.rho.copy(), self.mom.copy(), self.time)


def validate_state(s: State, grid: PeriodicGrid) -> None:
    """Raise ValueError unless s is an admissible state on grid."""
    if s.rho.shape != grid.shape:
        raise ValueError(f"rho shape {s.rho.shape} does not match grid {grid.shape}")
    if s.mom.shape != (grid.dim,) + grid.shape:
        raise ValueError(f"mom shape {s.mom.shape} does not match grid")
    if not np.all(np.isfinite(s.rho)) or not np.all(np.isfinite(s.mom)):
        raise ValueError("state contains non-finite entries")
    if np.any(s.rho < 0):
        raise ValueError("negative density")
    vac = s.rho == 0.0
    if np.any(vac) and np.any(s.mom[:, vac] != 0.0):
        raise ValueError("momentum must vanish on vacuum cells")


def vacuum_floor(rho: Array) -> float:
    return VACUUM_FLOOR_FACTOR * float(np.mean(rho))


def velocity(rho: Array, mom: Array) -> Array:
    """u = m / max(rho, floor); exactly zero wherever the momentum is zero."""
    # tiny absolute floor keeps the all-vacuum state from dividing 0 by 0
    return mom / np.maximum(rho, max(vacuum_floor(rho), 1e-300))


def total_mass(rho: Array, grid: PeriodicGrid) -> float:
    return float(np.sum(rho)) * grid.cell_volume


def lp_norm(f: Array, p: float, grid: PeriodicGrid) -> float:
    """Discrete L^p norm with the cell measure; p = inf for the max norm."""
    f = np.asarray(f, dtype=float)
    if not np.all(np.isfinite(f)):
        raise ValueError("non-finite field")
    if math.isinf(p):
        return float(np.max(np.abs(f))) if f.size else 0.0
    if p < 1:
        raise ValueError("p must be >= 1 or inf")
    s = float(np.sum(np.abs(f) ** p)) * grid.cell_volume
    return s ** (1.0 / p)


def grad_centered(f: Array, grid: PeriodicGrid) -> Array:
    """Second-order centered periodic gradient, shape (dim,) + grid.shape."""
    h2 = 2.0 * grid.cell_size
    out = np.empty((grid.dim,) + f.shape)
    for a in range(grid.dim):
        out[a] = (np.roll(f, -1, axis=a) - np.roll(f, 1, axis=a)) / h2
    return out


def restrict(f: Array, factor: int) -> Array:
    """Block average a fine-grid cell field down by an integer factor.

    Exactly conservative: the coarse cell value is the mean of its fine
    subcells, so total mass is preserved to rounding.
    """
    if factor < 1 or f.shape[0] % factor:
        raise ValueError("refinement factor must divide the grid size")
    n = f.shape[0] // factor
    if f.ndim == 1:
        return f.reshape(n, factor).mean(axis=1)
    return f.reshape(n, factor, n, factor).mean(axis=(1, 3))


def restrict_state(s: State, factor: int) -> State:
    mom = np.stack([restrict(s.mom[a], factor) for a in range(s.mom.shape[0])])
    return State(restrict(s.rho, factor), mom, s.time)


# ---------------------------------------------------------------------------
# snapshot files

def state_csv_header(dim: int) -> list[str]:
    if dim == 1:
        return ["cell_index", "x", "rho", "mom_x"]
    return ["cell_index", "cell_index_y", "x", "y", "rho", "mom_x", "mom_y"]


def write_state_csv(path, s: State, grid: PeriodicGrid) -> None:
    x = grid.axis_coords()
    rows = []
    if grid.dim == 1:
        for i in range(grid.cells_per_axis):
            rows.append([i, float(x[i]), float(s.rho[i]), float(s.mom[0, i])])
    else:
        for i in range(grid.cells_per_axis):
            for j in range(grid.cells_per_axis):
                rows.append([i, j, float(x[i]), float(x[j]),
                             float(s.rho[i, j]),
                             float(s.mom[0, i, j]), float(s.mom[1, i, j])])
    write_csv(path, state_csv_header(grid.dim), rows)


def read_state_csv(path, grid: PeriodicGrid, time: float = 0.0) -> State:
    rho = np.zeros(grid.shape)
    mom = np.zeros((grid.dim,) + grid.shape)
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        if header != state_csv_header(grid.dim):
            raise ValueError(f"unexpected snapshot header {header}")
        for line in fh:
            parts = line.strip().split(",")
            if grid.dim == 1:
                i = int(parts[0])
                rho[i] = float(parts[2])
                mom[0, i] = float(parts[3])
            else:
                i, j = int(parts[0]), int(parts[1])
                rho[i, j] = float(parts[4])
                mom[0, i, j] = float(parts[5])
                mom[1, i, j] = float(parts[6])
    s = State(rho, mom, time)
    validate_state(s, grid)
    return s
