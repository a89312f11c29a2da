"""Rectangular MAC grid and the field containers living on it.

Scalars (phi, sigma, mu, p) are plain ``(nx, ny)`` arrays sampled at cell
centres, indexed ``[i, j]`` with ``i`` along x.  Velocities are staggered:
``u`` lives on the ``nx + 1`` vertical faces of each row, ``w`` on the
``ny + 1`` horizontal faces of each column.  Boundary faces carry the
normal velocity and are zero for no-slip fields.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import ContractError


@dataclass(frozen=True)
class Grid:
    nx: int
    ny: int
    Lx: float = 1.0
    Ly: float = 1.0

    def __post_init__(self):
        if int(self.nx) != self.nx or int(self.ny) != self.ny:
            raise ContractError("cell counts must be integers")
        if self.nx < 4 or self.ny < 4:
            raise ContractError(f"grid needs at least 4x4 cells, got {self.nx}x{self.ny}")
        if not (self.Lx > 0 and self.Ly > 0):
            raise ContractError("domain lengths must be positive")

    @property
    def hx(self) -> float:
        return self.Lx / self.nx

    @property
    def hy(self) -> float:
        return self.Ly / self.ny

    @property
    def cell_area(self) -> float:
        return self.hx * self.hy

    @property
    def area(self) -> float:
        return self.Lx * self.Ly

    @property
    def shape(self) -> tuple[int, int]:
        return (self.nx, self.ny)

    @property
    def u_shape(self) -> tuple[int, int]:
        return (self.nx + 1, self.ny)

    @property
    def w_shape(self) -> tuple[int, int]:
        return (self.nx, self.ny + 1)

    @cached_property
    def x(self) -> np.ndarray:
        return (np.arange(self.nx) + 0.5) * self.hx

    @cached_property
    def y(self) -> np.ndarray:
        return (np.arange(self.ny) + 0.5) * self.hy

    def meshgrid(self) -> tuple[np.ndarray, np.ndarray]:
        """Cell-centre coordinates as two ``(nx, ny)`` arrays."""
        return np.meshgrid(self.x, self.y, indexing="ij")

    def u_coords(self):
        xf = np.arange(self.nx + 1) * self.hx
        return np.meshgrid(xf, self.y, indexing="ij")

    def w_coords(self):
        yf = np.arange(self.ny + 1) * self.hy
        return np.meshgrid(self.x, yf, indexing="ij")

    def zeros(self) -> np.ndarray:
        return np.zeros(self.shape)

    def check_scalar(self, f, name="field") -> np.ndarray:
        f = np.asarray(f, dtype=float)
        if f.shape != self.shape:
            raise ContractError(f"{name} has shape {f.shape}, grid expects {self.shape}")
        return f

    def check_vector(self, v: "VectorField", name="velocity") -> "VectorField":
        if v.u.shape != self.u_shape or v.w.shape != self.w_shape:
            raise ContractError(
                f"{name} has face shapes {v.u.shape}/{v.w.shape}, "
                f"grid expects {self.u_shape}/{self.w_shape}"
            )
        return v


@dataclass
class VectorField:
    """Face-staggered vector field ``(u, w)``."""

    u: np.ndarray
    w: np.ndarray

    @classmethod
    def zeros(cls, grid: Grid) -> "VectorField":
        return cls(np.zeros(grid.u_shape), np.zeros(grid.w_shape))

    def copy(self) -> "VectorField":
        return VectorField(self.u.copy(), self.w.copy())

    def __add__(self, other: "VectorField") -> "VectorField":
        return VectorField(self.u + other.u, self.w + other.w)

    def __sub__(self, other: "VectorField") -> "VectorField":
        return VectorField(self.u - other.u, self.w - other.w)

    def __mul__(self, c: float) -> "VectorField":
        return VectorField(c * self.u, c * self.w)

    __rmul__ = __mul__

    def __neg__(self) -> "VectorField":
        return VectorField(-self.u, -self.w)

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.u)) and np.all(np.isfinite(self.w)))

    def boundary_max(self) -> float:
        """Largest normal velocity magnitude on the domain boundary."""
        return float(max(np.abs(self.u[[0, -1], :]).max(), np.abs(self.w[:, [0, -1]]).max()))

    def with_zero_boundary(self) -> "VectorField":
        out = self.copy()
        out.u[[0, -1], :] = 0.0
        out.w[:, [0, -1]] = 0.0
        return out

    def interior(self) -> np.ndarray:
        """Interior face values packed as one flat vector (u first, then w)."""
        return np.concatenate([self.u[1:-1, :].ravel(), self.w[:, 1:-1].ravel()])

    @classmethod
    def from_interior(cls, grid: Grid, x: np.ndarray) -> "VectorField":
        nu = (grid.nx - 1) * grid.ny
        if x.size != nu + grid.nx * (grid.ny - 1):
            raise ContractError(f"packed velocity has {x.size} entries, grid needs {nu + grid.nx * (grid.ny - 1)}")
        v = cls.zeros(grid)
        v.u[1:-1, :] = x[:nu].reshape(grid.nx - 1, grid.ny)
        v.w[:, 1:-1] = x[nu:].reshape(grid.nx, grid.ny - 1)
        return v
