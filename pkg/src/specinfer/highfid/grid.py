"""Cell-centred grid for the 2D transport model and the field containers."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import DomainError, InputShapeError


@dataclass(frozen=True)
class Grid2D:
    """Uniform cells on ``[0, L_x] x [0, L_y]``, periodic in x, walls in y.

    Cell ``(i, j)`` is centred at ``(i dx, (j + 1/2) dy)``. Putting the x
    centres on ``i dx`` lines the depth average up with the points of a
    :class:`~specinfer.spectral.WaveGrid` with ``n_points = n_x``.
    """

    lx: float = 1.0
    ly: float = 1.0
    nx: int = 128
    ny: int = 128

    def __post_init__(self):
        if not (self.lx > 0 and self.ly > 0):
            raise DomainError("domain lengths must be positive")
        if self.nx < 2 or self.ny < 1:
            raise DomainError("need at least 2 cells in x and 1 in y")

    @property
    def dx(self) -> float:
        return self.lx / self.nx

    @property
    def dy(self) -> float:
        return self.ly / self.ny

    @property
    def shape(self) -> tuple[int, int]:
        return (self.nx, self.ny)

    @property
    def xc(self) -> np.ndarray:
        return np.arange(self.nx) * self.dx

    @property
    def yc(self) -> np.ndarray:
        return (np.arange(self.ny) + 0.5) * self.dy

    @property
    def cell_area(self) -> float:
        return self.dx * self.dy

    def check(self, values) -> np.ndarray:
        v = np.asarray(values, dtype=float)
        if v.shape != self.shape:
            raise InputShapeError(f"field has shape {v.shape}, grid expects {self.shape}")
        return v


@dataclass(frozen=True)
class Concentration2D:
    grid: Grid2D
    values: np.ndarray = field(repr=False)
    time_stamp: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "values", self.grid.check(self.values))

    @classmethod
    def from_profile(cls, grid: Grid2D, profile, time_stamp: float = 0.0) -> Concentration2D:
        """Field that is uniform in y with the given x profile."""
        p = np.asarray(profile, dtype=float)
        if p.shape != (grid.nx,):
            raise InputShapeError(f"profile has {p.size} values, grid has {grid.nx} columns")
        return cls(grid, np.repeat(p[:, None], grid.ny, axis=1), time_stamp)

    def mass(self) -> float:
        return float(self.values.sum() * self.grid.cell_area)


def depth_average(c: Concentration2D) -> np.ndarray:
    """Cell-average quadrature of ``(1/L_y) int c dy`` on every column."""
    return c.values.mean(axis=1)
