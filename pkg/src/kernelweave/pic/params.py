"""Simulation parameters and species definitions.

Normalized units throughout: c = eps0 = mu0 = 1, default cell size 1 and
dt at 95% of the CFL limit. Particle momentum u = gamma*v is normalized to
m*c per species.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..workdiv import Extent3

CFL_FACTOR = 0.95


@dataclass(frozen=True)
class Species:
    name: str
    charge: float
    mass: float
    weight: float


def cfl_limit(dx: float, dy: float, dz: float) -> float:
    return 1.0 / math.sqrt(1.0 / dx**2 + 1.0 / dy**2 + 1.0 / dz**2)


def default_dt(dx=1.0, dy=1.0, dz=1.0) -> float:
    return CFL_FACTOR * cfl_limit(dx, dy, dz)


@dataclass(frozen=True)
class SimParams:
    cells: Extent3
    dx: float = 1.0
    dy: float = 1.0
    dz: float = 1.0
    dt: float | None = None
    species: tuple[Species, ...] = ()
    particles_per_cell: int = 16
    super_cell: Extent3 = field(default_factory=lambda: Extent3(8, 8, 4))
    dtype: np.dtype = np.dtype(np.float64)
    # KHI setup knobs (non-normative defaults)
    stream_velocity: float = 0.2
    perturbation: float = 0.01
    thermal_u: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "cells", Extent3.of(self.cells))
        object.__setattr__(self, "super_cell", Extent3.of(self.super_cell))
        object.__setattr__(self, "dtype", np.dtype(self.dtype))
        if self.dt is None:
            object.__setattr__(self, "dt", default_dt(self.dx, self.dy, self.dz))
        limit = CFL_FACTOR * cfl_limit(self.dx, self.dy, self.dz)
        if self.dt > limit * (1 + 1e-12):
            raise ValueError(f"dt={self.dt} violates CFL bound {limit}")
        for c, s in zip(self.cells, self.super_cell):
            if c % s != 0:
                raise ValueError(
                    f"super cell {self.super_cell.as_tuple()} does not divide "
                    f"cells {self.cells.as_tuple()}"
                )
        if not self.species:
            object.__setattr__(self, "species", default_species(
                self.particles_per_cell))

    @property
    def frame_capacity(self) -> int:
        return self.super_cell.volume

    @property
    def super_cell_grid(self) -> Extent3:
        return Extent3(
            self.cells.x // self.super_cell.x,
            self.cells.y // self.super_cell.y,
            self.cells.z // self.super_cell.z,
        )

    @property
    def cell_volume(self) -> float:
        return self.dx * self.dy * self.dz


def default_species(ppc: int, mass_ratio: float = 1.0) -> tuple[Species, ...]:
    """Charge-neutral pair: electrons plus positive partners of mass_ratio."""
    w = 1.0 / ppc
    return (
        Species("electron", charge=-1.0, mass=1.0, weight=w),
        Species("ion", charge=1.0, mass=mass_ratio, weight=w),
    )
