"""Yee lattice fields: staggering, interpolation, and curl updates.

Charge lives on the cell-center lattice (tsc_weights assigns to the
{left, center, right} cells of the particle's cell). Relative to that
lattice the field components sit at the standard Yee staggered positions;
in cell units (a particle position is cell index + offset in [0,1)):

    rho[i,j,k] at (i+1/2, j+1/2, k+1/2)
    Ex,Jx      at (i+1,   j+1/2, k+1/2)    Bx at (i+1/2, j+1,   k+1  )
    Ey,Jy      at (i+1/2, j+1,   k+1/2)    By at (i+1,   j+1/2, k+1  )
    Ez,Jz      at (i+1/2, j+1/2, k+1  )    Bz at (i+1,   j+1,   k+1/2)

The curl stencils below are the textbook Yee updates; the discrete
divergence of B (face divergence at (i+1, j+1, k+1)) telescopes to exactly
zero under the Faraday update, and J is colocated with E so the Esirkepov
current drives Ampere's law cell-consistently. All boundaries are periodic.
"""

from __future__ import annotations

import numpy as np

# per-component stagger offsets in cell units, (x, y, z)
STAGGER = {
    "Ex": (1.0, 0.5, 0.5),
    "Ey": (0.5, 1.0, 0.5),
    "Ez": (0.5, 0.5, 1.0),
    "Bx": (0.5, 1.0, 1.0),
    "By": (1.0, 0.5, 1.0),
    "Bz": (1.0, 1.0, 0.5),
}

E_COMPONENTS = ("Ex", "Ey", "Ez")
B_COMPONENTS = ("Bx", "By", "Bz")
J_COMPONENTS = ("Jx", "Jy", "Jz")
ALL_COMPONENTS = E_COMPONENTS + B_COMPONENTS + J_COMPONENTS


class YeeFieldSet:
    """E, B, J component lattices over a periodic cell grid."""

    def __init__(self, cells, dx=1.0, dy=1.0, dz=1.0, dtype=np.float64):
        from ..workdiv import Extent3

        self.cells = Extent3.of(cells)
        self.dx, self.dy, self.dz = float(dx), float(dy), float(dz)
        self.dtype = np.dtype(dtype)
        shape = self.cells.as_tuple()
        for name in ALL_COMPONENTS:
            setattr(self, name, np.zeros(shape, dtype=self.dtype))

    @property
    def shape(self):
        return self.cells.as_tuple()

    def components(self, names=ALL_COMPONENTS):
        return tuple(getattr(self, n) for n in names)

    def copy(self) -> "YeeFieldSet":
        out = YeeFieldSet(self.cells, self.dx, self.dy, self.dz, self.dtype)
        for n in ALL_COMPONENTS:
            getattr(out, n)[:] = getattr(self, n)
        return out


def tsc_weights(offset: float):
    """Quadratic-spline (TSC) weights over the left/center/right cells.

    ``offset`` is the in-cell position in [0,1). The center weight is
    compensated so the triple sums to exactly 1.
    """
    if not 0.0 <= offset < 1.0:
        raise ValueError(f"offset {offset} outside [0, 1)")
    o = offset - 0.5
    wl = 0.5 * (0.5 - o) ** 2
    wr = 0.5 * (0.5 + o) ** 2
    return wl, 1.0 - wl - wr, wr


def _sample_trilinear(arr, px, py, pz, sx, sy, sz):
    nx, ny, nz = arr.shape
    tx, ty, tz = px - sx, py - sy, pz - sz
    ix, iy, iz = int(np.floor(tx)), int(np.floor(ty)), int(np.floor(tz))
    fx, fy, fz = tx - ix, ty - iy, tz - iz
    i0, i1 = ix % nx, (ix + 1) % nx
    j0, j1 = iy % ny, (iy + 1) % ny
    k0, k1 = iz % nz, (iz + 1) % nz
    c00 = arr[i0, j0, k0] * (1 - fx) + arr[i1, j0, k0] * fx
    c10 = arr[i0, j1, k0] * (1 - fx) + arr[i1, j1, k0] * fx
    c01 = arr[i0, j0, k1] * (1 - fx) + arr[i1, j0, k1] * fx
    c11 = arr[i0, j1, k1] * (1 - fx) + arr[i1, j1, k1] * fx
    return (c00 * (1 - fy) + c10 * fy) * (1 - fz) + (c01 * (1 - fy) + c11 * fy) * fz


def gather_fields(fields: YeeFieldSet, p):
    """Trilinearly interpolate (E, B) to the particle, honoring Yee offsets."""
    px = p.cell[0] + p.offset[0]
    py = p.cell[1] + p.offset[1]
    pz = p.cell[2] + p.offset[2]
    e = np.array(
        [
            _sample_trilinear(fields.Ex, px, py, pz, *STAGGER["Ex"]),
            _sample_trilinear(fields.Ey, px, py, pz, *STAGGER["Ey"]),
            _sample_trilinear(fields.Ez, px, py, pz, *STAGGER["Ez"]),
        ]
    )
    b = np.array(
        [
            _sample_trilinear(fields.Bx, px, py, pz, *STAGGER["Bx"]),
            _sample_trilinear(fields.By, px, py, pz, *STAGGER["By"]),
            _sample_trilinear(fields.Bz, px, py, pz, *STAGGER["Bz"]),
        ]
    )
    return e, b


def _dm(a, axis):
    """a - roll(a, +1): backward difference (value minus minus-neighbor)."""
    return a - np.roll(a, 1, axis=axis)


def _dp(a, axis):
    """roll(a, -1) - a: forward difference (plus-neighbor minus value)."""
    return np.roll(a, -1, axis=axis) - a


def yee_update_b(fields: YeeFieldSet, half_dt: float):
    """B <- B - half_dt * curl E (reference whole-grid implementation)."""
    Ex, Ey, Ez = fields.Ex, fields.Ey, fields.Ez
    dx, dy, dz = fields.dx, fields.dy, fields.dz
    fields.Bx -= half_dt * (_dp(Ez, 1) / dy - _dp(Ey, 2) / dz)
    fields.By -= half_dt * (_dp(Ex, 2) / dz - _dp(Ez, 0) / dx)
    fields.Bz -= half_dt * (_dp(Ey, 0) / dx - _dp(Ex, 1) / dy)


def yee_update_e(fields: YeeFieldSet, dt: float):
    """E <- E + dt * (curl B - J) (reference whole-grid implementation)."""
    Bx, By, Bz = fields.Bx, fields.By, fields.Bz
    dx, dy, dz = fields.dx, fields.dy, fields.dz
    fields.Ex += dt * (_dm(Bz, 1) / dy - _dm(By, 2) / dz - fields.Jx)
    fields.Ey += dt * (_dm(Bx, 2) / dz - _dm(Bz, 0) / dx - fields.Jy)
    fields.Ez += dt * (_dm(By, 0) / dx - _dm(Bx, 1) / dy - fields.Jz)


def div_b(fields: YeeFieldSet) -> np.ndarray:
    """Discrete face divergence of B (exactly preserved by yee_update_b)."""
    return (
        _dp(fields.Bx, 0) / fields.dx
        + _dp(fields.By, 1) / fields.dy
        + _dp(fields.Bz, 2) / fields.dz
    )


def div_j(fields: YeeFieldSet) -> np.ndarray:
    """Discrete divergence of J at the charge lattice sites."""
    return (
        _dm(fields.Jx, 0) / fields.dx
        + _dm(fields.Jy, 1) / fields.dy
        + _dm(fields.Jz, 2) / fields.dz
    )


def field_energy(fields: YeeFieldSet) -> float:
    """Sum over cells of (|E|^2 + |B|^2)/2 times the cell volume."""
    total = 0.0
    for n in E_COMPONENTS + B_COMPONENTS:
        a = getattr(fields, n)
        total += float(np.sum(a.astype(np.float64) ** 2))
    return 0.5 * total * fields.dx * fields.dy * fields.dz


def yee_dispersion_omega(k: float, delta: float, dt: float) -> float:
    """Angular frequency of the discrete vacuum mode along one axis.

    Solves sin^2(w*dt/2)/dt^2 = sin^2(k*delta/2)/delta^2 for w.
    """
    s = np.sin(k * delta / 2.0) * dt / delta
    if abs(s) > 1.0:
        raise ValueError("mode is evanescent at this dt (CFL violated)")
    return 2.0 * np.arcsin(s) / dt
