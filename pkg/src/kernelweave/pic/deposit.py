"""Charge-conserving current deposition (density decomposition, TSC shape).

For a particle moving less than one cell per axis, the per-axis 5-point
shape differences decompose the charge motion into per-axis current
contributions whose running sums land on the J lattice such that

    (rho_new - rho_old)/dt + div J == 0

holds exactly per cell (up to floating-point rounding) with rho the
TSC-deposited charge density. This module is the single-particle reference
implementation; kernels.py carries the identical compiled arithmetic.
"""

from __future__ import annotations

import numpy as np

from ..errors import ContractViolation
from .fields import YeeFieldSet, tsc_weights
from .pusher import MacroParticle


def _shape5(x: float) -> np.ndarray:
    """TSC weights to cells j in {-2..2} for a position x in (-1, 2)
    relative to the reference cell (x is cell-local: cell + offset)."""
    w = np.zeros(5)
    for idx, j in enumerate(range(-2, 3)):
        d = abs(x - (j + 0.5))
        if d < 0.5:
            w[idx] = 0.75 - d * d
        elif d < 1.5:
            w[idx] = 0.5 * (1.5 - d) ** 2
    return w


def _wrap_delta(c1: int, c0: int, n: int) -> int:
    d = c1 - c0
    if d > 1:
        d -= n
    elif d < -1:
        d += n
    return d


def esirkepov_deposit(p_old: MacroParticle, p_new: MacroParticle, q: float,
                      w: float, fields: YeeFieldSet, dt: float) -> None:
    """Accumulate the particle's current onto fields.J (host reference)."""
    n = fields.cells.as_tuple()
    dc = [_wrap_delta(p_new.cell[a], p_old.cell[a], n[a]) for a in range(3)]
    for a in range(3):
        if abs(dc[a]) > 1 or not (0.0 <= p_new.offset[a] < 1.0):
            raise ContractViolation(
                f"displacement of {dc[a]} cells along axis {a} (must be < 1 cell)"
            )

    s0 = [_shape5(p_old.offset[a]) for a in range(3)]
    s1 = [_shape5(dc[a] + p_new.offset[a]) for a in range(3)]
    ds = [s1[a] - s0[a] for a in range(3)]

    deltas = (fields.dx, fields.dy, fields.dz)
    vol = fields.dx * fields.dy * fields.dz
    targets = (fields.Jx, fields.Jy, fields.Jz)

    for axis in range(3):
        t1, t2 = (axis + 1) % 3, (axis + 2) % 3
        fa = -q * deltas[axis] / (dt * vol)
        target = targets[axis]
        for j1 in range(5):
            for j2 in range(5):
                # evaluation order mirrors the compiled kernel bit for bit
                transverse = (
                    s0[t1][j1] * s0[t2][j2]
                    + 0.5 * ds[t1][j1] * s0[t2][j2]
                    + 0.5 * s0[t1][j1] * ds[t2][j2]
                    + ds[t1][j1] * ds[t2][j2] / 3.0
                ) * fa * w
                acc = 0.0
                for ja in range(4):  # running sum; closes to 0 at ja == 4
                    acc += ds[axis][ja] * transverse
                    idx = [0, 0, 0]
                    idx[axis] = (p_old.cell[axis] - 2 + ja) % n[axis]
                    idx[t1] = (p_old.cell[t1] - 2 + j1) % n[t1]
                    idx[t2] = (p_old.cell[t2] - 2 + j2) % n[t2]
                    target[tuple(idx)] += acc


def deposit_charge(fields_shape, particles, dx=1.0, dy=1.0, dz=1.0) -> np.ndarray:
    """TSC charge density of (q, MacroParticle) pairs; independent oracle."""
    nx, ny, nz = tuple(fields_shape)
    rho = np.zeros((nx, ny, nz))
    inv_vol = 1.0 / (dx * dy * dz)
    for q, p in particles:
        wx = tsc_weights(p.offset[0])
        wy = tsc_weights(p.offset[1])
        wz = tsc_weights(p.offset[2])
        for a, jx in enumerate((-1, 0, 1)):
            for b, jy in enumerate((-1, 0, 1)):
                for c, jz in enumerate((-1, 0, 1)):
                    rho[
                        (p.cell[0] + jx) % nx,
                        (p.cell[1] + jy) % ny,
                        (p.cell[2] + jz) % nz,
                    ] += q * p.weight * wx[a] * wy[b] * wz[c] * inv_vol
    return rho
