"""Relativistic Boris momentum update and particle motion (reference path).

These single-particle functions are the documented contracts; the compiled
per-frame loops in kernels.py perform the identical arithmetic.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class MacroParticle:
    """cell index + in-cell offset per axis in [0,1), momentum u = gamma*v."""

    cell: tuple[int, int, int]
    offset: tuple[float, float, float]
    u: tuple[float, float, float]
    weight: float = 1.0


def lorentz_gamma(u) -> float:
    ux, uy, uz = u
    return float(np.sqrt(1.0 + ux * ux + uy * uy + uz * uz))


def boris_push(u, e_p, b_p, q: float, m: float, dt: float):
    """Half electric kick, magnetic rotation, half electric kick.

    Rotation uses t = q*dt*B/(2*m*gamma_minus), s = 2t/(1+|t|^2) with
    gamma_minus evaluated after the first half kick.
    """
    qm = q * dt / (2.0 * m)
    umx = u[0] + qm * e_p[0]
    umy = u[1] + qm * e_p[1]
    umz = u[2] + qm * e_p[2]
    gam = np.sqrt(1.0 + umx * umx + umy * umy + umz * umz)
    tx, ty, tz = qm * b_p[0] / gam, qm * b_p[1] / gam, qm * b_p[2] / gam
    tsq = tx * tx + ty * ty + tz * tz
    sx, sy, sz = 2.0 * tx / (1.0 + tsq), 2.0 * ty / (1.0 + tsq), 2.0 * tz / (1.0 + tsq)
    upx = umx + (umy * tz - umz * ty)
    upy = umy + (umz * tx - umx * tz)
    upz = umz + (umx * ty - umy * tx)
    return (
        umx + (upy * sz - upz * sy) + qm * e_p[0],
        umy + (upz * sx - upx * sz) + qm * e_p[1],
        umz + (upx * sy - upy * sx) + qm * e_p[2],
    )


def move_particle(p: MacroParticle, dt: float, cells, dx=1.0, dy=1.0, dz=1.0
                  ) -> MacroParticle:
    """Advance position by v*dt (v = u/gamma), renormalizing cell + offset.

    Periodic wrap on the global grid; CFL guarantees the per-axis
    displacement is below one cell.
    """
    gam = lorentz_gamma(p.u)
    deltas = (dx, dy, dz)
    n = tuple(cells)
    new_cell = []
    new_off = []
    for a in range(3):
        pos = p.offset[a] + p.u[a] / gam * dt / deltas[a]
        carry = int(np.floor(pos))
        new_off.append(pos - carry)
        new_cell.append((p.cell[a] + carry) % n[a])
    return MacroParticle(tuple(new_cell), tuple(new_off), p.u, p.weight)
