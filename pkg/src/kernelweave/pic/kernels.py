"""Compiled PIC stage kernels: one block per super cell.

Each kernel object computes its slot range from the launch geometry
(thread_linear * elems_per_thread, exactly the element-base formula) and
hands the range to a nogil compiled loop, so the identical object runs under
the (1 thread x 256 elements) CPU division and the (256 threads x 1 element)
GPU-style division. Particle kernels walk the super cell's frame chain and
process their slot range in every frame; cell kernels map slots to the super
cell's cells, x fastest.

Cross-super-cell accumulation (the deposition halo) goes exclusively through
the atomics table: the per-invocation tile is merged with a grouped atomic
dense add per J component.
"""

from __future__ import annotations

import numpy as np
from numba import njit

from ..atomics import ATOMICS
from ..errors import ContractViolation
from .fields import STAGGER


@njit(nogil=True, cache=True, inline="always")
def _sample(arr, px, py, pz, sx, sy, sz, nx, ny, nz):
    tx = px - sx
    ty = py - sy
    tz = pz - sz
    ix = int(np.floor(tx))
    iy = int(np.floor(ty))
    iz = int(np.floor(tz))
    fx = tx - ix
    fy = ty - iy
    fz = tz - iz
    i0 = ix % nx
    i1 = (ix + 1) % nx
    j0 = iy % ny
    j1 = (iy + 1) % ny
    k0 = iz % nz
    k1 = (iz + 1) % nz
    c00 = arr[i0, j0, k0] * (1 - fx) + arr[i1, j0, k0] * fx
    c10 = arr[i0, j1, k0] * (1 - fx) + arr[i1, j1, k0] * fx
    c01 = arr[i0, j0, k1] * (1 - fx) + arr[i1, j0, k1] * fx
    c11 = arr[i0, j1, k1] * (1 - fx) + arr[i1, j1, k1] * fx
    return (c00 * (1 - fy) + c10 * fy) * (1 - fz) + (c01 * (1 - fy) + c11 * fy) * fz


_SG = np.array([STAGGER[n] for n in ("Ex", "Ey", "Ez", "Bx", "By", "Bz")])


@njit(nogil=True, cache=True)
def _gather(head, next_f, occ, ox, oy, oz, cx, cy, cz,
            epx, epy, epz, bpx, bpy, bpz,
            Ex, Ey, Ez, Bx, By, Bz, sg, sc, lo, hi):
    nx, ny, nz = Ex.shape
    f = head[sc]
    while f >= 0:
        for s in range(lo, hi):
            if occ[f, s]:
                px = cx[f, s] + ox[f, s]
                py = cy[f, s] + oy[f, s]
                pz = cz[f, s] + oz[f, s]
                epx[f, s] = _sample(Ex, px, py, pz, sg[0, 0], sg[0, 1], sg[0, 2],
                                    nx, ny, nz)
                epy[f, s] = _sample(Ey, px, py, pz, sg[1, 0], sg[1, 1], sg[1, 2],
                                    nx, ny, nz)
                epz[f, s] = _sample(Ez, px, py, pz, sg[2, 0], sg[2, 1], sg[2, 2],
                                    nx, ny, nz)
                bpx[f, s] = _sample(Bx, px, py, pz, sg[3, 0], sg[3, 1], sg[3, 2],
                                    nx, ny, nz)
                bpy[f, s] = _sample(By, px, py, pz, sg[4, 0], sg[4, 1], sg[4, 2],
                                    nx, ny, nz)
                bpz[f, s] = _sample(Bz, px, py, pz, sg[5, 0], sg[5, 1], sg[5, 2],
                                    nx, ny, nz)
        f = next_f[f]


@njit(nogil=True, cache=True)
def _push(head, next_f, occ, epx, epy, epz, bpx, bpy, bpz,
          ux, uy, uz, qm_half_dt, sc, lo, hi):
    f = head[sc]
    while f >= 0:
        for s in range(lo, hi):
            if occ[f, s]:
                umx = ux[f, s] + qm_half_dt * epx[f, s]
                umy = uy[f, s] + qm_half_dt * epy[f, s]
                umz = uz[f, s] + qm_half_dt * epz[f, s]
                gam = np.sqrt(1.0 + umx * umx + umy * umy + umz * umz)
                tx = qm_half_dt * bpx[f, s] / gam
                ty = qm_half_dt * bpy[f, s] / gam
                tz = qm_half_dt * bpz[f, s] / gam
                tsq = tx * tx + ty * ty + tz * tz
                sx = 2.0 * tx / (1.0 + tsq)
                sy = 2.0 * ty / (1.0 + tsq)
                sz = 2.0 * tz / (1.0 + tsq)
                upx = umx + (umy * tz - umz * ty)
                upy = umy + (umz * tx - umx * tz)
                upz = umz + (umx * ty - umy * tx)
                ux[f, s] = umx + (upy * sz - upz * sy) + qm_half_dt * epx[f, s]
                uy[f, s] = umy + (upz * sx - upx * sz) + qm_half_dt * epy[f, s]
                uz[f, s] = umz + (upx * sy - upy * sx) + qm_half_dt * epz[f, s]
        f = next_f[f]


@njit(nogil=True, cache=True)
def _move(head, next_f, occ, ox, oy, oz, cx, cy, cz,
          oox, ooy, ooz, ocx, ocy, ocz, ux, uy, uz,
          dt_dx, dt_dy, dt_dz, nx, ny, nz, sc, lo, hi):
    f = head[sc]
    while f >= 0:
        for s in range(lo, hi):
            if occ[f, s]:
                oox[f, s] = ox[f, s]
                ooy[f, s] = oy[f, s]
                ooz[f, s] = oz[f, s]
                ocx[f, s] = cx[f, s]
                ocy[f, s] = cy[f, s]
                ocz[f, s] = cz[f, s]
                gam = np.sqrt(1.0 + ux[f, s] * ux[f, s] + uy[f, s] * uy[f, s]
                              + uz[f, s] * uz[f, s])
                px = ox[f, s] + ux[f, s] / gam * dt_dx
                py = oy[f, s] + uy[f, s] / gam * dt_dy
                pz = oz[f, s] + uz[f, s] / gam * dt_dz
                dx_i = int(np.floor(px))
                dy_i = int(np.floor(py))
                dz_i = int(np.floor(pz))
                ox[f, s] = px - dx_i
                oy[f, s] = py - dy_i
                oz[f, s] = pz - dz_i
                cx[f, s] = (cx[f, s] + dx_i) % nx
                cy[f, s] = (cy[f, s] + dy_i) % ny
                cz[f, s] = (cz[f, s] + dz_i) % nz
        f = next_f[f]


@njit(nogil=True, cache=True, inline="always")
def _shape5_into(x, out):
    for idx in range(5):
        d = x - (idx - 2 + 0.5)
        if d < 0:
            d = -d
        if d < 0.5:
            out[idx] = 0.75 - d * d
        elif d < 1.5:
            e = 1.5 - d
            out[idx] = 0.5 * e * e
        else:
            out[idx] = 0.0


@njit(nogil=True, cache=True)
def _deposit_collect(head, next_f, occ, oox, ooy, ooz, ocx, ocy, ocz,
                     ox, oy, oz, cx, cy, cz, w,
                     fx, fy, fz, nx, ny, nz, org_x, org_y, org_z,
                     tx_n, ty_n, tz_n, sc, lo, hi):
    """Per-axis density-decomposition currents of this slot range, into a
    local tile covering the super cell plus a 2-cell halo. Returns (tile,
    error count); errors count particles that moved a full cell or more."""
    tile = np.zeros((3, tx_n, ty_n, tz_n), dtype=w.dtype)
    s0x = np.empty(5, dtype=w.dtype)
    s0y = np.empty(5, dtype=w.dtype)
    s0z = np.empty(5, dtype=w.dtype)
    s1x = np.empty(5, dtype=w.dtype)
    s1y = np.empty(5, dtype=w.dtype)
    s1z = np.empty(5, dtype=w.dtype)
    errors = 0
    f = head[sc]
    while f >= 0:
        for s in range(lo, hi):
            if occ[f, s]:
                dcx = cx[f, s] - ocx[f, s]
                if dcx > 1:
                    dcx -= nx
                elif dcx < -1:
                    dcx += nx
                dcy = cy[f, s] - ocy[f, s]
                if dcy > 1:
                    dcy -= ny
                elif dcy < -1:
                    dcy += ny
                dcz = cz[f, s] - ocz[f, s]
                if dcz > 1:
                    dcz -= nz
                elif dcz < -1:
                    dcz += nz
                if (dcx > 1 or dcx < -1 or dcy > 1 or dcy < -1
                        or dcz > 1 or dcz < -1):
                    errors += 1
                    continue
                _shape5_into(oox[f, s], s0x)
                _shape5_into(ooy[f, s], s0y)
                _shape5_into(ooz[f, s], s0z)
                _shape5_into(dcx + ox[f, s], s1x)
                _shape5_into(dcy + oy[f, s], s1y)
                _shape5_into(dcz + oz[f, s], s1z)
                lx = ocx[f, s] - org_x
                ly = ocy[f, s] - org_y
                lz = ocz[f, s] - org_z
                ww = w[f, s]
                # combined 5-point support is nonzero only on [lo, hi] per
                # axis; skipping the exact-zero remainder is bitwise neutral
                lox = 1 + min(dcx, 0)
                hix = 3 + max(dcx, 0)
                loy = 1 + min(dcy, 0)
                hiy = 3 + max(dcy, 0)
                loz = 1 + min(dcz, 0)
                hiz = 3 + max(dcz, 0)
                # x-currents: cumulate DSx against the y/z transverse factor
                for j1 in range(loy, hiy + 1):
                    dsy = s1y[j1] - s0y[j1]
                    for j2 in range(loz, hiz + 1):
                        dsz = s1z[j2] - s0z[j2]
                        tr = (s0y[j1] * s0z[j2]
                              + 0.5 * dsy * s0z[j2]
                              + 0.5 * s0y[j1] * dsz
                              + dsy * dsz / 3.0) * fx * ww
                        acc = 0.0
                        for ja in range(lox, min(hix, 3) + 1):
                            acc += (s1x[ja] - s0x[ja]) * tr
                            tile[0, lx + ja, ly + j1, lz + j2] += acc
                # y-currents
                for j1 in range(loz, hiz + 1):
                    dsz = s1z[j1] - s0z[j1]
                    for j2 in range(lox, hix + 1):
                        dsx = s1x[j2] - s0x[j2]
                        tr = (s0z[j1] * s0x[j2]
                              + 0.5 * dsz * s0x[j2]
                              + 0.5 * s0z[j1] * dsx
                              + dsz * dsx / 3.0) * fy * ww
                        acc = 0.0
                        for ja in range(loy, min(hiy, 3) + 1):
                            acc += (s1y[ja] - s0y[ja]) * tr
                            tile[1, lx + j2, ly + ja, lz + j1] += acc
                # z-currents
                for j1 in range(lox, hix + 1):
                    dsx = s1x[j1] - s0x[j1]
                    for j2 in range(loy, hiy + 1):
                        dsy = s1y[j2] - s0y[j2]
                        tr = (s0x[j1] * s0y[j2]
                              + 0.5 * dsx * s0y[j2]
                              + 0.5 * s0x[j1] * dsy
                              + dsx * dsy / 3.0) * fz * ww
                        acc = 0.0
                        for ja in range(loz, min(hiz, 3) + 1):
                            acc += (s1z[ja] - s0z[ja]) * tr
                            tile[2, lx + j1, ly + j2, lz + ja] += acc
        f = next_f[f]
    return tile, errors


@njit(nogil=True, cache=True)
def _faraday(Ex, Ey, Ez, Bx, By, Bz, half_dt, dx, dy, dz,
             org_x, org_y, org_z, scx, scy, scz, lo, hi):
    nx, ny, nz = Ex.shape
    for slot in range(lo, hi):
        i = org_x + slot % scx
        j = org_y + (slot // scx) % scy
        k = org_z + slot // (scx * scy)
        ip = (i + 1) % nx
        jp = (j + 1) % ny
        kp = (k + 1) % nz
        Bx[i, j, k] -= half_dt * ((Ez[i, jp, k] - Ez[i, j, k]) / dy
                                  - (Ey[i, j, kp] - Ey[i, j, k]) / dz)
        By[i, j, k] -= half_dt * ((Ex[i, j, kp] - Ex[i, j, k]) / dz
                                  - (Ez[ip, j, k] - Ez[i, j, k]) / dx)
        Bz[i, j, k] -= half_dt * ((Ey[ip, j, k] - Ey[i, j, k]) / dx
                                  - (Ex[i, jp, k] - Ex[i, j, k]) / dy)


@njit(nogil=True, cache=True)
def _ampere(Ex, Ey, Ez, Bx, By, Bz, Jx, Jy, Jz, dt, dx, dy, dz,
            org_x, org_y, org_z, scx, scy, scz, lo, hi):
    nx, ny, nz = Ex.shape
    for slot in range(lo, hi):
        i = org_x + slot % scx
        j = org_y + (slot // scx) % scy
        k = org_z + slot // (scx * scy)
        im = (i - 1) % nx
        jm = (j - 1) % ny
        km = (k - 1) % nz
        Ex[i, j, k] += dt * ((Bz[i, j, k] - Bz[i, jm, k]) / dy
                             - (By[i, j, k] - By[i, j, km]) / dz - Jx[i, j, k])
        Ey[i, j, k] += dt * ((Bx[i, j, k] - Bx[i, j, km]) / dz
                             - (Bz[i, j, k] - Bz[im, j, k]) / dx - Jy[i, j, k])
        Ez[i, j, k] += dt * ((By[i, j, k] - By[im, j, k]) / dx
                             - (Bx[i, j, k] - Bx[i, jm, k]) / dy - Jz[i, j, k])


@njit(cache=True)
def _rho_tsc(occ, owner, ox, oy, oz, cx, cy, cz, w, rho, q_inv_vol):
    """Single-threaded TSC charge deposit over the whole pool (validation)."""
    nx, ny, nz = rho.shape
    for f in range(occ.shape[0]):
        if owner[f] >= 0:
            for s in range(occ.shape[1]):
                if occ[f, s]:
                    o = ox[f, s] - 0.5
                    wxl = 0.5 * (0.5 - o) ** 2
                    wxr = 0.5 * (0.5 + o) ** 2
                    wxc = 1.0 - wxl - wxr
                    o = oy[f, s] - 0.5
                    wyl = 0.5 * (0.5 - o) ** 2
                    wyr = 0.5 * (0.5 + o) ** 2
                    wyc = 1.0 - wyl - wyr
                    o = oz[f, s] - 0.5
                    wzl = 0.5 * (0.5 - o) ** 2
                    wzr = 0.5 * (0.5 + o) ** 2
                    wzc = 1.0 - wzl - wzr
                    qw = q_inv_vol * w[f, s]
                    i0 = (cx[f, s] - 1) % nx
                    i1 = cx[f, s] % nx
                    i2 = (cx[f, s] + 1) % nx
                    j0 = (cy[f, s] - 1) % ny
                    j1 = cy[f, s] % ny
                    j2 = (cy[f, s] + 1) % ny
                    k0 = (cz[f, s] - 1) % nz
                    k1 = cz[f, s] % nz
                    k2 = (cz[f, s] + 1) % nz
                    for a, wa, ia in ((0, wxl, i0), (1, wxc, i1), (2, wxr, i2)):
                        for b, wb, jb in ((0, wyl, j0), (1, wyc, j1), (2, wyr, j2)):
                            rho[ia, jb, k0] += qw * wa * wb * wzl
                            rho[ia, jb, k1] += qw * wa * wb * wzc
                            rho[ia, jb, k2] += qw * wa * wb * wzr
    return 0


class _SlotRangeKernel:
    """Base: map this invocation to (super cell, slot range)."""

    __slots__ = ()

    @staticmethod
    def slot_range(ctx, limit):
        lo = ctx.thread_linear * ctx.elems_per_thread
        hi = min(lo + ctx.elems_per_thread, limit)
        return lo, hi


class GatherKernel(_SlotRangeKernel):
    def __call__(self, ctx, head, next_f, occ, ox, oy, oz, cx, cy, cz,
                 epx, epy, epz, bpx, bpy, bpz, Ex, Ey, Ez, Bx, By, Bz, sg):
        lo, hi = self.slot_range(ctx, occ.shape[1])
        if lo < hi:
            _gather(head, next_f, occ, ox, oy, oz, cx, cy, cz,
                    epx, epy, epz, bpx, bpy, bpz,
                    Ex, Ey, Ez, Bx, By, Bz, sg, ctx.block_linear, lo, hi)


class PushKernel(_SlotRangeKernel):
    def __init__(self, qm_half_dt):
        self.qm_half_dt = qm_half_dt

    def __call__(self, ctx, head, next_f, occ, epx, epy, epz, bpx, bpy, bpz,
                 ux, uy, uz):
        lo, hi = self.slot_range(ctx, occ.shape[1])
        if lo < hi:
            _push(head, next_f, occ, epx, epy, epz, bpx, bpy, bpz,
                  ux, uy, uz, self.qm_half_dt, ctx.block_linear, lo, hi)


class MoveKernel(_SlotRangeKernel):
    def __init__(self, dt_dx, dt_dy, dt_dz, cells):
        self.dt_d = (dt_dx, dt_dy, dt_dz)
        self.cells = tuple(cells)

    def __call__(self, ctx, head, next_f, occ, ox, oy, oz, cx, cy, cz,
                 oox, ooy, ooz, ocx, ocy, ocz, ux, uy, uz):
        lo, hi = self.slot_range(ctx, occ.shape[1])
        if lo < hi:
            _move(head, next_f, occ, ox, oy, oz, cx, cy, cz,
                  oox, ooy, ooz, ocx, ocy, ocz, ux, uy, uz,
                  self.dt_d[0], self.dt_d[1], self.dt_d[2],
                  self.cells[0], self.cells[1], self.cells[2],
                  ctx.block_linear, lo, hi)


class DepositKernel(_SlotRangeKernel):
    """Esirkepov currents into J through grouped atomic dense adds."""

    def __init__(self, factors, cells, origins, maps, tile_shape):
        self.factors = factors          # (-q*w-less per-axis factors, see sim)
        self.cells = tuple(cells)
        self.origins = origins          # (S, 3) super-cell origin cells
        self.maps = maps                # per-axis wrapped index maps, (S, n+4)
        self.tile_shape = tile_shape

    def __call__(self, ctx, head, next_f, occ, oox, ooy, ooz, ocx, ocy, ocz,
                 ox, oy, oz, cx, cy, cz, w, Jx, Jy, Jz):
        lo, hi = self.slot_range(ctx, occ.shape[1])
        if lo >= hi:
            return
        sc = ctx.block_linear
        org = self.origins[sc]
        tile, errors = _deposit_collect(
            head, next_f, occ, oox, ooy, ooz, ocx, ocy, ocz,
            ox, oy, oz, cx, cy, cz, w,
            self.factors[0], self.factors[1], self.factors[2],
            self.cells[0], self.cells[1], self.cells[2],
            org[0], org[1], org[2],
            self.tile_shape[0], self.tile_shape[1], self.tile_shape[2],
            sc, lo, hi,
        )
        if errors:
            raise ContractViolation(
                f"{errors} particle(s) moved a full cell or more before deposit"
            )
        mx, my, mz = self.maps[0][sc], self.maps[1][sc], self.maps[2][sc]
        ATOMICS.add_dense(Jx, tile[0], mx, my, mz)
        ATOMICS.add_dense(Jy, tile[1], mx, my, mz)
        ATOMICS.add_dense(Jz, tile[2], mx, my, mz)


class FaradayHalfKernel:
    def __init__(self, half_dt, deltas, origins, super_cell):
        self.half_dt = half_dt
        self.deltas = deltas
        self.origins = origins
        self.super_cell = tuple(super_cell)

    def __call__(self, ctx, Ex, Ey, Ez, Bx, By, Bz):
        scx, scy, scz = self.super_cell
        n = scx * scy * scz
        lo = ctx.thread_linear * ctx.elems_per_thread
        hi = min(lo + ctx.elems_per_thread, n)
        if lo < hi:
            org = self.origins[ctx.block_linear]
            _faraday(Ex, Ey, Ez, Bx, By, Bz, self.half_dt,
                     self.deltas[0], self.deltas[1], self.deltas[2],
                     org[0], org[1], org[2], scx, scy, scz, lo, hi)


class AmpereKernel:
    def __init__(self, dt, deltas, origins, super_cell):
        self.dt = dt
        self.deltas = deltas
        self.origins = origins
        self.super_cell = tuple(super_cell)

    def __call__(self, ctx, Ex, Ey, Ez, Bx, By, Bz, Jx, Jy, Jz):
        scx, scy, scz = self.super_cell
        n = scx * scy * scz
        lo = ctx.thread_linear * ctx.elems_per_thread
        hi = min(lo + ctx.elems_per_thread, n)
        if lo < hi:
            org = self.origins[ctx.block_linear]
            _ampere(Ex, Ey, Ez, Bx, By, Bz, Jx, Jy, Jz, self.dt,
                    self.deltas[0], self.deltas[1], self.deltas[2],
                    org[0], org[1], org[2], scx, scy, scz, lo, hi)
