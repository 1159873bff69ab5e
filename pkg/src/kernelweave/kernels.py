"""Stock kernels: the element-loop fill pattern plus counters and guards.

FillKernel is the canonical element-level kernel: each logical thread
computes its first linear index from the launch geometry and loops over its
element run. The same object runs unchanged on every backend and under both
the (T threads x 1 element) and (1 thread x T elements) divisions.
"""

from __future__ import annotations

import numpy as np
from numba import njit


class FillKernel:
    """Write a constant to every element this thread owns.

    data[id + elem] = value for elem in [0, elems_per_thread), with
    id = global linear element base of this thread. Out-of-range indices
    (division larger than the buffer) are skipped.
    """

    def __init__(self, value=42):
        self.value = value

    def __call__(self, ctx, data):
        base = ctx.global_element_base()
        end = min(base + ctx.elems_per_thread, data.shape[0])
        if base < end:
            data[base:end] = self.value


class CoverageKernel:
    """Fill plus per-slot atomic increments, for exactly-once coverage checks."""

    def __init__(self, value=42):
        self.value = value

    def __call__(self, ctx, data, guard):
        base = ctx.global_element_base()
        end = min(base + ctx.elems_per_thread, data.shape[0])
        if base < end:
            data[base:end] = self.value
            ctx.atomics.add_at(guard, np.arange(base, end), 1)


class InvocationCounterKernel:
    """Atomically counts kernel invocations (one per block-thread pair)."""

    def __call__(self, ctx, counter):
        ctx.atomics.add_u64(counter, 0, 1)


class BlockTagKernel:
    """Shared-memory isolation probe: tag the block arena, then verify it.

    Every thread writes the block id into its own shared slot, loops over
    its elements doing filler work, and finally checks that all slots of the
    block still hold its own id (never a concurrent block's).
    """

    def __call__(self, ctx, failures):
        tpb = ctx.work_division.threads_per_block
        tags = ctx.shared_alloc(np.int64, tpb)
        tags[ctx.thread_linear] = ctx.block_linear
        ctx.for_each_element(lambda x, y, z: None)
        seen = tags[ctx.thread_linear]
        if seen != ctx.block_linear:
            ctx.atomics.add_u64(failures, 0, 1)


@njit(nogil=True, cache=True)
def _boris_flat(ux, uy, uz, ex, ey, ez, bx, by, bz, qm_half_dt, lo, hi):
    for i in range(lo, hi):
        umx = ux[i] + qm_half_dt * ex
        umy = uy[i] + qm_half_dt * ey
        umz = uz[i] + qm_half_dt * ez
        gam = np.sqrt(1.0 + umx * umx + umy * umy + umz * umz)
        tx = qm_half_dt * bx / gam
        ty = qm_half_dt * by / gam
        tz = qm_half_dt * bz / gam
        tsq = tx * tx + ty * ty + tz * tz
        sx = 2.0 * tx / (1.0 + tsq)
        sy = 2.0 * ty / (1.0 + tsq)
        sz = 2.0 * tz / (1.0 + tsq)
        upx = umx + (umy * tz - umz * ty)
        upy = umy + (umz * tx - umx * tz)
        upz = umz + (umx * ty - umy * tx)
        ux[i] = umx + (upy * sz - upz * sy) + qm_half_dt * ex
        uy[i] = umy + (upz * sx - upx * sz) + qm_half_dt * ey
        uz[i] = umz + (upx * sy - upy * sx) + qm_half_dt * ez


class PushMicroKernel:
    """Boris rotation over a flat momentum array; bench workload kernel."""

    def __init__(self, e_field=(0.001, 0.0, 0.0), b_field=(0.0, 0.0, 0.5),
                 qm_half_dt=0.05):
        self.e = e_field
        self.b = b_field
        self.qm_half_dt = qm_half_dt

    def __call__(self, ctx, ux, uy, uz):
        base = ctx.global_element_base()
        end = min(base + ctx.elems_per_thread, ux.shape[0])
        if base < end:
            ex, ey, ez = self.e
            bx, by, bz = self.b
            _boris_flat(ux, uy, uz, ex, ey, ez, bx, by, bz,
                        self.qm_half_dt, base, end)
