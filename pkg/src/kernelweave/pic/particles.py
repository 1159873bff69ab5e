"""Super-cell particle storage: fixed-capacity frames in doubly linked lists.

One store per species. Frames live in a growable pool of SoA numpy arrays
(rows are frames, columns are particle slots); prev/next links, per-frame
occupancy masks, and per-super-cell head/tail indices are integer arrays, so
the compiled kernels can walk a super cell's frame chain directly.

Canonical particle order (used by checkpoints and cross-backend comparison)
is: super cells ascending, frames in chain order, slots ascending.
"""

from __future__ import annotations

import numpy as np
from numba import njit

from ..workdiv import Extent3, linearize_3d
from .pusher import MacroParticle

# pool columns: positions/momenta/weight + gather and old-position scratch
_FLOAT_FIELDS = (
    "ox", "oy", "oz",      # in-cell offsets, [0,1)
    "ux", "uy", "uz",      # momentum, gamma*v
    "w",                   # macro-particle weight
    "epx", "epy", "epz",   # gathered E at the particle
    "bpx", "bpy", "bpz",   # gathered B at the particle
    "oox", "ooy", "ooz",   # pre-move offsets (deposition)
)
_INT_FIELDS = (
    "cx", "cy", "cz",      # cell index per axis
    "ocx", "ocy", "ocz",   # pre-move cell index
)


class SuperCellStore:
    def __init__(self, cells, super_cell, dtype=np.float64, initial_frames=16):
        self.cells = Extent3.of(cells)
        self.super_cell = Extent3.of(super_cell)
        self.sc_grid = Extent3(
            self.cells.x // self.super_cell.x,
            self.cells.y // self.super_cell.y,
            self.cells.z // self.super_cell.z,
        )
        self.n_super_cells = self.sc_grid.volume
        self.capacity = self.super_cell.volume
        self.dtype = np.dtype(dtype)

        f = max(4, initial_frames)
        for name in _FLOAT_FIELDS:
            setattr(self, name, np.zeros((f, self.capacity), dtype=self.dtype))
        for name in _INT_FIELDS:
            setattr(self, name, np.zeros((f, self.capacity), dtype=np.int32))
        self.occ = np.zeros((f, self.capacity), dtype=np.uint8)
        self.next_f = np.full(f, -1, dtype=np.int32)
        self.prev_f = np.full(f, -1, dtype=np.int32)
        self.owner = np.full(f, -1, dtype=np.int32)
        self.nfilled = np.zeros(f, dtype=np.int32)
        self.head = np.full(self.n_super_cells, -1, dtype=np.int32)
        self.tail = np.full(self.n_super_cells, -1, dtype=np.int32)
        self.free_stack = np.arange(f - 1, -1, -1, dtype=np.int32)
        self.free_top = np.array([f], dtype=np.int64)  # stack size

    # -- pool management ----------------------------------------------------
    @property
    def n_frames(self) -> int:
        return self.next_f.shape[0]

    @property
    def free_frames(self) -> int:
        return int(self.free_top[0])

    def grow(self, min_free: int):
        while self.free_frames < min_free:
            old = self.n_frames
            new = old * 2
            for name in _FLOAT_FIELDS:
                a = getattr(self, name)
                b = np.zeros((new, self.capacity), dtype=self.dtype)
                b[:old] = a
                setattr(self, name, b)
            for name in _INT_FIELDS:
                a = getattr(self, name)
                b = np.zeros((new, self.capacity), dtype=np.int32)
                b[:old] = a
                setattr(self, name, b)
            occ = np.zeros((new, self.capacity), dtype=np.uint8)
            occ[:old] = self.occ
            self.occ = occ
            for name, fill in (("next_f", -1), ("prev_f", -1), ("owner", -1),
                               ("nfilled", 0)):
                a = getattr(self, name)
                b = np.full(new, fill, dtype=np.int32)
                b[:old] = a
                setattr(self, name, b)
            stack = np.zeros(new, dtype=np.int32)
            top = self.free_frames
            stack[:top] = self.free_stack[:top]
            stack[top : top + (new - old)] = np.arange(new - 1, old - 1, -1,
                                                       dtype=np.int32)
            self.free_stack = stack
            self.free_top[0] = top + (new - old)

    def _alloc_frame(self, sc: int) -> int:
        if self.free_frames == 0:
            self.grow(1)
        self.free_top[0] -= 1
        f = int(self.free_stack[self.free_top[0]])
        self.owner[f] = sc
        self.next_f[f] = -1
        self.nfilled[f] = 0
        tail = int(self.tail[sc])
        self.prev_f[f] = tail
        if tail >= 0:
            self.next_f[tail] = f
        else:
            self.head[sc] = f
        self.tail[sc] = f
        return f

    # -- particle access ------------------------------------------------------
    def super_cell_of(self, cell) -> int:
        sc = (
            cell[0] // self.super_cell.x,
            cell[1] // self.super_cell.y,
            cell[2] // self.super_cell.z,
        )
        return linearize_3d(sc, self.sc_grid)

    def insert(self, p: MacroParticle) -> None:
        """Append one particle into its owning super cell (host-side path)."""
        sc = self.super_cell_of(p.cell)
        f = int(self.tail[sc])
        slot = -1
        if f >= 0 and self.nfilled[f] < self.capacity:
            slot = int(np.argmin(self.occ[f]))
        else:
            f = self._alloc_frame(sc)
            slot = 0
        self.occ[f, slot] = 1
        self.nfilled[f] += 1
        self.cx[f, slot], self.cy[f, slot], self.cz[f, slot] = p.cell
        self.ox[f, slot], self.oy[f, slot], self.oz[f, slot] = p.offset
        self.ux[f, slot], self.uy[f, slot], self.uz[f, slot] = p.u
        self.w[f, slot] = p.weight

    def frames_of(self, sc: int):
        """Frame indices of one super cell in chain order."""
        out = []
        f = int(self.head[sc])
        while f >= 0:
            out.append(f)
            f = int(self.next_f[f])
        return out

    def iter_particles(self):
        """(sc, frame, slot, MacroParticle) in canonical order; test helper."""
        for sc in range(self.n_super_cells):
            for f in self.frames_of(sc):
                for s in range(self.capacity):
                    if self.occ[f, s]:
                        yield sc, f, s, MacroParticle(
                            (int(self.cx[f, s]), int(self.cy[f, s]),
                             int(self.cz[f, s])),
                            (float(self.ox[f, s]), float(self.oy[f, s]),
                             float(self.oz[f, s])),
                            (float(self.ux[f, s]), float(self.uy[f, s]),
                             float(self.uz[f, s])),
                            float(self.w[f, s]),
                        )

    def census(self) -> int:
        return int(self.occ.sum())

    def packed(self, fields=("cx", "cy", "cz", "ox", "oy", "oz",
                             "ux", "uy", "uz", "w")):
        """Canonical-order particle record arrays, for bitwise comparison."""
        order_f, order_s = [], []
        for sc in range(self.n_super_cells):
            for f in self.frames_of(sc):
                for s in range(self.capacity):
                    if self.occ[f, s]:
                        order_f.append(f)
                        order_s.append(s)
        fi = np.asarray(order_f, dtype=np.int64)
        si = np.asarray(order_s, dtype=np.int64)
        return {name: getattr(self, name)[fi, si] for name in fields}

    def check_integrity(self):
        """Forward/backward chain agreement, ownership, occupancy counts."""
        seen = set()
        for sc in range(self.n_super_cells):
            fwd = self.frames_of(sc)
            bwd = []
            f = int(self.tail[sc])
            while f >= 0:
                bwd.append(f)
                f = int(self.prev_f[f])
            assert fwd == bwd[::-1], f"chain mismatch in super cell {sc}"
            for f in fwd:
                assert self.owner[f] == sc
                assert f not in seen, f"frame {f} linked twice"
                seen.add(f)
                assert self.nfilled[f] == int(self.occ[f].sum())
                for s in range(self.capacity):
                    if self.occ[f, s]:
                        assert self.super_cell_of(
                            (self.cx[f, s], self.cy[f, s], self.cz[f, s])
                        ) == sc, "particle outside owning super cell"
        n_free = self.free_frames
        assert n_free + len(seen) == self.n_frames, "frame leak"
        return True


@njit(cache=True)
def _scan_leavers(head, next_f, occ, nfilled, cx, cy, cz, scx, scy, scz,
                  gx, gy, out_f, out_s, out_dest):
    """Collect (frame, slot, destination sc) of particles that left their
    super cell, in canonical order. Returns the count."""
    n = 0
    for sc in range(head.shape[0]):
        f = head[sc]
        while f >= 0:
            if nfilled[f] > 0:
                for s in range(occ.shape[1]):
                    if occ[f, s]:
                        dsc = (cx[f, s] // scx) + gx * (
                            (cy[f, s] // scy) + gy * (cz[f, s] // scz)
                        )
                        if dsc != sc:
                            out_f[n] = f
                            out_s[n] = s
                            out_dest[n] = dsc
                            n += 1
            f = next_f[f]
    return n


@njit(cache=True)
def _apply_migration(count, mov_f, mov_s, mov_dest,
                     head, tail, next_f, prev_f, owner, nfilled, occ,
                     free_stack, free_top,
                     ox, oy, oz, ux, uy, uz, w, cx, cy, cz):
    """Relocate leavers into their destination super cells (sequential pass).

    The caller guarantees at least ``count`` free frames, so allocation never
    fails here. Insertion goes to the destination's tail frame, first free
    slot; a fresh frame is linked when the tail is full or absent.
    """
    for i in range(count):
        f = mov_f[i]
        s = mov_s[i]
        dsc = mov_dest[i]
        t = tail[dsc]
        slot = -1
        if t >= 0 and nfilled[t] < occ.shape[1]:
            for cand in range(occ.shape[1]):
                if occ[t, cand] == 0:
                    slot = cand
                    break
        else:
            free_top[0] -= 1
            t = free_stack[free_top[0]]
            owner[t] = dsc
            next_f[t] = -1
            nfilled[t] = 0
            old_tail = tail[dsc]
            prev_f[t] = old_tail
            if old_tail >= 0:
                next_f[old_tail] = t
            else:
                head[dsc] = t
            tail[dsc] = t
            slot = 0
        occ[t, slot] = 1
        nfilled[t] += 1
        ox[t, slot] = ox[f, s]
        oy[t, slot] = oy[f, s]
        oz[t, slot] = oz[f, s]
        ux[t, slot] = ux[f, s]
        uy[t, slot] = uy[f, s]
        uz[t, slot] = uz[f, s]
        w[t, slot] = w[f, s]
        cx[t, slot] = cx[f, s]
        cy[t, slot] = cy[f, s]
        cz[t, slot] = cz[f, s]
        occ[f, s] = 0
        nfilled[f] -= 1


@njit(cache=True)
def _unlink_empty(head, tail, next_f, prev_f, owner, nfilled,
                  free_stack, free_top):
    for sc in range(head.shape[0]):
        f = head[sc]
        while f >= 0:
            nxt = next_f[f]
            if nfilled[f] == 0:
                p, q = prev_f[f], next_f[f]
                if p >= 0:
                    next_f[p] = q
                else:
                    head[sc] = q
                if q >= 0:
                    prev_f[q] = p
                else:
                    tail[sc] = p
                owner[f] = -1
                next_f[f] = -1
                prev_f[f] = -1
                free_stack[free_top[0]] = f
                free_top[0] += 1
            f = nxt
    return 0


def migrate_particles(store: SuperCellStore) -> int:
    """Restore the frame-list invariant after a move: every particle whose
    cell left its super cell is relocated into the owning super cell.

    Runs as a deterministic global sequential pass. Returns the number of
    relocated particles.
    """
    census_bound = store.census()
    out_f = np.empty(max(1, census_bound), dtype=np.int32)
    out_s = np.empty(max(1, census_bound), dtype=np.int32)
    out_dest = np.empty(max(1, census_bound), dtype=np.int32)
    count = _scan_leavers(
        store.head, store.next_f, store.occ, store.nfilled,
        store.cx, store.cy, store.cz,
        store.super_cell.x, store.super_cell.y, store.super_cell.z,
        store.sc_grid.x, store.sc_grid.y,
        out_f, out_s, out_dest,
    )
    if count:
        store.grow(count)  # worst case: every leaver opens a new frame
        _apply_migration(
            count, out_f, out_s, out_dest,
            store.head, store.tail, store.next_f, store.prev_f, store.owner,
            store.nfilled, store.occ, store.free_stack, store.free_top,
            store.ox, store.oy, store.oz, store.ux, store.uy, store.uz,
            store.w, store.cx, store.cy, store.cz,
        )
    _unlink_empty(store.head, store.tail, store.next_f, store.prev_f,
                  store.owner, store.nfilled, store.free_stack, store.free_top)
    return int(count)
