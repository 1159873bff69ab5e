"""The PIC cycle: gather -> push -> move -> deposit -> migrate -> field update.

Every stage is a kernel launched with one block per super cell on the
simulation's backend; the work-division strategy chooses between the CPU
mapping (one thread, 256 elements per block) and the GPU-style mapping (256
threads, one element). Migration runs as a deterministic sequential host
pass between deposit and the field update.
"""

from __future__ import annotations

import math

import numpy as np

from ..backends import SerialBackend
from ..kernel import launch
from ..workdiv import make_work_division
from .fields import YeeFieldSet, div_b, div_j, field_energy
from .kernels import (
    _SG,
    AmpereKernel,
    DepositKernel,
    FaradayHalfKernel,
    GatherKernel,
    MoveKernel,
    PushKernel,
    _rho_tsc,
)
from .params import SimParams, default_species
from .particles import SuperCellStore, migrate_particles

STRATEGIES = ("elements", "threads")


def _near_cubic_factors(n: int) -> tuple[int, int, int]:
    """Deterministic factorization of n into a balanced (px, py, pz)."""
    best = (n, 1, 1)
    best_score = n
    for px in range(1, n + 1):
        if n % px:
            continue
        rest = n // px
        for py in range(1, rest + 1):
            if rest % py:
                continue
            pz = rest // py
            score = max(px, py, pz) - min(px, py, pz)
            if score < best_score:
                best_score = score
                best = (px, py, pz)
    return best


class Simulation:
    """Fields + per-species super-cell stores + prebuilt stage kernels."""

    def __init__(self, params: SimParams, backend=None, strategy="elements",
                 validate=True):
        if strategy not in STRATEGIES:
            raise ValueError(f"strategy must be one of {STRATEGIES}")
        self.params = params
        self.backend = backend if backend is not None else SerialBackend()
        self.strategy = strategy
        self.validate = validate
        self.step_count = 0
        self.last_residual = 0.0

        p = params
        self.fields = YeeFieldSet(p.cells, p.dx, p.dy, p.dz, p.dtype)
        self.stores = [
            SuperCellStore(p.cells, p.super_cell, dtype=p.dtype)
            for _ in p.species
        ]

        grid = p.super_cell_grid
        n_sc = grid.volume
        sc = p.super_cell
        self.origins = np.zeros((n_sc, 3), dtype=np.int64)
        for s in range(n_sc):
            bx = s % grid.x
            by = (s // grid.x) % grid.y
            bz = s // (grid.x * grid.y)
            self.origins[s] = (bx * sc.x, by * sc.y, bz * sc.z)
        # wrapped tile->grid index maps (tile covers super cell + 2-cell halo)
        cells = p.cells.as_tuple()
        sct = sc.as_tuple()
        self.maps = tuple(
            np.stack([
                (self.origins[s, a] - 2 + np.arange(sct[a] + 4)) % cells[a]
                for s in range(n_sc)
            ]).astype(np.int64)
            for a in range(3)
        )
        self.tile_shape = (sct[0] + 4, sct[1] + 4, sct[2] + 4)

        deltas = (p.dx, p.dy, p.dz)
        vol = p.cell_volume
        self._gather = GatherKernel()
        self._move = MoveKernel(p.dt / p.dx, p.dt / p.dy, p.dt / p.dz, cells)
        self._push = [
            PushKernel(s.charge * p.dt / (2.0 * s.mass)) for s in p.species
        ]
        self._deposit = [
            DepositKernel(
                tuple(-s.charge * deltas[a] / (p.dt * vol) for a in range(3)),
                cells, self.origins, self.maps, self.tile_shape,
            )
            for s in p.species
        ]
        self._faraday = FaradayHalfKernel(p.dt / 2.0, deltas, self.origins, sct)
        self._ampere = AmpereKernel(p.dt, deltas, self.origins, sct)
        self._rho_prev = None
        self._wd = None

    # -- launch plumbing ------------------------------------------------------
    def work_division(self):
        if self._wd is None:
            grid = self.params.super_cell_grid
            sc = self.params.super_cell
            if self.strategy == "elements":
                self._wd = make_work_division(grid, (1, 1, 1), sc)
            else:
                self._wd = make_work_division(grid, sc, (1, 1, 1))
        return self._wd

    def _particle_args(self, store):
        return (store.head, store.next_f, store.occ)

    def _launch(self, kernel, args):
        launch(self.backend, self.work_division(), kernel, args).wait()

    # -- the PIC cycle ------------------------------------------------------
    def step(self):
        f = self.fields
        if self.validate and self._rho_prev is None:
            self._rho_prev = self.charge_density()
        f.Jx[:] = 0
        f.Jy[:] = 0
        f.Jz[:] = 0
        for i, store in enumerate(self.stores):
            base = self._particle_args(store)
            self._launch(self._gather, base + (
                store.ox, store.oy, store.oz, store.cx, store.cy, store.cz,
                store.epx, store.epy, store.epz, store.bpx, store.bpy,
                store.bpz, f.Ex, f.Ey, f.Ez, f.Bx, f.By, f.Bz, _SG,
            ))
            self._launch(self._push[i], base + (
                store.epx, store.epy, store.epz, store.bpx, store.bpy,
                store.bpz, store.ux, store.uy, store.uz,
            ))
            self._launch(self._move, base + (
                store.ox, store.oy, store.oz, store.cx, store.cy, store.cz,
                store.oox, store.ooy, store.ooz, store.ocx, store.ocy,
                store.ocz, store.ux, store.uy, store.uz,
            ))
            self._launch(self._deposit[i], base + (
                store.oox, store.ooy, store.ooz, store.ocx, store.ocy,
                store.ocz, store.ox, store.oy, store.oz, store.cx, store.cy,
                store.cz, store.w, f.Jx, f.Jy, f.Jz,
            ))
        for store in self.stores:
            migrate_particles(store)
        field_args = (f.Ex, f.Ey, f.Ez, f.Bx, f.By, f.Bz)
        self._launch(self._faraday, field_args)
        self._launch(self._ampere, field_args + (f.Jx, f.Jy, f.Jz))
        self._launch(self._faraday, field_args)
        if self.validate:
            rho_new = self.charge_density()
            residual = np.abs(
                (rho_new - self._rho_prev) / self.params.dt
                + div_j(f).astype(np.float64)
            ).max()
            self.last_residual = float(residual)
            self._rho_prev = rho_new
        self.step_count += 1

    def run(self, steps: int):
        for _ in range(steps):
            self.step()

    # -- validation / diagnostics ---------------------------------------------
    def charge_density(self) -> np.ndarray:
        rho = np.zeros(self.params.cells.as_tuple(), dtype=np.float64)
        for sp, store in zip(self.params.species, self.stores):
            _rho_tsc(store.occ, store.owner, store.ox, store.oy, store.oz,
                     store.cx, store.cy, store.cz, store.w, rho,
                     sp.charge / self.params.cell_volume)
        return rho

    def census(self) -> int:
        return sum(store.census() for store in self.stores)

    def kinetic_energy(self) -> float:
        total = 0.0
        for sp, store in zip(self.params.species, self.stores):
            m = store.occ != 0
            if not m.any():
                continue
            ux = store.ux[m].astype(np.float64)
            uy = store.uy[m].astype(np.float64)
            uz = store.uz[m].astype(np.float64)
            gam = np.sqrt(1.0 + ux * ux + uy * uy + uz * uz)
            total += sp.mass * float(
                np.sum((gam - 1.0) * store.w[m].astype(np.float64))
            )
        return total

    def total_charge(self) -> float:
        total = 0.0
        for sp, store in zip(self.params.species, self.stores):
            m = store.occ != 0
            total += sp.charge * float(store.w[m].astype(np.float64).sum())
        return total

    def diagnostics(self) -> dict:
        f = self.fields
        db = div_b(f)
        return {
            "total_charge": self.total_charge(),
            "field_energy": field_energy(f),
            "kinetic_energy": self.kinetic_energy(),
            "max_div_b": float(np.abs(db).max()),
            "max_continuity_residual": self.last_residual,
        }

    def total_energy(self) -> float:
        return field_energy(self.fields) + self.kinetic_energy()


def diagnostics(sim: Simulation) -> dict:
    return sim.diagnostics()


def step(sim: Simulation) -> None:
    sim.step()


def init_khi(params: SimParams, seed: int = 0, backend=None,
             strategy="elements", validate=True) -> Simulation:
    """Kelvin-Helmholtz setup: two counter-streaming layers split along y
    with a sinusoidal v_y perturbation (one wavelength across x), uniform
    density, quiet-start placement, charge-neutral species pairs, E = B = 0.
    """
    sim = Simulation(params, backend=backend, strategy=strategy,
                     validate=validate)
    p = params
    ppc = p.particles_per_cell
    px, py, pz = _near_cubic_factors(ppc)
    # per-cell quiet-start sub-lattice, x fastest
    sub = np.stack(
        [
            np.tile((np.arange(px) + 0.5) / px, py * pz),
            np.tile(np.repeat((np.arange(py) + 0.5) / py, px), pz),
            np.repeat((np.arange(pz) + 0.5) / pz, px * py),
        ],
        axis=1,
    )

    sc = p.super_cell
    grid = p.super_cell_grid
    cap = p.frame_capacity
    half_y = p.cells.y // 2
    lx = p.cells.x * p.dx
    v0 = p.stream_velocity
    amp = p.perturbation

    # local cell coordinates within a super cell, x fastest
    loc = np.zeros((cap, 3), dtype=np.int64)
    for s in range(cap):
        loc[s] = (s % sc.x, (s // sc.x) % sc.y, s // (sc.x * sc.y))

    rng = np.random.default_rng(seed)
    n_per_sc = cap * ppc
    for sp_i, (species, store) in enumerate(zip(p.species, sim.stores)):
        jitter = None
        if p.thermal_u > 0:
            sp_rng = np.random.default_rng((seed, sp_i))
            jitter = sp_rng
        for s in range(grid.volume):
            org = sim.origins[s]
            cells_xyz = loc + org  # (cap, 3)
            cx = np.repeat(cells_xyz[:, 0], ppc)
            cy = np.repeat(cells_xyz[:, 1], ppc)
            cz = np.repeat(cells_xyz[:, 2], ppc)
            ox = np.tile(sub[:, 0], cap)
            oy = np.tile(sub[:, 1], cap)
            oz = np.tile(sub[:, 2], cap)
            x_abs = (cx + ox) * p.dx
            vx = np.where(cy < half_y, v0, -v0)
            vy = amp * np.sin(2.0 * math.pi * x_abs / lx)
            vz = np.zeros_like(vx)
            gam = 1.0 / np.sqrt(1.0 - (vx * vx + vy * vy + vz * vz))
            ux, uy, uz = vx * gam, vy * gam, vz * gam
            if jitter is not None:
                ux = ux + jitter.normal(0.0, p.thermal_u, n_per_sc)
                uy = uy + jitter.normal(0.0, p.thermal_u, n_per_sc)
                uz = uz + jitter.normal(0.0, p.thermal_u, n_per_sc)
            _bulk_fill(store, s, cx, cy, cz, ox, oy, oz, ux, uy, uz,
                       species.weight)
    del rng
    return sim


def _bulk_fill(store: SuperCellStore, sc: int, cx, cy, cz, ox, oy, oz,
               ux, uy, uz, weight: float) -> None:
    """Pack one super cell's particles densely into fresh frames, in order."""
    n = cx.shape[0]
    cap = store.capacity
    frames = (n + cap - 1) // cap
    store.grow(frames)
    dtype = store.dtype
    for k in range(frames):
        f = store._alloc_frame(sc)
        a, b = k * cap, min((k + 1) * cap, n)
        cnt = b - a
        store.cx[f, :cnt] = cx[a:b]
        store.cy[f, :cnt] = cy[a:b]
        store.cz[f, :cnt] = cz[a:b]
        store.ox[f, :cnt] = ox[a:b].astype(dtype)
        store.oy[f, :cnt] = oy[a:b].astype(dtype)
        store.oz[f, :cnt] = oz[a:b].astype(dtype)
        store.ux[f, :cnt] = ux[a:b].astype(dtype)
        store.uy[f, :cnt] = uy[a:b].astype(dtype)
        store.uz[f, :cnt] = uz[a:b].astype(dtype)
        store.w[f, :cnt] = weight
        store.occ[f, :cnt] = 1
        store.nfilled[f] = cnt
