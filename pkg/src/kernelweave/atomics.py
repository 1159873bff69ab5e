"""Atomic operations on numpy-backed cells.

CPython offers no hardware CAS on shared array memory, so the CAS primitive
is made atomic with one lock per backing buffer; floating-point atomic adds
are then built the way fast GPU runtimes emulate them: a compare-and-swap
retry loop on the integer image of the float. Bulk variants (add_at,
add_dense) take the same per-buffer lock, so they are mutually atomic with
the scalar operations on the same buffer.
"""

from __future__ import annotations

import threading
import weakref

import numpy as np
from numba import njit

# RLock: weakref prune callbacks may fire via GC inside _lock_for itself.
_registry_guard = threading.RLock()
_locks: dict[int, tuple] = {}  # id(root) -> (weakref-or-None, Lock)


def _root(a: np.ndarray):
    while isinstance(a.base, np.ndarray):
        a = a.base
    return a


def _prune(dead_ref, key):
    with _registry_guard:
        entry = _locks.get(key)
        if entry is not None and entry[0] is dead_ref:
            del _locks[key]


def _lock_for(arr: np.ndarray) -> threading.Lock:
    root = _root(arr)
    key = id(root)
    with _registry_guard:
        entry = _locks.get(key)
        if entry is not None:
            ref, lock = entry
            if ref is None or ref() is not None:
                return lock
        try:
            ref = weakref.ref(root, lambda r, k=key: _prune(r, k))
        except TypeError:
            ref = None  # non-weakref-able root: entry stays until id reuse
        lock = threading.Lock()
        _locks[key] = (ref, lock)
        return lock


def _f64_bits(v: float) -> int:
    return int(np.float64(v).view(np.uint64))


def _bits_f64(b: int) -> float:
    return float(np.uint64(b).view(np.float64))


def _f32_bits(v: float) -> int:
    return int(np.float32(v).view(np.uint32))


def _bits_f32(b: int) -> float:
    return float(np.uint32(b).view(np.float32))


def atomic_cas_u64(arr: np.ndarray, index, expected: int, desired: int) -> int:
    """Atomically: if cell == expected then cell := desired. Returns old value.

    ``arr`` must have 8-byte elements; the cell is operated on as a u64 image.
    """
    u = arr.view(np.uint64)
    with _lock_for(arr):
        old = int(u[index])
        if old == expected:
            u[index] = desired
        return old


def atomic_cas_u32(arr: np.ndarray, index, expected: int, desired: int) -> int:
    """32-bit counterpart of atomic_cas_u64 (4-byte elements)."""
    u = arr.view(np.uint32)
    with _lock_for(arr):
        old = int(u[index])
        if old == expected:
            u[index] = desired
        return old


def atomic_exch_u64(arr: np.ndarray, index, desired: int) -> int:
    """Atomic unconditional 64-bit swap; returns the prior value."""
    u = arr.view(np.uint64)
    with _lock_for(arr):
        old = int(u[index])
        u[index] = desired
        return old


def atomic_add_f64(arr: np.ndarray, index, operand: float) -> float:
    """Atomic double add via a CAS retry loop on the 64-bit image.

    Returns the value observed before the add. No backoff on failure;
    contention at desk scale is modest.
    """
    u = arr.view(np.uint64)
    while True:
        old_bits = int(u[index])
        new_bits = _f64_bits(_bits_f64(old_bits) + operand)
        if atomic_cas_u64(arr, index, old_bits, new_bits) == old_bits:
            return _bits_f64(old_bits)


def atomic_add_f32(arr: np.ndarray, index, operand: float) -> float:
    """Atomic float add via a CAS retry loop on the 32-bit image."""
    u = arr.view(np.uint32)
    while True:
        old_bits = int(u[index])
        new_bits = _f32_bits(_bits_f32(old_bits) + np.float32(operand))
        if atomic_cas_u32(arr, index, old_bits, new_bits) == old_bits:
            return _bits_f32(old_bits)


def atomic_add_u64(arr: np.ndarray, index, operand: int) -> int:
    """Atomic native integer add; returns the prior value."""
    u = arr.view(np.uint64)
    with _lock_for(arr):
        old = int(u[index])
        u[index] = np.uint64((old + int(operand)) & (2**64 - 1))
        return old


def atomic_add_at(arr: np.ndarray, indices, values) -> None:
    """Grouped atomic adds: arr.flat[indices[i]] += values[i] for all i.

    Executed as one critical section on the buffer's lock, i.e. as if the
    element-wise atomic adds ran back to back without interleaving.
    """
    flat = arr.reshape(-1)
    with _lock_for(arr):
        np.add.at(flat, indices, values)


@njit(cache=True)
def _dense_add_3d(target, tile, mx, my, mz):
    for i in range(mx.shape[0]):
        for j in range(my.shape[0]):
            for k in range(mz.shape[0]):
                target[mx[i], my[j], mz[k]] += tile[i, j, k]


def atomic_add_dense(target: np.ndarray, tile: np.ndarray, mx, my, mz) -> None:
    """Grouped atomic adds of a dense 3D tile through per-axis index maps.

    target[mx[i], my[j], mz[k]] += tile[i, j, k]; one critical section on the
    target's buffer lock. Used for deposition-halo accumulation where the
    maps carry the periodic wrap.
    """
    with _lock_for(target):
        _dense_add_3d(target, tile, mx, my, mz)


class AtomicOps:
    """Capability table handed to kernels through the accelerator context."""

    cas_u64 = staticmethod(atomic_cas_u64)
    cas_u32 = staticmethod(atomic_cas_u32)
    exch_u64 = staticmethod(atomic_exch_u64)
    add_f64 = staticmethod(atomic_add_f64)
    add_f32 = staticmethod(atomic_add_f32)
    add_u64 = staticmethod(atomic_add_u64)
    add_at = staticmethod(atomic_add_at)
    add_dense = staticmethod(atomic_add_dense)
    lock_for = staticmethod(_lock_for)


ATOMICS = AtomicOps()
