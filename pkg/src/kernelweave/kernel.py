"""Kernel contract and in-kernel services.

A kernel is a callable object invoked once per logical (block, thread) pair
with an accelerator context as first argument; element iteration inside the
invocation is the kernel body's responsibility. The context exposes the
launch work division, this thread's indices, block-shared memory, the block
barrier, and the atomic capability table.

Kernels that call sync_block_threads must declare ``needs_block_sync = True``
as a class attribute so back-ends give every logical thread of a block its
own worker; undeclared kernels may be multiplexed sequentially, where a
barrier call raises instead of deadlocking.
"""

from __future__ import annotations

import threading

import numpy as np

from .atomics import ATOMICS
from .errors import CapabilityError, ContractViolation, SharedArenaError
from .workdiv import WorkDivision, delinearize_3d, linearize_3d

DEFAULT_SHARED_ARENA_BYTES = 48 * 1024


class CompletionToken:
    """Resolves when all invocations of a launch finished; carries the first error."""

    __slots__ = ("_event", "_error")

    def __init__(self):
        self._event = threading.Event()
        self._error = None

    def _resolve(self, error=None):
        self._error = error
        self._event.set()

    def done(self) -> bool:
        return self._event.is_set()

    def exception(self):
        self._event.wait()
        return self._error

    def wait(self, timeout=None):
        """Block until resolution; re-raises the first kernel failure."""
        if not self._event.wait(timeout):
            raise TimeoutError("launch did not complete within timeout")
        if self._error is not None:
            raise self._error

    @classmethod
    def resolved(cls, error=None) -> "CompletionToken":
        tok = cls()
        tok._resolve(error)
        return tok


class SharedArena:
    """Per-block byte arena backing static shared-memory allocations.

    All threads of a block observe the same storage. Threads must perform
    identical allocation sequences (the static __shared__ model): the k-th
    allocation of every thread maps to the same slice. Contents start
    uninitialized (zero here, by construction of the backing buffer, but
    kernels must not rely on that).
    """

    __slots__ = ("capacity", "_buf", "_allocs", "_used", "_lock", "_poison")

    def __init__(self, capacity: int, poison: bool = False):
        self.capacity = capacity
        self._buf = None
        self._allocs = []  # (offset, dtype, count)
        self._used = 0
        self._lock = threading.Lock()
        self._poison = poison

    def get(self, call_index: int, dtype, count: int) -> np.ndarray:
        dtype = np.dtype(dtype)
        nbytes = dtype.itemsize * count
        with self._lock:
            if call_index < len(self._allocs):
                off, adtype, acount = self._allocs[call_index]
                if adtype != dtype or acount != count:
                    raise SharedArenaError(
                        "shared allocation sequence differs between block threads: "
                        f"call {call_index} saw {acount}x{adtype}, now {count}x{dtype}"
                    )
            else:
                align = dtype.itemsize
                off = (self._used + align - 1) // align * align
                if off + nbytes > self.capacity:
                    raise SharedArenaError(
                        f"shared arena exhausted: need {nbytes} bytes at offset {off}, "
                        f"capacity {self.capacity}"
                    )
                if self._buf is None:
                    self._buf = np.empty(self.capacity, dtype=np.uint8)
                    if self._poison:  # debug aid: expose read-before-write bugs
                        self._buf.fill(0xA5)
                self._allocs.append((off, dtype, count))
                self._used = off + nbytes
            return self._buf[off : off + nbytes].view(dtype)


class _MultiplexedBarrier:
    """Barrier handle for sequentially multiplexed blocks: any use is an error."""

    __slots__ = ()

    def wait(self):
        raise ContractViolation(
            "sync_block_threads called, but this kernel was multiplexed onto one "
            "worker; declare `needs_block_sync = True` on the kernel object"
        )


class _NoopBarrier:
    """Single-thread blocks synchronize trivially."""

    __slots__ = ()

    def wait(self):
        return 0


class AcceleratorContext:
    """Per-invocation view of the execution hierarchy.

    Confined to one logical thread for the duration of one kernel
    invocation; back-ends may reuse the object afterwards, so kernels must
    not retain it.
    """

    __slots__ = (
        "work_division",
        "block_idx",
        "thread_idx",
        "_arena",
        "_barrier",
        "_shared_calls",
        "block_linear",
        "thread_linear",
    )

    atomics = ATOMICS

    def __init__(self, wd: WorkDivision, block_idx, thread_idx, arena, barrier):
        self.work_division = wd
        self.block_idx = block_idx
        self.thread_idx = thread_idx
        self._arena = arena
        self._barrier = barrier
        self._shared_calls = 0
        self.block_linear = linearize_3d(block_idx, wd.grid_blocks)
        self.thread_linear = linearize_3d(thread_idx, wd.block_threads)

    # -- index queries ----------------------------------------------------
    @property
    def grid_dim(self):
        return self.work_division.grid_blocks

    @property
    def block_dim(self):
        return self.work_division.block_threads

    @property
    def elem_dim(self):
        return self.work_division.thread_elems

    @property
    def elems_per_thread(self) -> int:
        return self.work_division.elems_per_thread

    def local_element_base(self) -> int:
        """First intra-block linear element index owned by this thread."""
        return self.thread_linear * self.work_division.elems_per_thread

    def global_element_base(self) -> int:
        """First global linear element index owned by this thread."""
        wd = self.work_division
        return (
            self.block_linear * wd.threads_per_block + self.thread_linear
        ) * wd.elems_per_thread

    # -- in-kernel services -------------------------------------------------
    def for_each_element(self, body):
        """Invoke body(ex, ey, ez) once per element coordinate, x fastest."""
        ex, ey, ez = self.work_division.thread_elems
        for z in range(ez):
            for y in range(ey):
                for x in range(ex):
                    body(x, y, z)

    def sync_block_threads(self):
        self._barrier.wait()

    def shared_alloc(self, dtype, count: int) -> np.ndarray:
        """Block-shared mutable view of ``count`` elements of ``dtype``.

        Same storage for all threads of the block; distinct across blocks.
        """
        view = self._arena.get(self._shared_calls, dtype, count)
        self._shared_calls += 1
        return view


def for_each_element(ctx: AcceleratorContext, body):
    ctx.for_each_element(body)


def sync_block_threads(ctx: AcceleratorContext):
    ctx.sync_block_threads()


def shared_alloc(ctx: AcceleratorContext, dtype, count: int) -> np.ndarray:
    return ctx.shared_alloc(dtype, count)


def _unwrap_args(args):
    # Buffers from the memory module pass through as their raw arrays.
    out = []
    for a in args:
        out.append(a.array if hasattr(a, "array") and hasattr(a, "residency") else a)
    return tuple(out)


def launch(backend, wd: WorkDivision, kernel, args=()) -> CompletionToken:
    """Run ``kernel`` once per (block, thread) pair of ``wd`` on ``backend``.

    Capability violations reject the launch before any invocation. A kernel
    failure cancels unstarted blocks; started blocks drain, and the token
    carries the first error.
    """
    if not isinstance(wd, WorkDivision):
        raise TypeError("wd must be a WorkDivision")
    caps = backend.capabilities
    if wd.threads_per_block > caps.max_threads_per_block:
        raise CapabilityError(
            f"block of {wd.threads_per_block} threads exceeds backend limit "
            f"{caps.max_threads_per_block}"
        )
    return backend._execute(wd, kernel, _unwrap_args(args))


def thread_coords(extent) -> list[tuple[int, int, int]]:
    """All thread coordinates of a block extent in linear (x-fastest) order."""
    n = extent.volume
    return [delinearize_3d(i, extent) for i in range(n)]
