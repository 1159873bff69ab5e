"""Execution engines mapping the abstract hierarchy onto host parallelism.

Three back-ends:

* Serial            — blocks run in ascending linear order on the calling
                      thread; the determinism oracle.
* BlockPool         — one logical thread per block (elements carry the
                      intra-block work), blocks distributed over a worker
                      pool; the evaluated CPU mapping.
* CooperativeBlockThreads — many logical threads per block with working
                      barriers, for validating GPU-style kernels on host.

Block scheduling inside BlockPool is dynamic self-scheduling off a shared
counter; the choice is not observable in results (asserted by equivalence
tests). CooperativeBlockThreads runs barrier-declaring kernels with one OS
thread per logical thread (blocks one at a time), and multiplexes
barrier-free kernels sequentially, distributing blocks over the pool.
"""

from __future__ import annotations

import os
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

from .errors import CapabilityError
from .kernel import (
    DEFAULT_SHARED_ARENA_BYTES,
    AcceleratorContext,
    CompletionToken,
    SharedArena,
    _MultiplexedBarrier,
    _NoopBarrier,
    launch,
    thread_coords,
)
from .workdiv import WorkDivision, delinearize_3d

__all__ = [
    "Capabilities",
    "Backend",
    "SerialBackend",
    "BlockPoolBackend",
    "CooperativeBlockThreadsBackend",
    "make_backend",
    "capabilities",
    "default_worker_count",
    "launch",
]

WORKERS_ENV = "KW_WORKERS"


def default_worker_count() -> int:
    env = os.environ.get(WORKERS_ENV)
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


@dataclass(frozen=True)
class Capabilities:
    max_threads_per_block: int
    shared_arena_bytes: int


class Backend:
    """Common backend state: capabilities and an optional worker pool."""

    kind = "abstract"

    def __init__(self, workers=None, shared_arena_bytes=DEFAULT_SHARED_ARENA_BYTES,
                 debug=False):
        self.worker_count = int(workers) if workers else default_worker_count()
        self._shared_bytes = int(shared_arena_bytes)
        self.debug = debug
        self._pool = None
        self._pool_lock = threading.Lock()

    @property
    def capabilities(self) -> Capabilities:
        return Capabilities(self._max_threads_per_block(), self._shared_bytes)

    def _max_threads_per_block(self) -> int:
        raise NotImplementedError

    def _execute(self, wd, kernel, args) -> CompletionToken:
        raise NotImplementedError

    def _executor(self) -> ThreadPoolExecutor:
        with self._pool_lock:
            if self._pool is None:
                self._pool = ThreadPoolExecutor(
                    max_workers=self.worker_count,
                    thread_name_prefix=f"kw-{self.kind}",
                )
            return self._pool

    def close(self):
        with self._pool_lock:
            if self._pool is not None:
                self._pool.shutdown(wait=True)
                self._pool = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def _arena(self) -> SharedArena:
        return SharedArena(self._shared_bytes, poison=self.debug)

    def _run_blocks_over_pool(self, wd, kernel, args) -> CompletionToken:
        """Dynamic self-scheduling of single-worker blocks over the pool."""
        state = _LaunchState(wd.blocks)
        grid = wd.grid_blocks

        def worker():
            while True:
                b = state.next_block()
                if b is None:
                    return
                try:
                    _run_block_single_thread(
                        wd, kernel, args, delinearize_3d(b, grid), self._arena()
                    )
                except Exception as exc:
                    state.fail(exc)
                    return

        pool = self._executor()
        futures = [
            pool.submit(worker) for _ in range(min(self.worker_count, wd.blocks))
        ]
        for f in futures:
            f.result()
        return CompletionToken.resolved(state.error)

    def __repr__(self):
        return f"<{type(self).__name__} workers={self.worker_count}>"


def _run_block_single_thread(wd, kernel, args, block_idx, arena):
    """One block whose logical threads run sequentially on the caller."""
    tpb = wd.threads_per_block
    if tpb == 1:
        ctx = AcceleratorContext(wd, block_idx, (0, 0, 0), arena, _NoopBarrier())
        kernel(ctx, *args)
        return
    barrier = _MultiplexedBarrier()
    for tidx in thread_coords(wd.block_threads):
        ctx = AcceleratorContext(wd, block_idx, tidx, arena, barrier)
        kernel(ctx, *args)


class _LaunchState:
    """Per-launch block queue with first-error cancellation."""

    __slots__ = ("blocks", "_next", "_lock", "error", "cancelled")

    def __init__(self, blocks):
        self.blocks = blocks
        self._next = 0
        self._lock = threading.Lock()
        self.error = None
        self.cancelled = False

    def next_block(self):
        with self._lock:
            if self.cancelled or self._next >= self.blocks:
                return None
            b = self._next
            self._next += 1
            return b

    def fail(self, exc):
        with self._lock:
            if self.error is None:
                self.error = exc
            self.cancelled = True


class SerialBackend(Backend):
    """Deterministic oracle: ascending block order, calling thread only."""

    kind = "serial"

    def __init__(self, shared_arena_bytes=DEFAULT_SHARED_ARENA_BYTES, debug=False):
        super().__init__(workers=1, shared_arena_bytes=shared_arena_bytes, debug=debug)

    def _max_threads_per_block(self) -> int:
        return 1

    def _execute(self, wd, kernel, args) -> CompletionToken:
        try:
            for b in range(wd.blocks):
                block_idx = delinearize_3d(b, wd.grid_blocks)
                _run_block_single_thread(wd, kernel, args, block_idx, self._arena())
        except Exception as exc:  # started block drained by definition
            return CompletionToken.resolved(exc)
        return CompletionToken.resolved()


class BlockPoolBackend(Backend):
    """Blocks over a worker pool; one logical thread per block."""

    kind = "blockpool"

    def _max_threads_per_block(self) -> int:
        return 1

    def _execute(self, wd, kernel, args) -> CompletionToken:
        return self._run_blocks_over_pool(wd, kernel, args)


class CooperativeBlockThreadsBackend(Backend):
    """GPU-style blocks of concurrent threads with working barriers."""

    kind = "coop"

    def __init__(self, workers=None, max_threads_per_block=1024,
                 shared_arena_bytes=DEFAULT_SHARED_ARENA_BYTES, debug=False,
                 barrier_timeout=None):
        super().__init__(workers=workers, shared_arena_bytes=shared_arena_bytes,
                         debug=debug)
        self._max_tpb = max(256, int(max_threads_per_block))
        # Debug builds detect divergent barriers by timing out instead of hanging.
        self.barrier_timeout = barrier_timeout if barrier_timeout else (
            30.0 if debug else None
        )

    def _max_threads_per_block(self) -> int:
        return self._max_tpb

    def _execute(self, wd, kernel, args) -> CompletionToken:
        if getattr(kernel, "needs_block_sync", False) and wd.threads_per_block > 1:
            return self._execute_concurrent(wd, kernel, args)
        return self._run_blocks_over_pool(wd, kernel, args)

    def _execute_concurrent(self, wd, kernel, args) -> CompletionToken:
        tpb = wd.threads_per_block
        coords = thread_coords(wd.block_threads)
        timeout = self.barrier_timeout
        first_error = []

        with ThreadPoolExecutor(max_workers=tpb, thread_name_prefix="kw-coop-blk") as pool:
            for b in range(wd.blocks):
                if first_error:
                    break  # cancel unstarted blocks
                block_idx = delinearize_3d(b, wd.grid_blocks)
                arena = self._arena()
                barrier = threading.Barrier(tpb)
                if timeout is not None:
                    barrier = _TimeoutBarrier(barrier, timeout)

                def run_thread(tidx, _arena=arena, _barrier=barrier, _bidx=block_idx):
                    ctx = AcceleratorContext(wd, _bidx, tidx, _arena, _barrier)
                    kernel(ctx, *args)

                futures = [pool.submit(run_thread, t) for t in coords]
                for f in futures:  # started block drains fully
                    try:
                        f.result()
                    except Exception as exc:
                        if not first_error:
                            first_error.append(exc)
        return CompletionToken.resolved(first_error[0] if first_error else None)


class _TimeoutBarrier:
    """Wraps threading.Barrier to report divergent barrier use in debug mode."""

    __slots__ = ("_barrier", "_timeout")

    def __init__(self, barrier, timeout):
        self._barrier = barrier
        self._timeout = timeout

    def wait(self):
        try:
            return self._barrier.wait(self._timeout)
        except threading.BrokenBarrierError:
            raise RuntimeError(
                "block barrier timed out: divergent sync_block_threads use "
                "(not all block threads reached the barrier)"
            ) from None


_BACKENDS = {
    "serial": SerialBackend,
    "blockpool": BlockPoolBackend,
    "coop": CooperativeBlockThreadsBackend,
}


def make_backend(name: str, workers=None, **kwargs) -> Backend:
    """Backend by CLI name: "serial", "blockpool", or "coop"."""
    try:
        cls = _BACKENDS[name]
    except KeyError:
        raise ValueError(
            f"unknown backend {name!r}; choose from {sorted(_BACKENDS)}"
        ) from None
    if cls is SerialBackend:
        return cls(**kwargs)
    return cls(workers=workers, **kwargs)


def capabilities(backend: Backend) -> Capabilities:
    """Constant capability record for the backend instance's lifetime."""
    return backend.capabilities
