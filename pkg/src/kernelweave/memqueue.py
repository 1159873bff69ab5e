"""Buffers, copies, and ordered queues.

Device buffers of CPU back-ends are host-memory-backed but distinct
allocations, never aliases of host buffers, so a forgotten copy shows up as
wrong data instead of silently working. Operations enqueued on one queue
complete in enqueue order; distinct queues are unordered relative to each
other.
"""

from __future__ import annotations

import enum
import threading
from collections import deque

import numpy as np

from .errors import AllocationError, BufferMismatchError, CapabilityError
from .kernel import CompletionToken, launch
from .workdiv import Extent3, WorkDivision


class Residency(enum.Enum):
    HOST = "host"
    DEVICE = "device"


class Buffer:
    """Typed 3D-extent allocation with fixed residency."""

    __slots__ = ("dtype", "extent", "residency", "device", "array", "_pending")

    def __init__(self, dtype, extent: Extent3, residency: Residency, device=None):
        self.dtype = np.dtype(dtype)
        self.extent = Extent3.of(extent)
        self.residency = residency
        self.device = device
        try:
            self.array = np.empty(self.extent.volume, dtype=self.dtype)
        except (MemoryError, ValueError) as exc:
            raise AllocationError(
                f"cannot allocate {self.extent.volume} x {self.dtype}: {exc}"
            ) from exc
        self._pending = 0  # enqueued-but-unfinished ops referencing this buffer

    @property
    def byte_length(self) -> int:
        return self.extent.volume * self.dtype.itemsize

    @property
    def pending_ops(self) -> int:
        return self._pending

    def __repr__(self):
        return (
            f"<Buffer {self.dtype} {self.extent.as_tuple()} "
            f"{self.residency.value} pending={self._pending}>"
        )


def alloc(residency: Residency, dtype, extent, device=None) -> Buffer:
    """New buffer with unspecified contents; failures raise AllocationError."""
    return Buffer(dtype, extent, residency, device)


class Queue:
    """FIFO of copies and kernel launches executed by a dedicated worker."""

    def __init__(self, backend):
        self.backend = backend
        self._ops = deque()
        self._cv = threading.Condition()
        self._unfinished = 0
        self._first_error = None
        self._closed = False
        self._worker = threading.Thread(target=self._run, daemon=True,
                                        name="kw-queue")
        self._worker.start()

    def _run(self):
        while True:
            with self._cv:
                while not self._ops and not self._closed:
                    self._cv.wait()
                if not self._ops and self._closed:
                    return
                fn, token, buffers = self._ops.popleft()
            error = None
            try:
                fn()
            except Exception as exc:
                error = exc
            token._resolve(error)
            with self._cv:
                for b in buffers:
                    b._pending -= 1
                if error is not None and self._first_error is None:
                    self._first_error = error
                self._unfinished -= 1
                self._cv.notify_all()

    def _enqueue(self, fn, buffers=()) -> CompletionToken:
        token = CompletionToken()
        with self._cv:
            if self._closed:
                raise RuntimeError("queue is closed")
            for b in buffers:
                b._pending += 1
            self._ops.append((fn, token, buffers))
            self._unfinished += 1
            self._cv.notify_all()
        return token

    def wait(self):
        """Block until the queue drains; re-raises the first op failure."""
        with self._cv:
            while self._unfinished:
                self._cv.wait()
            if self._first_error is not None:
                err, self._first_error = self._first_error, None
                raise err

    def close(self):
        with self._cv:
            self._closed = True
            self._cv.notify_all()
        self._worker.join()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def copy(queue: Queue, dst: Buffer, src: Buffer) -> CompletionToken:
    """Enqueue dst := src; endpoints must agree in element type and extent."""
    if dst.dtype != src.dtype:
        raise BufferMismatchError(f"dtype mismatch: {dst.dtype} vs {src.dtype}")
    if dst.extent != src.extent:
        raise BufferMismatchError(
            f"extent mismatch: {dst.extent.as_tuple()} vs {src.extent.as_tuple()}"
        )
    return queue._enqueue(lambda: np.copyto(dst.array, src.array), (dst, src))


def enqueue_kernel(queue: Queue, wd: WorkDivision, kernel, args=()) -> CompletionToken:
    """Kernel launch with queue ordering; capability-checked before enqueue."""
    caps = queue.backend.capabilities
    if wd.threads_per_block > caps.max_threads_per_block:
        raise CapabilityError(
            f"block of {wd.threads_per_block} threads exceeds backend limit "
            f"{caps.max_threads_per_block}"
        )
    buffers = tuple(a for a in args if isinstance(a, Buffer))

    def run():
        launch(queue.backend, wd, kernel, args).wait()

    return queue._enqueue(run, buffers)


def wait(queue: Queue):
    """Block until all previously enqueued operations completed."""
    queue.wait()
