"""CUDA-shaped veneer over buffers, queues, and kernel launches.

A program written against the familiar malloc / memcpy / launch / synchronize
quartet ports by constructing a Facade over the chosen backend. Kernels must
follow the element-loop pattern (index through the provided launch geometry,
Listing-style ``base + elem``); such kernels observe equivalent linear
indices under both thread remappings:

* KEEP_THREADS        — launch (grid, block, 1 element); CUDA geometry as-is.
* THREADS_TO_ELEMENTS — launch (grid, 1 thread, block elements); the CUDA
  block becomes this thread's element run. Mandatory when the backend's
  max_threads_per_block is smaller than the requested block.

Kernels relying on block barriers must run with KEEP_THREADS on the
cooperative backend; the facade does not emulate barriers under
THREADS_TO_ELEMENTS.
"""

from __future__ import annotations

import enum

import numpy as np

from .errors import AllocationError, BufferMismatchError, CapabilityError
from .memqueue import Buffer, Queue, Residency, alloc, enqueue_kernel
from .workdiv import Extent3, make_work_division


def _host_bytes(a: np.ndarray) -> np.ndarray:
    if not a.flags["C_CONTIGUOUS"]:
        raise BufferMismatchError("host memcpy endpoint must be C-contiguous")
    return a.reshape(-1).view(np.uint8)


class ThreadRemap(enum.Enum):
    KEEP_THREADS = "keep-threads"
    THREADS_TO_ELEMENTS = "threads-to-elements"


class MemcpyKind(enum.Enum):
    HOST_TO_DEVICE = "h2d"
    DEVICE_TO_HOST = "d2h"
    DEVICE_TO_DEVICE = "d2d"


class Facade:
    """One logical device with an implicit queue; safe for concurrent use."""

    def __init__(self, backend, remap: ThreadRemap = ThreadRemap.KEEP_THREADS):
        self.backend = backend
        self.remap = remap
        self._queue = Queue(backend)

    # -- memory -------------------------------------------------------------
    def malloc(self, nbytes: int) -> Buffer:
        """Device byte buffer; contents unspecified."""
        if nbytes <= 0:
            raise AllocationError(f"malloc of {nbytes} bytes")
        return alloc(Residency.DEVICE, np.uint8, (nbytes, 1, 1), device=self.backend)

    def free(self, buffer: Buffer) -> None:
        # Host memory is refcounted; this exists for porting symmetry.
        del buffer

    def memcpy(self, dst, src, nbytes: int, kind: MemcpyKind) -> None:
        """Synchronous copy on the implicit queue.

        Host endpoints are numpy arrays; device endpoints are facade buffers.
        The byte count must match both endpoints exactly.
        """
        dst_dev = isinstance(dst, Buffer)
        src_dev = isinstance(src, Buffer)
        expect = {
            MemcpyKind.HOST_TO_DEVICE: (True, False),
            MemcpyKind.DEVICE_TO_HOST: (False, True),
            MemcpyKind.DEVICE_TO_DEVICE: (True, True),
        }[kind]
        if (dst_dev, src_dev) != expect:
            raise BufferMismatchError(
                f"memcpy direction {kind.value} inconsistent with endpoint "
                f"residencies (dst device={dst_dev}, src device={src_dev})"
            )
        for end, is_dev in ((dst, dst_dev), (src, src_dev)):
            size = end.byte_length if is_dev else end.nbytes
            if size != nbytes:
                raise BufferMismatchError(
                    f"memcpy of {nbytes} bytes does not match endpoint size {size}"
                )

        dst_bytes = dst.array if dst_dev else _host_bytes(dst)
        src_bytes = src.array if src_dev else _host_bytes(src)
        tok = self._queue._enqueue(
            lambda: np.copyto(dst_bytes, src_bytes),
            tuple(b for b in (dst, src) if isinstance(b, Buffer)),
        )
        tok.wait()

    # -- execution ------------------------------------------------------------
    def launch_kernel(self, kernel, grid, block, args=(), stream=None) -> None:
        """Asynchronous launch with CUDA-shaped (grid, block) geometry."""
        grid = Extent3.of(grid)
        block = Extent3.of(block)
        if self.remap is ThreadRemap.KEEP_THREADS:
            wd = make_work_division(grid, block, (1, 1, 1))
        else:
            wd = make_work_division(grid, (1, 1, 1), block)
        caps = self.backend.capabilities
        if wd.threads_per_block > caps.max_threads_per_block:
            raise CapabilityError(
                f"block of {wd.threads_per_block} threads exceeds backend limit "
                f"{caps.max_threads_per_block}; use THREADS_TO_ELEMENTS remap"
            )
        queue = stream if stream is not None else self._queue
        enqueue_kernel(queue, wd, kernel, args)

    def device_synchronize(self) -> None:
        """Wait for the implicit queue to drain; idempotent."""
        self._queue.wait()

    def close(self):
        self._queue.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
