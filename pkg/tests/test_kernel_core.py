import numpy as np
import pytest

import kernelweave as kw
from kernelweave import CapabilityError, SharedArenaError
from kernelweave.kernels import (
    BlockTagKernel,
    CoverageKernel,
    FillKernel,
    InvocationCounterKernel,
)


class TestLaunch:
    def test_listing_fill_single_thread_sixteen_elements(self, serial_backend):
        data = np.zeros(16, dtype=np.int64)
        wd = kw.make_work_division((1, 1, 1), (1, 1, 1), (16, 1, 1))
        kw.launch(serial_backend, wd, FillKernel(42), (data,)).wait()
        assert (data == 42).all()

    def test_minimal_division_single_invocation(self, all_backends):
        wd = kw.make_work_division((1, 1, 1), (1, 1, 1), (1, 1, 1))
        for backend in all_backends:
            counter = np.zeros(1, dtype=np.uint64)
            kw.launch(backend, wd, InvocationCounterKernel(), (counter,)).wait()
            assert counter[0] == 1

    def test_fill_two_blocks_each_index_once(self, serial_backend):
        data = np.zeros(16, dtype=np.int64)
        guard = np.zeros(16, dtype=np.uint64)
        wd = kw.make_work_division((2, 1, 1), (4, 1, 1), (2, 1, 1))
        with kw.CooperativeBlockThreadsBackend(workers=2) as coop:
            kw.launch(coop, wd, CoverageKernel(42), (data, guard)).wait()
        assert (data == 42).all()
        assert (guard == 1).all()

    def test_capability_violation_rejected_before_side_effects(self, serial_backend):
        data = np.zeros(8, dtype=np.int64)
        wd = kw.make_work_division((1, 1, 1), (8, 1, 1), (1, 1, 1))
        with pytest.raises(CapabilityError):
            kw.launch(serial_backend, wd, FillKernel(42), (data,))
        assert (data == 0).all()

    def test_kernel_failure_carried_by_token(self, blockpool_backend):
        class Boom:
            def __call__(self, ctx, _):
                raise ValueError("kernel exploded")

        wd = kw.make_work_division((4, 1, 1), (1, 1, 1), (1, 1, 1))
        tok = kw.launch(blockpool_backend, wd, Boom(), (np.zeros(1),))
        with pytest.raises(ValueError, match="kernel exploded"):
            tok.wait()

    def test_launch_count_property(self, all_backends):
        rng = np.random.default_rng(42)
        for _ in range(8):
            gx, gy = int(rng.integers(1, 6)), int(rng.integers(1, 4))
            tx = int(rng.integers(1, 5))
            wd_threads = kw.make_work_division((gx, gy, 1), (tx, 2, 1), (2, 1, 1))
            wd_flat = kw.make_work_division((gx, gy, 1), (1, 1, 1), (tx, 2, 2))
            for backend in all_backends:
                wd = wd_flat if backend.capabilities.max_threads_per_block == 1 \
                    else wd_threads
                counter = np.zeros(1, dtype=np.uint64)
                kw.launch(backend, wd, InvocationCounterKernel(), (counter,)).wait()
                assert counter[0] == wd.blocks * wd.threads_per_block


class TestForEachElement:
    def _order(self, elem_dim):
        seen = []

        class Recorder:
            def __call__(self, ctx, _):
                kw.for_each_element(ctx, lambda x, y, z: seen.append((x, y, z)))

        wd = kw.make_work_division((1, 1, 1), (1, 1, 1), elem_dim)
        with kw.SerialBackend() as b:
            kw.launch(b, wd, Recorder(), (np.zeros(1),)).wait()
        return seen

    def test_two_elements_x(self):
        assert self._order((2, 1, 1)) == [(0, 0, 0), (1, 0, 0)]

    def test_single_element(self):
        assert self._order((1, 1, 1)) == [(0, 0, 0)]

    def test_x_fastest_2x2(self):
        assert self._order((2, 2, 1)) == [(0, 0, 0), (1, 0, 0), (0, 1, 0), (1, 1, 0)]


class _ProducerConsumer:
    """Message-passing litmus: write -> barrier -> read must never be stale."""

    needs_block_sync = True

    def __init__(self, payload, jitter_seed=None):
        self.payload = payload
        self.jitter_seed = jitter_seed

    def __call__(self, ctx, out, failures):
        import random
        import time

        slot = ctx.shared_alloc(np.int64, 1)
        if self.jitter_seed is not None:
            rng = random.Random(
                self.jitter_seed * 65537 + ctx.block_linear * 257 + ctx.thread_linear
            )
            time.sleep(rng.random() * 2e-5)
        if ctx.thread_linear == 0:
            slot[0] = self.payload
        ctx.sync_block_threads()
        if ctx.thread_linear == 1:
            if slot[0] != self.payload:
                ctx.atomics.add_u64(failures, 0, 1)
            out[ctx.block_linear] = slot[0]


class TestBarrier:
    def test_single_thread_block_noop(self, serial_backend):
        class K:
            def __call__(self, ctx, _):
                ctx.sync_block_threads()  # no-op for 1-thread blocks

        wd = kw.make_work_division((2, 1, 1), (1, 1, 1), (1, 1, 1))
        kw.launch(serial_backend, wd, K(), (np.zeros(1),)).wait()

    def test_producer_consumer_litmus(self, coop_backend):
        wd = kw.make_work_division((4, 1, 1), (2, 1, 1), (1, 1, 1))
        failures = np.zeros(1, dtype=np.uint64)
        reps = 1000
        for rep in range(reps):
            out = np.zeros(4, dtype=np.int64)
            kernel = _ProducerConsumer(rep + 1, jitter_seed=rep if rep % 4 else None)
            kw.launch(coop_backend, wd, kernel, (out, failures)).wait()
            assert (out == rep + 1).all()
        assert failures[0] == 0

    def test_two_barriers_preserve_program_order(self, coop_backend):
        class TwoPhase:
            needs_block_sync = True

            def __call__(self, ctx, out):
                sh = ctx.shared_alloc(np.int64, 2)
                t = ctx.thread_linear
                if t == 0:
                    sh[0] = 1
                ctx.sync_block_threads()
                if t == 1:
                    out[0] = sh[0]
                    sh[1] = 10
                ctx.sync_block_threads()
                if t == 0:
                    out[1] = sh[1]

        out = np.zeros(2, dtype=np.int64)
        wd = kw.make_work_division((1, 1, 1), (2, 1, 1), (1, 1, 1))
        kw.launch(coop_backend, wd, TwoPhase(), (out,)).wait()
        assert list(out) == [1, 10]

    def test_undeclared_barrier_use_reported(self, coop_backend):
        class NotDeclared:
            def __call__(self, ctx, _):
                ctx.sync_block_threads()

        wd = kw.make_work_division((1, 1, 1), (2, 1, 1), (1, 1, 1))
        tok = kw.launch(coop_backend, wd, NotDeclared(), (np.zeros(1),))
        with pytest.raises(kw.ContractViolation, match="needs_block_sync"):
            tok.wait()


class TestSharedAlloc:
    def test_values_persist_across_element_iterations(self, serial_backend):
        class K:
            def __call__(self, ctx, out):
                buf = ctx.shared_alloc(np.float32, 256)
                ctx.for_each_element(lambda x, y, z: buf.__setitem__(x, float(x)))
                total = 0.0
                for i in range(256):
                    total += buf[i]
                out[0] = total

        out = np.zeros(1)
        wd = kw.make_work_division((1, 1, 1), (1, 1, 1), (256, 1, 1))
        kw.launch(serial_backend, wd, K(), (out,)).wait()
        assert out[0] == sum(range(256))

    def test_sequential_allocations_do_not_overlap(self, serial_backend):
        class K:
            def __call__(self, ctx, out):
                a = ctx.shared_alloc(np.int64, 8)
                b = ctx.shared_alloc(np.int64, 8)
                a[:] = 1
                b[:] = 2
                out[0] = int(a.sum())
                out[1] = int(b.sum())

        out = np.zeros(2, dtype=np.int64)
        wd = kw.make_work_division((1, 1, 1), (1, 1, 1), (1, 1, 1))
        kw.launch(serial_backend, wd, K(), (out,)).wait()
        assert list(out) == [8, 16]

    def test_arena_exhaustion_is_launch_failure(self):
        class Greedy:
            def __call__(self, ctx, _):
                ctx.shared_alloc(np.float64, 10**6)  # 8 MB >> 48 KiB arena

        with kw.SerialBackend() as b:
            wd = kw.make_work_division((1, 1, 1), (1, 1, 1), (1, 1, 1))
            tok = kw.launch(b, wd, Greedy(), (np.zeros(1),))
            with pytest.raises(SharedArenaError):
                tok.wait()

    def test_isolation_across_concurrent_blocks(self, blockpool_backend, coop_backend):
        for backend in (blockpool_backend, coop_backend):
            failures = np.zeros(1, dtype=np.uint64)
            wd = kw.make_work_division((16, 1, 1), (1, 1, 1), (64, 1, 1))
            for _ in range(20):
                kw.launch(backend, wd, BlockTagKernel(), (failures,)).wait()
            assert failures[0] == 0
