import numpy as np
import pytest

import kernelweave as kw
from kernelweave import Buffer, Queue, Residency, alloc, copy, enqueue_kernel, wait
from kernelweave.errors import AllocationError, BufferMismatchError
from kernelweave.kernels import FillKernel, InvocationCounterKernel


class TestAlloc:
    def test_host_f64_cube_size(self):
        buf = alloc(Residency.HOST, np.float64, (128, 128, 128))
        assert buf.byte_length == 128**3 * 8
        assert buf.extent.volume == 2**21

    def test_device_f32_single(self):
        buf = alloc(Residency.DEVICE, np.float32, (1, 1, 1))
        assert buf.byte_length == 4
        assert buf.residency is Residency.DEVICE

    def test_absurd_extent_errors(self):
        with pytest.raises(OverflowError):
            alloc(Residency.HOST, np.float64, (2**30, 2**30, 2**30))

    def test_device_buffer_distinct_allocation(self):
        host = alloc(Residency.HOST, np.int32, (16, 1, 1))
        dev = alloc(Residency.DEVICE, np.int32, (16, 1, 1))
        host.array[:] = 7
        assert not np.shares_memory(host.array, dev.array)


class TestCopy:
    def test_round_trip_bitwise(self, serial_backend):
        rng = np.random.default_rng(2)
        with Queue(serial_backend) as q:
            host_in = alloc(Residency.HOST, np.float64, (64, 2, 2))
            dev = alloc(Residency.DEVICE, np.float64, (64, 2, 2))
            host_out = alloc(Residency.HOST, np.float64, (64, 2, 2))
            host_in.array[:] = rng.normal(size=host_in.extent.volume)
            copy(q, dev, host_in)
            copy(q, host_out, dev)
            wait(q)
            np.testing.assert_array_equal(
                host_out.array.view(np.uint64), host_in.array.view(np.uint64)
            )

    def test_copy_after_kernel_observes_writes(self, blockpool_backend):
        with Queue(blockpool_backend) as q:
            dev = alloc(Residency.DEVICE, np.int64, (1024, 1, 1))
            host = alloc(Residency.HOST, np.int64, (1024, 1, 1))
            dev.array[:] = 0
            wd = kw.make_work_division((4, 1, 1), (1, 1, 1), (256, 1, 1))
            enqueue_kernel(q, wd, FillKernel(42), (dev,))
            copy(q, host, dev)
            wait(q)
            assert (host.array == 42).all()

    def test_mismatched_extents_rejected_before_enqueue(self, serial_backend):
        with Queue(serial_backend) as q:
            a = alloc(Residency.HOST, np.float64, (8, 1, 1))
            b = alloc(Residency.HOST, np.float64, (9, 1, 1))
            with pytest.raises(BufferMismatchError):
                copy(q, a, b)
            c = alloc(Residency.HOST, np.float32, (8, 1, 1))
            with pytest.raises(BufferMismatchError):
                copy(q, a, c)

    def test_alloc_failure_reported(self):
        with pytest.raises(AllocationError):
            alloc(Residency.HOST, np.float64, (2**25, 2**25, 1))


class TestQueueOrdering:
    def test_wait_after_n_ops_sees_all_effects(self, serial_backend):
        with Queue(serial_backend) as q:
            counter = alloc(Residency.DEVICE, np.uint64, (1, 1, 1))
            counter.array[:] = 0
            wd = kw.make_work_division((2, 1, 1), (1, 1, 1), (1, 1, 1))
            n = 25
            for _ in range(n):
                enqueue_kernel(q, wd, InvocationCounterKernel(), (counter,))
            wait(q)
            assert counter.array[0] == n * 2

    def test_wait_on_empty_queue_is_noop_and_idempotent(self, serial_backend):
        with Queue(serial_backend) as q:
            wait(q)
            wait(q)

    def test_tokens_waitable_individually(self, serial_backend):
        with Queue(serial_backend) as q:
            dev = alloc(Residency.DEVICE, np.int64, (64, 1, 1))
            dev.array[:] = 0
            wd = kw.make_work_division((1, 1, 1), (1, 1, 1), (64, 1, 1))
            tok = enqueue_kernel(q, wd, FillKernel(9), (dev,))
            tok.wait()
            assert tok.done()
            assert (dev.array == 9).all()

    def test_per_queue_sequential_consistency_randomized(self, blockpool_backend):
        # effects of op k visible to op k+1, for random copy/kernel sequences
        rng = np.random.default_rng(13)
        with Queue(blockpool_backend) as q:
            n = 256
            dev_a = alloc(Residency.DEVICE, np.int64, (n, 1, 1))
            dev_b = alloc(Residency.DEVICE, np.int64, (n, 1, 1))
            host = alloc(Residency.HOST, np.int64, (n, 1, 1))
            dev_a.array[:] = 0
            dev_b.array[:] = 0
            model_a = np.zeros(n, dtype=np.int64)
            model_b = np.zeros(n, dtype=np.int64)
            wd = kw.make_work_division((4, 1, 1), (1, 1, 1), (64, 1, 1))
            for step in range(100):
                op = rng.integers(0, 3)
                if op == 0:
                    enqueue_kernel(q, wd, FillKernel(int(step)), (dev_a,))
                    model_a[:] = step
                elif op == 1:
                    copy(q, dev_b, dev_a)
                    model_b[:] = model_a
                else:
                    copy(q, host, dev_b)
                    wait(q)
                    np.testing.assert_array_equal(host.array, model_b)
            wait(q)

    def test_two_queues_both_complete(self, blockpool_backend, serial_backend):
        with Queue(blockpool_backend) as q1, Queue(serial_backend) as q2:
            d1 = alloc(Residency.DEVICE, np.int64, (512, 1, 1))
            d2 = alloc(Residency.DEVICE, np.int64, (512, 1, 1))
            wd = kw.make_work_division((2, 1, 1), (1, 1, 1), (256, 1, 1))
            t1 = enqueue_kernel(q1, wd, FillKernel(1), (d1,))
            t2 = enqueue_kernel(q2, wd, FillKernel(2), (d2,))
            t1.wait()
            t2.wait()
            assert (d1.array == 1).all() and (d2.array == 2).all()

    def test_pending_counters_settle(self, serial_backend):
        with Queue(serial_backend) as q:
            dev = alloc(Residency.DEVICE, np.int64, (8, 1, 1))
            host = alloc(Residency.HOST, np.int64, (8, 1, 1))
            copy(q, dev, host)
            wait(q)
            assert dev.pending_ops == 0 and host.pending_ops == 0
