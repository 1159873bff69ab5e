import numpy as np
import pytest

import kernelweave as kw
from kernelweave.kernels import CoverageKernel, FillKernel


class HistogramKernel:
    """Atomic scatter: each element adds into value-indexed bins."""

    def __call__(self, ctx, values, bins):
        base = ctx.global_element_base()
        end = min(base + ctx.elems_per_thread, values.shape[0])
        for i in range(base, end):
            ctx.atomics.add_f64(bins, int(values[i]), 1.0)


class SquareKernel:
    """Barrier/atomic-free: out[i] = in[i]*in[i] over this thread's run."""

    def __call__(self, ctx, src, dst):
        base = ctx.global_element_base()
        end = min(base + ctx.elems_per_thread, src.shape[0])
        if base < end:
            np.multiply(src[base:end], src[base:end], out=dst[base:end])


class TestSerial:
    def test_fill_ascending_blocks(self, serial_backend):
        # order probe: each write records a sequence number
        seq = {"n": 0}
        order = np.zeros(16, dtype=np.int64)

        class OrderKernel:
            def __call__(self, ctx, out):
                base = ctx.global_element_base()
                for e in range(ctx.elems_per_thread):
                    out[base + e] = seq["n"]
                    seq["n"] += 1

        wd = kw.make_work_division((4, 1, 1), (1, 1, 1), (4, 1, 1))
        kw.launch(serial_backend, wd, OrderKernel(), (order,)).wait()
        assert (order == np.arange(16)).all()

    def test_atomic_histogram_bitwise_reproducible(self, serial_backend):
        rng = np.random.default_rng(3)
        values = rng.integers(0, 16, size=1024).astype(np.float64)
        wd = kw.make_work_division((8, 1, 1), (1, 1, 1), (128, 1, 1))
        runs = []
        for _ in range(2):
            bins = np.zeros(16)
            kw.launch(serial_backend, wd, HistogramKernel(), (values, bins)).wait()
            runs.append(bins)
        np.testing.assert_array_equal(runs[0], runs[1])


class TestBlockPool:
    def test_large_fill_identical_to_serial(self, serial_backend, blockpool_backend):
        n = 100_000
        wd = kw.make_work_division((100, 1, 1), (1, 1, 1), (1000, 1, 1))
        out_serial = np.zeros(n, dtype=np.int64)
        out_pool = np.zeros(n, dtype=np.int64)
        kw.launch(serial_backend, wd, FillKernel(42), (out_serial,)).wait()
        kw.launch(blockpool_backend, wd, FillKernel(42), (out_pool,)).wait()
        np.testing.assert_array_equal(out_serial, out_pool)

    def test_single_worker_pool_bitwise_equals_serial(self, serial_backend):
        rng = np.random.default_rng(5)
        src = rng.normal(size=4096)
        wd = kw.make_work_division((16, 1, 1), (1, 1, 1), (256, 1, 1))
        a = np.zeros_like(src)
        b = np.zeros_like(src)
        kw.launch(serial_backend, wd, SquareKernel(), (src, a)).wait()
        with kw.BlockPoolBackend(workers=1) as pool1:
            kw.launch(pool1, wd, SquareKernel(), (src, b)).wait()
        np.testing.assert_array_equal(a, b)

    def test_atomic_accumulation_close_to_serial(self, serial_backend,
                                                 blockpool_backend):
        rng = np.random.default_rng(11)
        values = rng.integers(0, 8, size=20_000).astype(np.float64)
        wd = kw.make_work_division((20, 1, 1), (1, 1, 1), (1000, 1, 1))
        ref = np.zeros(8)
        got = np.zeros(8)
        kw.launch(serial_backend, wd, HistogramKernel(), (values, ref)).wait()
        kw.launch(blockpool_backend, wd, HistogramKernel(), (values, got)).wait()
        np.testing.assert_allclose(got, ref, rtol=1e-12)


class TestCooperative:
    def test_tree_reduction_equals_sequential_sum(self, coop_backend):
        class TreeReduce:
            needs_block_sync = True

            def __call__(self, ctx, data, out):
                tpb = ctx.work_division.threads_per_block
                sh = ctx.shared_alloc(np.int64, tpb)
                t = ctx.thread_linear
                sh[t] = data[ctx.global_element_base()]
                ctx.sync_block_threads()
                stride = tpb // 2
                while stride:
                    if t < stride:
                        sh[t] += sh[t + stride]
                    ctx.sync_block_threads()
                    stride //= 2
                if t == 0:
                    out[ctx.block_linear] = sh[0]

        rng = np.random.default_rng(17)
        data = rng.integers(-1000, 1000, size=256).astype(np.int64)
        out = np.zeros(1, dtype=np.int64)
        wd = kw.make_work_division((1, 1, 1), (256, 1, 1), (1, 1, 1))
        kw.launch(coop_backend, wd, TreeReduce(), (data, out)).wait()
        assert out[0] == data.sum()

    def test_fill_256_threads_matches_serial_256_elements(self, serial_backend,
                                                          coop_backend):
        a = np.zeros(256, dtype=np.int64)
        b = np.zeros(256, dtype=np.int64)
        kw.launch(serial_backend,
                  kw.make_work_division((1, 1, 1), (1, 1, 1), (256, 1, 1)),
                  FillKernel(42), (a,)).wait()
        kw.launch(coop_backend,
                  kw.make_work_division((1, 1, 1), (256, 1, 1), (1, 1, 1)),
                  FillKernel(42), (b,)).wait()
        np.testing.assert_array_equal(a, b)


class TestCrossBackend:
    def test_nonatomic_kernel_bitwise_identical_everywhere(self, all_backends):
        rng = np.random.default_rng(23)
        src = rng.normal(size=8192)
        outputs = []
        for backend in all_backends:
            if backend.capabilities.max_threads_per_block == 1:
                wd = kw.make_work_division((32, 1, 1), (1, 1, 1), (256, 1, 1))
            else:
                wd = kw.make_work_division((32, 1, 1), (16, 1, 1), (16, 1, 1))
            dst = np.zeros_like(src)
            kw.launch(backend, wd, SquareKernel(), (src, dst)).wait()
            outputs.append(dst)
        np.testing.assert_array_equal(outputs[0], outputs[1])
        np.testing.assert_array_equal(outputs[0], outputs[2])

    def test_work_division_equivalence_threads_vs_elements(self, coop_backend):
        # (T threads x 1 element) vs (1 thread x T elements), same kernel object
        n = 4096
        kernel = FillKernel(7)
        a = np.zeros(n, dtype=np.int64)
        b = np.zeros(n, dtype=np.int64)
        kw.launch(coop_backend,
                  kw.make_work_division((16, 1, 1), (256, 1, 1), (1, 1, 1)),
                  kernel, (a,)).wait()
        kw.launch(coop_backend,
                  kw.make_work_division((16, 1, 1), (1, 1, 1), (256, 1, 1)),
                  kernel, (b,)).wait()
        np.testing.assert_array_equal(a, b)

    def test_randomized_divisions_cover_exactly_once(self, all_backends):
        rng = np.random.default_rng(91)
        for _ in range(12):
            gx = int(rng.integers(1, 9))
            gy = int(rng.integers(1, 5))
            tx, ty = int(rng.integers(1, 9)), int(rng.integers(1, 5))
            ex, ey = int(rng.integers(1, 9)), int(rng.integers(1, 5))
            wd_coop = kw.make_work_division((gx, gy, 1), (tx, ty, 1), (ex, ey, 1))
            wd_flat = kw.make_work_division(
                (gx, gy, 1), (1, 1, 1), (tx * ex, ty * ey, 1)
            )
            n = wd_coop.total_elements
            for backend in all_backends:
                wd = wd_flat if backend.capabilities.max_threads_per_block == 1 \
                    else wd_coop
                data = np.zeros(n, dtype=np.int64)
                guard = np.zeros(n, dtype=np.uint64)
                kw.launch(backend, wd, CoverageKernel(1), (data, guard)).wait()
                assert (guard == 1).all()
                assert (data == 1).all()


class TestCapabilities:
    def test_serial_single_thread_blocks(self):
        assert kw.SerialBackend().capabilities.max_threads_per_block == 1

    def test_blockpool_single_thread_blocks(self):
        with kw.BlockPoolBackend(workers=8) as b:
            assert b.capabilities.max_threads_per_block == 1

    def test_coop_runs_paper_block_size(self, coop_backend):
        assert coop_backend.capabilities.max_threads_per_block >= 256

    def test_capability_record_constant(self, coop_backend):
        assert kw.capabilities(coop_backend) == kw.capabilities(coop_backend)

    def test_make_backend_by_name(self):
        assert kw.make_backend("serial").kind == "serial"
        with kw.make_backend("blockpool", workers=2) as b:
            assert b.kind == "blockpool" and b.worker_count == 2
        with pytest.raises(ValueError, match="unknown backend"):
            kw.make_backend("gpu")
