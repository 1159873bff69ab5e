import threading

import numpy as np
import pytest

from kernelweave import atomics
from kernelweave.atomics import (
    atomic_add_f32,
    atomic_add_f64,
    atomic_add_u64,
    atomic_cas_u64,
    atomic_exch_u64,
)


def run_threads(n, fn):
    threads = [threading.Thread(target=fn, args=(i,)) for i in range(n)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()


class TestCas:
    def test_success(self):
        cell = np.array([5], dtype=np.uint64)
        assert atomic_cas_u64(cell, 0, 5, 7) == 5
        assert cell[0] == 7

    def test_failure_leaves_cell(self):
        cell = np.array([5], dtype=np.uint64)
        assert atomic_cas_u64(cell, 0, 6, 7) == 5
        assert cell[0] == 5

    def test_cas_increment_loop_concurrent(self):
        # N workers CAS-increment until success; sequential oracle: final == N
        cell = np.array([0], dtype=np.uint64)
        per_worker = 1250
        workers = 8

        def work(_):
            for _ in range(per_worker):
                while True:
                    old = int(cell.view(np.uint64)[0])
                    if atomic_cas_u64(cell, 0, old, old + 1) == old:
                        break

        run_threads(workers, work)
        assert cell[0] == workers * per_worker  # 10^4 increments


class TestExch:
    def test_swap(self):
        cell = np.array([3], dtype=np.uint64)
        assert atomic_exch_u64(cell, 0, 9) == 3
        assert cell[0] == 9

    def test_idempotent_on_same_value(self):
        cell = np.array([4], dtype=np.uint64)
        atomic_exch_u64(cell, 0, 4)
        assert cell[0] == 4

    def test_multiset_conservation(self):
        # tokens {1..N} exchanged concurrently: {returns} U {final} == {0} U {tokens}
        cell = np.array([0], dtype=np.uint64)
        n = 64
        returns = [None] * n

        def work(i):
            returns[i] = atomic_exch_u64(cell, 0, i + 1)

        run_threads(n, work)
        got = sorted(returns + [int(cell[0])])
        assert got == sorted([0] + list(range(1, n + 1)))


class TestAddF64:
    def test_returns_old(self):
        cell = np.array([2.0])
        assert atomic_add_f64(cell, 0, 1.0) == 2.0
        assert cell[0] == 3.0

    def test_add_zero_identity(self):
        cell = np.array([2.5])
        assert atomic_add_f64(cell, 0, 0.0) == 2.5
        assert cell[0] == 2.5

    def test_hundred_thousand_unit_adds_exact(self):
        cell = np.array([0.0])
        workers, per_worker = 8, 12500

        def work(_):
            for _ in range(per_worker):
                atomic_add_f64(cell, 0, 1.0)

        run_threads(workers, work)
        assert cell[0] == 100000.0  # integers exactly representable

    def test_random_adds_match_serial_sum(self):
        rng = np.random.default_rng(7)
        vals = rng.normal(size=4000)
        cell = np.array([0.0])
        chunks = np.array_split(vals, 8)

        def work(i):
            for v in chunks[i]:
                atomic_add_f64(cell, 0, float(v))

        run_threads(8, work)
        s = float(np.sum(vals))
        eps = np.finfo(np.float64).eps
        assert abs(cell[0] - s) <= len(vals) * eps * max(abs(s), np.abs(vals).sum())


class TestOtherWidths:
    def test_add_f32(self):
        cell = np.array([1.5], dtype=np.float32)
        old = atomic_add_f32(cell, 0, 0.25)
        assert old == np.float32(1.5)
        assert cell[0] == np.float32(1.75)

    def test_add_f32_concurrent_units(self):
        cell = np.array([0.0], dtype=np.float32)

        def work(_):
            for _ in range(500):
                atomic_add_f32(cell, 0, 1.0)

        run_threads(4, work)
        assert cell[0] == 2000.0  # exactly representable in f32

    def test_add_u64(self):
        cell = np.array([10], dtype=np.uint64)
        assert atomic_add_u64(cell, 0, 5) == 10
        assert cell[0] == 15

    def test_add_u64_concurrent(self):
        cell = np.array([0], dtype=np.uint64)

        def work(_):
            for _ in range(2000):
                atomic_add_u64(cell, 0, 1)

        run_threads(8, work)
        assert cell[0] == 16000


class TestBulkOps:
    def test_add_at_equals_scalar_sequence(self):
        a = np.zeros(10)
        b = np.zeros(10)
        idx = np.array([0, 3, 3, 7, 0])
        vals = np.array([1.0, 2.0, 0.5, -1.0, 4.0])
        atomics.atomic_add_at(a, idx, vals)
        for i, v in zip(idx, vals):
            atomic_add_f64(b, int(i), float(v))
        np.testing.assert_array_equal(a, b)

    def test_add_dense_with_wrap_maps(self):
        target = np.zeros((4, 4, 4))
        tile = np.arange(27, dtype=np.float64).reshape(3, 3, 3)
        mx = np.array([3, 0, 1])  # wrapped maps
        my = np.array([0, 1, 2])
        mz = np.array([2, 3, 0])
        atomics.atomic_add_dense(target, tile, mx, my, mz)
        expect = np.zeros((4, 4, 4))
        for i in range(3):
            for j in range(3):
                for k in range(3):
                    expect[mx[i], my[j], mz[k]] += tile[i, j, k]
        np.testing.assert_array_equal(target, expect)

    def test_bulk_and_scalar_share_one_lock(self):
        arr = np.zeros(8)
        lock = atomics._lock_for(arr)
        assert atomics._lock_for(arr.reshape(2, 4)) is lock
        assert atomics._lock_for(arr[2:5]) is lock

    def test_concurrent_bulk_adds(self):
        target = np.zeros(16)
        idx = np.arange(16)

        def work(_):
            for _ in range(500):
                atomics.atomic_add_at(target, idx, np.ones(16))

        run_threads(4, work)
        assert (target == 2000.0).all()


def test_nan_propagates():
    cell = np.array([1.0])
    atomic_add_f64(cell, 0, float("nan"))
    assert np.isnan(cell[0])
