"""kernelweave: a grid/block/thread/element kernel execution model for CPUs.

Single-source kernels written against the accelerator-context contract run
unchanged on the serial oracle backend, the block-pool CPU mapping, and the
cooperative GPU-semantics backend. The pic subpackage is the miniature 3D3V
particle-in-cell demo application; the bench module and the khi-bench CLI
reproduce the evaluation methodology (runtime and floating-point efficiency
across back-ends, precisions, and work divisions).
"""

from .atomics import (
    ATOMICS,
    atomic_add_f32,
    atomic_add_f64,
    atomic_add_u64,
    atomic_cas_u64,
    atomic_exch_u64,
)
from .backends import (
    Backend,
    BlockPoolBackend,
    Capabilities,
    CooperativeBlockThreadsBackend,
    SerialBackend,
    capabilities,
    default_worker_count,
    make_backend,
)
from .errors import (
    AllocationError,
    BufferMismatchError,
    CapabilityError,
    ContractViolation,
    KernelWeaveError,
    SharedArenaError,
)
from .facade import Facade, MemcpyKind, ThreadRemap
from .kernel import (
    AcceleratorContext,
    CompletionToken,
    for_each_element,
    launch,
    shared_alloc,
    sync_block_threads,
)
from .memqueue import Buffer, Queue, Residency, alloc, copy, enqueue_kernel, wait
from .workdiv import (
    Extent3,
    ThreadIndex,
    WorkDivision,
    delinearize_3d,
    global_element_base,
    linear_element_base,
    linearize_3d,
    make_work_division,
)

__version__ = "0.1.0"
