"""Four-level index space: grid of blocks of threads of elements.

The element level is the amount of work one logical thread processes
sequentially; a thread owns a contiguous run of linear element indices
(blocked decomposition, x fastest). All index arithmetic lives here,
independent of any execution engine.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import ContractViolation

# One checkpoint at construction instead of per-access checks: every index
# and every product is kept below 2**64.
INDEX_MAX = 2**64 - 1


def _as_triple(v):
    if isinstance(v, Extent3):
        return v.x, v.y, v.z
    if isinstance(v, int):
        return v, 1, 1
    t = tuple(v)
    if len(t) != 3:
        raise ValueError(f"expected 3 components, got {v!r}")
    return t


@dataclass(frozen=True)
class Extent3:
    """Positive 3D extent (counts along x, y, z)."""

    x: int
    y: int
    z: int

    def __post_init__(self):
        for name in ("x", "y", "z"):
            v = getattr(self, name)
            if not isinstance(v, int) or isinstance(v, bool):
                raise TypeError(f"Extent3.{name} must be an int, got {v!r}")
            if v < 1:
                raise ValueError(f"Extent3.{name} must be >= 1, got {v}")
        if self.x * self.y * self.z > INDEX_MAX:
            raise OverflowError(
                f"extent product {self.x}*{self.y}*{self.z} exceeds 64-bit index range"
            )

    @property
    def volume(self) -> int:
        return self.x * self.y * self.z

    def as_tuple(self) -> tuple[int, int, int]:
        return (self.x, self.y, self.z)

    def __iter__(self):
        return iter((self.x, self.y, self.z))

    @classmethod
    def of(cls, v) -> "Extent3":
        """Coerce an int, 3-tuple, or Extent3 into an Extent3."""
        if isinstance(v, Extent3):
            return v
        return cls(*_as_triple(v))


@dataclass(frozen=True)
class WorkDivision:
    """Immutable launch geometry: grid blocks x block threads x thread elements."""

    grid_blocks: Extent3
    block_threads: Extent3
    thread_elems: Extent3

    def __post_init__(self):
        total = (
            self.grid_blocks.volume
            * self.block_threads.volume
            * self.thread_elems.volume
        )
        if total > INDEX_MAX:
            raise OverflowError(
                f"work division total element count {total} exceeds 64-bit index range"
            )

    @property
    def blocks(self) -> int:
        return self.grid_blocks.volume

    @property
    def threads_per_block(self) -> int:
        return self.block_threads.volume

    @property
    def elems_per_thread(self) -> int:
        return self.thread_elems.volume

    @property
    def total_elements(self) -> int:
        return self.blocks * self.threads_per_block * self.elems_per_thread


@dataclass(frozen=True)
class ThreadIndex:
    """0-based (block, thread) coordinates of one logical thread."""

    block_idx: tuple[int, int, int]
    thread_idx: tuple[int, int, int]


def make_work_division(grid_blocks, block_threads, thread_elems) -> WorkDivision:
    """Build a WorkDivision; accepts ints, 3-tuples, or Extent3 per level."""
    return WorkDivision(
        Extent3.of(grid_blocks), Extent3.of(block_threads), Extent3.of(thread_elems)
    )


def linear_element_base(block_dim_x, block_idx_x, thread_idx_x, elem_dim_x) -> int:
    """First linear element index owned by a thread along x.

    The thread owns the contiguous run [base, base + elem_dim_x).
    """
    return block_dim_x * block_idx_x * elem_dim_x + thread_idx_x * elem_dim_x


def linearize_3d(coord, extent) -> int:
    """Row-major, x-fastest linear index of ``coord`` within ``extent``."""
    cx, cy, cz = _as_triple(coord)
    ex, ey, ez = _as_triple(extent)
    if not (0 <= cx < ex and 0 <= cy < ey and 0 <= cz < ez):
        raise ContractViolation(f"coordinate {coord!r} out of extent {extent!r}")
    return cx + ex * (cy + ey * cz)


def delinearize_3d(index, extent) -> tuple[int, int, int]:
    """Inverse of linearize_3d."""
    ex, ey, ez = _as_triple(extent)
    if not (0 <= index < ex * ey * ez):
        raise ContractViolation(f"index {index} out of extent {extent!r}")
    x = index % ex
    rest = index // ex
    return (x, rest % ey, rest // ey)


def global_element_base(wd: WorkDivision, block_idx, thread_idx) -> int:
    """First global linear element index owned by (block_idx, thread_idx).

    3D generalization of linear_element_base: blocks and threads are
    linearized x-fastest, and each thread owns elems_per_thread consecutive
    element indices.
    """
    b = linearize_3d(block_idx, wd.grid_blocks)
    t = linearize_3d(thread_idx, wd.block_threads)
    return (b * wd.threads_per_block + t) * wd.elems_per_thread
