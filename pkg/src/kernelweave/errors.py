"""Exception types shared across the library."""


class KernelWeaveError(Exception):
    """Base class for all library errors."""


class CapabilityError(KernelWeaveError):
    """A launch asked for more than the backend declares (e.g. block too large)."""


class SharedArenaError(KernelWeaveError):
    """Per-block shared memory arena exhausted or used inconsistently."""


class ContractViolation(KernelWeaveError):
    """A documented precondition was violated by the caller."""


class AllocationError(KernelWeaveError):
    """Buffer allocation failed; reported instead of aborting the process."""


class BufferMismatchError(KernelWeaveError):
    """Copy endpoints disagree in element type, extent, or residency."""
