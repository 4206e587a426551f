"""Process-level tuning for the allocation-heavy training loop."""

import ctypes
import sys

_M_TRIM_THRESHOLD = -1
_M_TOP_PAD = -2
_M_MMAP_THRESHOLD = -3


def tune_allocator() -> bool:
    """Keep large numpy buffers on the glibc heap instead of fresh mmaps.

    Each training step allocates many multi-megabyte temporaries; serving them
    from reused heap memory avoids a page-fault storm per step. No-op (returns
    False) outside glibc.
    """
    if not sys.platform.startswith("linux"):
        return False
    try:
        libc = ctypes.CDLL("libc.so.6")
    except OSError:
        return False
    ok = libc.mallopt(_M_MMAP_THRESHOLD, 1 << 28)
    ok &= libc.mallopt(_M_TRIM_THRESHOLD, 1 << 29)
    ok &= libc.mallopt(_M_TOP_PAD, 1 << 26)
    return bool(ok)
