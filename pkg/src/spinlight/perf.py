"""Process-level performance settings.

Time stepping allocates many short-lived arrays of a few MB.  With
glibc's default thresholds each one is a fresh ``mmap`` and its pages are
faulted in again on every use, which can cost a third of the run time.
:func:`tune_allocator` raises the thresholds so those blocks are reused.
It changes the whole process, so library code never calls it; the
command line tool and the test suite do.
"""
from __future__ import annotations

import ctypes
import ctypes.util
import sys

M_TRIM_THRESHOLD = -1
M_MMAP_THRESHOLD = -3

_done = False


def tune_allocator(mmap_threshold: int = 64 << 20, trim_threshold: int = 128 << 20) -> bool:
    """Raise glibc's mmap and trim thresholds; no-op elsewhere.

    Returns ``True`` if the settings were applied.
    """
    global _done
    if _done:
        return True
    if not sys.platform.startswith("linux"):
        return False
    name = ctypes.util.find_library("c")
    if not name:
        return False
    try:
        libc = ctypes.CDLL(name)
        mallopt = libc.mallopt
    except (OSError, AttributeError):
        return False
    mallopt.argtypes = [ctypes.c_int, ctypes.c_int]
    ok = bool(mallopt(M_MMAP_THRESHOLD, mmap_threshold)) and bool(mallopt(M_TRIM_THRESHOLD, trim_threshold))
    _done = ok
    return ok
