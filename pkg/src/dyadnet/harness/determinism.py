"""Strict single-threaded execution for bit-reproducible runs."""

from __future__ import annotations

import contextlib

from threadpoolctl import threadpool_limits


@contextlib.contextmanager
def strict_mode(enabled: bool = True):
    """Pin BLAS/OpenMP pools to one thread while active.

    Fixed reduction order makes float results bit-identical across runs and
    hosts with the same numerics libraries.
    """
    if not enabled:
        yield
        return
    with threadpool_limits(limits=1):
        yield
