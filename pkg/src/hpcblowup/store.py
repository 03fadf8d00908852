"""
Registry of replaceable numerical kernels.

Kernels are plain functions decorated with :func:`register_pluggable`: the
self-similar profile :func:`.burgers.wbar`, the initial-data cutoff
:func:`.initial_data.cutoff` and the transport derivative
:func:`.transport.upwind_derivative`. Every caller goes through the registered
wrapper, so a replacement is seen by the whole pipeline ::

    from hpcblowup.burgers import wbar

    wbar.replace_implementation(lambda y: wbar.original_impl()(y) + 0.5)
    ...
    wbar.reset_implementation()

or, scoped to a block, ``with replaced("wbar", fn): ...``.
"""

from __future__ import annotations

import functools
from contextlib import contextmanager
from typing import Callable, Iterator

_kernels: dict[str, Pluggable] = {}


class Pluggable:
    """Callable wrapper that forwards to a swappable implementation."""

    def __init__(self, fn: Callable):
        functools.update_wrapper(self, fn)
        self._orig_impl = fn
        self._impl = fn

    def __call__(self, *args, **kwargs):
        return self._impl(*args, **kwargs)

    def replace_implementation(self, new_impl: Callable) -> None:
        self._impl = new_impl

    def reset_implementation(self) -> None:
        self._impl = self._orig_impl

    def is_original(self) -> bool:
        return self._impl is self._orig_impl

    def original_impl(self) -> Callable:
        return self._orig_impl


def register_pluggable(fn: Callable) -> Pluggable:
    """Register `fn` as a replaceable kernel under its function name."""
    if fn.__name__ in _kernels:
        msg = f"a kernel named {fn.__name__} is already registered"
        raise ValueError(msg)
    kernel = Pluggable(fn)
    _kernels[fn.__name__] = kernel
    return kernel


def get_kernel(name: str) -> Pluggable:
    try:
        return _kernels[name]
    except KeyError:
        msg = f"no kernel named {name}, known kernels: {', '.join(sorted(_kernels))}"
        raise KeyError(msg) from None


@contextmanager
def replaced(name: str, new_impl: Callable) -> Iterator[Pluggable]:
    """Swap the kernel `name` for `new_impl` inside a ``with`` block."""
    kernel = get_kernel(name)
    previous = kernel._impl
    kernel.replace_implementation(new_impl)
    try:
        yield kernel
    finally:
        kernel._impl = previous


def reset_all_to_original() -> None:
    for kernel in _kernels.values():
        kernel.reset_implementation()


def is_all_original() -> bool:
    return all(k.is_original() for k in _kernels.values())


def get_replaced() -> list[str]:
    """Names of all kernels that currently use a replacement, sorted."""
    return sorted(name for name, k in _kernels.items() if not k.is_original())
