"""Kernel backend selection: compiled Cython extension with pure-Python fallback.

The compiled module is preferred when importable; set ISINGLIM_PURE=1 to force
the pure backend. Both backends produce bit-identical chains for a given seed.
"""

import os

from . import pure as _pure

if os.environ.get("ISINGLIM_PURE"):
    _backend = _pure
else:
    try:
        from . import _mcmc as _backend  # type: ignore[no-redef]
    except ImportError:
        _backend = _pure

BACKEND_NAME = _backend.BACKEND_NAME
STREAM_BLOCK = _backend.STREAM_BLOCK
make_stream = _backend.make_stream
glauber_sample = _backend.glauber_sample
wolff_sample = _backend.wolff_sample


def backend_name() -> str:
    """'compiled' when the Cython extension is active, else 'pure'."""
    return BACKEND_NAME


def get_backend(name: str):
    """Explicit backend module by name, for benchmarks and equivalence tests."""
    if name == "pure":
        return _pure
    if name == "compiled":
        from . import _mcmc

        return _mcmc
    raise ValueError(f"unknown backend {name!r}")
