"""Stepping kernel selection: compiled extension with pure-Python fallback.

The compiled backend is used when the extension built successfully and
``DDEBRANCH_DISABLE_SPEEDUPS`` is not set.  Both backends implement the
same contract (see ``reference.py``) and produce identical output;
``benchmarks/bench_kernels.py`` compares their throughput.
"""

from __future__ import annotations

import os

from . import reference

OK = reference.OK
BLOWUP = reference.BLOWUP
DOMAIN = reference.DOMAIN

_forced_python = os.environ.get("DDEBRANCH_DISABLE_SPEEDUPS", "") not in ("", "0")

if not _forced_python:
    try:
        from . import _speedups as _impl

        BACKEND = "compiled"
    except ImportError:
        _impl = reference
        BACKEND = "python"
else:
    _impl = reference
    BACKEND = "python"

eval_scalar = _impl.eval_scalar
simulate_scalar = _impl.simulate_scalar


def backend_name() -> str:
    return BACKEND
