"""Training-loop backends: compiled extension with pure numpy fallback.

The compiled loop (Cython) is used when importable; set RFFOL_BACKEND to
"python" or "compiled" to force a choice.  Both expose the same
``run_online`` contract (see loop_py).
"""

from __future__ import annotations

import os

from . import loop_py

try:
    from . import _loop_cy
except ImportError:  # extension not built; pure python fallback
    _loop_cy = None

_BACKENDS = {"python": loop_py}
if _loop_cy is not None:
    _BACKENDS["compiled"] = _loop_cy


def available_backends() -> tuple[str, ...]:
    return tuple(sorted(_BACKENDS))


def default_backend() -> str:
    forced = os.environ.get("RFFOL_BACKEND")
    if forced:
        if forced not in ("python", "compiled"):
            raise ValueError(f"RFFOL_BACKEND must be 'python' or 'compiled', got {forced!r}")
        if forced not in _BACKENDS:
            raise RuntimeError("RFFOL_BACKEND=compiled but the extension is not built")
        return forced
    return "compiled" if "compiled" in _BACKENDS else "python"


def get_backend(name: str | None = None):
    """The run_online callable for the named (or default) backend."""
    if name is None:
        name = default_backend()
    try:
        return _BACKENDS[name].run_online
    except KeyError:
        raise ValueError(f"unknown backend {name!r}; available: {available_backends()}") from None
