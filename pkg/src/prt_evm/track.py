"""Track kernel selection.

The compiled kernel is used when it was built; otherwise, or when
``PRT_EVM_PURE=1`` is set, the pure-Python implementation is used. Both
expose the same ``Track`` class.
"""

import os

from . import _track_py
from ._track_py import AT_END, APPROACH, ARRIVED, BLOCKED, ENTERED, MOVING, OFF  # noqa: F401

PythonTrack = _track_py.Track

try:
    from ._track import Track as CompiledTrack
except ImportError:  # extension not built
    CompiledTrack = None

if CompiledTrack is not None and os.environ.get("PRT_EVM_PURE", "") not in ("1", "true", "yes"):
    Track = CompiledTrack
else:
    Track = PythonTrack

BACKEND = "cython" if Track is CompiledTrack else "python"


def make_track(*args, backend=None, **kwargs):
    """Instantiate a track with an explicit backend ("cython" or "python")."""
    if backend is None:
        return Track(*args, **kwargs)
    if backend == "python":
        return PythonTrack(*args, **kwargs)
    if backend == "cython":
        if CompiledTrack is None:
            raise RuntimeError("compiled track kernel is not available")
        return CompiledTrack(*args, **kwargs)
    raise ValueError(f"unknown backend {backend!r}")
