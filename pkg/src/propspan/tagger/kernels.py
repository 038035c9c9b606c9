"""Hot-loop kernels for the tagger.

The numba backend is used when numba imports cleanly, unless the
``PROPSPAN_DISABLE_JIT`` environment variable is set to a non-empty value
other than ``0``. Both backends produce identical decisions; the flag only
changes speed.
"""

import os

from . import _numpy_kernels

_disabled = os.environ.get("PROPSPAN_DISABLE_JIT", "") not in ("", "0")

if _disabled:
    _impl = _numpy_kernels
    BACKEND = "numpy"
else:
    try:
        from . import _numba_kernels as _impl

        BACKEND = "numba"
    except ImportError:  # numba missing or broken
        _impl = _numpy_kernels
        BACKEND = "numpy"

emission_scores = _impl.emission_scores
viterbi = _impl.viterbi
path_score = _impl.path_score
perceptron_update = _impl.perceptron_update
transition_update = _impl.transition_update

__all__ = [
    "BACKEND",
    "emission_scores",
    "viterbi",
    "path_score",
    "perceptron_update",
    "transition_update",
]
