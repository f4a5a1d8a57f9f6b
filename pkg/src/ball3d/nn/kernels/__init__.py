"""Recurrence kernel backend selection.

The compiled Cython kernels are used when the extension built; otherwise the
numpy fallback is selected. Set BALL3D_FORCE_FALLBACK=1 to force the pure
Python path (used by the parity tests and the benchmark).
"""

import os

from . import _recurrence_py

if os.environ.get("BALL3D_FORCE_FALLBACK"):
    impl = _recurrence_py
    BACKEND = "python"
else:
    try:
        from . import _recurrence_cy as impl  # type: ignore[attr-defined]

        BACKEND = "cython"
    except ImportError:
        impl = _recurrence_py
        BACKEND = "python"

lstm_seq_forward = impl.lstm_seq_forward
lstm_seq_backward = impl.lstm_seq_backward
accum_seq_forward = impl.accum_seq_forward
accum_seq_backward = impl.accum_seq_backward
# single-step generation is never a hot path; always the numpy version
lstm_cell_step = _recurrence_py.lstm_cell_step
