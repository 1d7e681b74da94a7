"""Kernel backend selection.

Prefers the compiled Cython extension; falls back to the numpy
implementations in :mod:`chansounder._kernels.pure`. Set the environment
variable ``CHANSOUNDER_PURE_PYTHON=1`` to force the fallback.
"""

import os

if os.environ.get("CHANSOUNDER_PURE_PYTHON") == "1":
    from chansounder._kernels.pure import (
        circular_correlate_direct,
        fir_filter,
        glfsr_bits,
    )

    BACKEND = "numpy"
else:
    try:
        from chansounder._kernels._fast import (
            circular_correlate_direct,
            fir_filter,
            glfsr_bits,
        )

        BACKEND = "cython"
    except ImportError:
        from chansounder._kernels.pure import (
            circular_correlate_direct,
            fir_filter,
            glfsr_bits,
        )

        BACKEND = "numpy"

__all__ = ["BACKEND", "circular_correlate_direct", "fir_filter", "glfsr_bits"]
