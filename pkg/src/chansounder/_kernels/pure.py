"""Pure numpy fallbacks for the compiled kernels.

Same signatures and semantics as ``chansounder._kernels._fast``; used when
the extension is unavailable or when CHANSOUNDER_PURE_PYTHON=1.
"""

import numpy as np


def glfsr_bits(mask: int, seed: int, nsteps: int):
    """Galois LFSR output bits plus first-return period (0 if none)."""
    bits = np.empty(nsteps, dtype=np.uint8)
    state = seed
    period = 0
    for i in range(nsteps):
        out = state & 1
        bits[i] = out
        state >>= 1
        if out:
            state ^= mask
        if period == 0 and state == seed:
            period = i + 1
    return bits, period


def fir_filter(x: np.ndarray, taps: np.ndarray) -> np.ndarray:
    """Full linear convolution of a complex signal with real taps."""
    return np.convolve(np.asarray(x, dtype=np.complex128), taps)


def circular_correlate_direct(ref: np.ndarray, obs: np.ndarray) -> np.ndarray:
    """Direct O(N^2) circular correlation, normalized by 1/N."""
    n = len(ref)
    out = np.empty(n, dtype=np.complex128)
    for lag in range(n):
        out[lag] = np.dot(ref, np.roll(obs, -lag)) / n
    return out
