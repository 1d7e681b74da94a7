#!/usr/bin/env python3
"""Benchmark the compiled kernels against the numpy fallbacks.

Times the three kernel entry points on sounding-sized inputs plus the
FFT correlation production path for reference. Run from the repo root:

    python benchmarks/bench_kernels.py
"""

import timeit

import numpy as np

from chansounder import _kernels, pn
from chansounder._kernels import pure

try:
    from chansounder._kernels import _fast
except ImportError:
    _fast = None


def best_of(func, repeats=5, number=10):
    timer = timeit.Timer(func)
    return min(timer.repeat(repeats, number)) / number


def fmt(seconds):
    if seconds < 1e-3:
        return f"{seconds * 1e6:8.1f} us"
    return f"{seconds * 1e3:8.2f} ms"


def row(name, pure_time, fast_time):
    if fast_time is None:
        print(f"{name:<38} {fmt(pure_time)}   {'n/a':>11}")
    else:
        print(f"{name:<38} {fmt(pure_time)}   {fmt(fast_time)}   "
              f"x{pure_time / fast_time:5.1f}")


def main():
    print(f"active backend: {_kernels.BACKEND}")
    if _fast is None:
        print("compiled extension not built; timing the fallback only\n")
    print(f"{'kernel':<38} {'numpy':>11}   {'cython':>11}   speedup")

    rng = np.random.default_rng(0)
    mask = 0b10000001001 >> 1

    # LFSR stepping: one full degree-16 period
    steps = 2**16 - 1
    mask16 = 0b10001000000001011 >> 1  # x^16 + x^12 + x^3 + x + 1
    row("glfsr_bits (degree 16, 65535 steps)",
        best_of(lambda: pure.glfsr_bits(mask16, 1, steps), number=3),
        None if _fast is None else
        best_of(lambda: _fast.glfsr_bits(mask16, 1, steps), number=3))

    # pulse shaping: zero-stuffed impulse train through 49 RRC taps
    train = np.zeros(12 * 1023 * 4, dtype=np.complex128)
    train[::4] = rng.normal(size=12 * 1023)
    taps = rng.normal(size=49)
    row("fir_filter (49k-sample impulse train)",
        best_of(lambda: pure.fir_filter(train, taps), number=3),
        None if _fast is None else
        best_of(lambda: _fast.fir_filter(train, taps), number=3))

    # matched filtering: dense complex capture
    dense = rng.normal(size=50_000) + 1j * rng.normal(size=50_000)
    row("fir_filter (50k dense samples)",
        best_of(lambda: pure.fir_filter(dense, taps), number=3),
        None if _fast is None else
        best_of(lambda: _fast.fir_filter(dense, taps), number=3))

    # direct correlation across all 1023 lags
    chips = pn.generate_glfsr(10)
    observed = rng.normal(size=1023) + 1j * rng.normal(size=1023)
    row("circular_correlate_direct (N=1023)",
        best_of(lambda: pure.circular_correlate_direct(chips.chips, observed),
                number=3),
        None if _fast is None else
        best_of(lambda: _fast.circular_correlate_direct(chips.chips, observed),
                number=3))

    fft_time = best_of(lambda: pn.circular_correlate(chips, observed),
                       number=20)
    print(f"{'circular_correlate FFT production path':<38} "
          f"{fmt(fft_time)}   (reference)")


if __name__ == "__main__":
    main()
