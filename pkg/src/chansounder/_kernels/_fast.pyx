# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot-path kernels: LFSR stepping, FIR filtering, direct correlation."""

import numpy as np

cimport numpy as cnp

cnp.import_array()


def glfsr_bits(unsigned long long mask, unsigned long long seed, long nsteps):
    """Run a Galois LFSR for nsteps, one output bit (the LSB) per step.

    mask is the feedback pattern XORed into the state whenever the output
    bit is 1. Returns (bits, period) where period is the first step count
    at which the state returned to the seed, or 0 if it never did.
    """
    cdef cnp.ndarray[cnp.uint8_t, ndim=1] bits = np.empty(nsteps, dtype=np.uint8)
    cdef unsigned long long state = seed
    cdef unsigned long long out
    cdef long i
    cdef long period = 0
    for i in range(nsteps):
        out = state & 1
        bits[i] = <unsigned char> out
        state >>= 1
        if out:
            state ^= mask
        if period == 0 and state == seed:
            period = i + 1
    return bits, period


def fir_filter(cnp.ndarray[cnp.complex128_t, ndim=1] x,
               cnp.ndarray[cnp.float64_t, ndim=1] taps):
    """Full linear convolution of a complex signal with real taps.

    Zero input samples are skipped, which makes filtering zero-stuffed
    impulse trains (pulse shaping) cost only nonzero * ntaps operations.
    """
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t m = taps.shape[0]
    cdef cnp.ndarray[cnp.complex128_t, ndim=1] out = np.zeros(n + m - 1, dtype=np.complex128)
    cdef Py_ssize_t i, j
    cdef double complex xi
    for i in range(n):
        xi = x[i]
        if xi.real == 0.0 and xi.imag == 0.0:
            continue
        for j in range(m):
            out[i + j] = out[i + j] + xi * taps[j]
    return out


def circular_correlate_direct(cnp.ndarray[cnp.float64_t, ndim=1] ref,
                              cnp.ndarray[cnp.complex128_t, ndim=1] obs):
    """Direct O(N^2) circular correlation, normalized by 1/N."""
    cdef Py_ssize_t n = ref.shape[0]
    cdef cnp.ndarray[cnp.complex128_t, ndim=1] out = np.empty(n, dtype=np.complex128)
    cdef Py_ssize_t lag, m, idx
    cdef double complex acc
    for lag in range(n):
        acc = 0
        for m in range(n):
            idx = m + lag
            if idx >= n:
                idx -= n
            acc = acc + ref[m] * obs[idx]
        out[lag] = acc / n
    return out
