"""Maximal-length PN chip sequences and circular correlation.

A Galois LFSR with a primitive feedback polynomial produces an m-sequence
whose periodic autocorrelation is two-valued: 1 at zero lag and -1/N at
every other lag. That property is what turns a correlator output into a
multipath delay profile, so generation rejects any polynomial that does
not achieve the full period.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from chansounder import _kernels

# Primitive feedback polynomials (bit i = coefficient of x^i). The degree-10
# default is x^10 + x^3 + 1; any primitive polynomial gives the same
# autocorrelation, fixing one keeps generated files stable.
DEFAULT_POLYNOMIALS = {
    2: 0b111,
    3: 0b1011,
    4: 0b10011,
    5: 0b100101,
    6: 0b1000011,
    7: 0b10001001,
    8: 0b100011101,
    9: 0b1000010001,
    10: 0b10000001001,
    11: 0b100000000101,
    12: 0b1000001010011,
}

MAX_DEGREE = 24  # exhaustive period verification beyond this gets expensive


@dataclass(frozen=True)
class ChipSequence:
    """One period of a bipolar maximal-length chip sequence."""

    chips: np.ndarray
    period_length: int

    def __post_init__(self):
        chips = np.asarray(self.chips, dtype=np.float64)
        object.__setattr__(self, "chips", chips)
        if len(chips) != self.period_length:
            raise ValueError(
                f"chip count {len(chips)} != period_length {self.period_length}"
            )
        n_plus_1 = self.period_length + 1
        if self.period_length < 3 or n_plus_1 & (n_plus_1 - 1) != 0:
            raise ValueError(
                f"period_length {self.period_length} is not 2^degree - 1"
            )
        if not np.all(np.abs(chips) == 1.0):
            raise ValueError("chips must all be +1 or -1")
        positives = int(np.sum(chips > 0))
        negatives = self.period_length - positives
        if abs(positives - negatives) != 1:
            raise ValueError(
                f"sequence is not balanced: {positives} x +1 vs {negatives} x -1"
            )

    @property
    def degree(self) -> int:
        return (self.period_length + 1).bit_length() - 1


@dataclass(frozen=True)
class CorrelationProfile:
    """Normalized circular correlation values over one period of lags."""

    values: np.ndarray
    normalization: float = field(default=0.0)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.complex128)
        object.__setattr__(self, "values", values)
        if not np.all(np.isfinite(values.view(np.float64))):
            raise ValueError("correlation values must be finite")
        if self.normalization == 0.0:
            object.__setattr__(self, "normalization", 1.0 / len(values))


def generate_glfsr(degree: int = 10, polynomial: int | None = None,
                   seed_state: int = 1) -> ChipSequence:
    """Generate one full period of a maximal-length sequence.

    The register steps in Galois form; the output bit is mapped 1 -> -1,
    0 -> +1. Raises ValueError if the polynomial is not primitive (the
    state does not take exactly 2^degree - 1 steps to return to the seed)
    or if the seed is zero.
    """
    if degree < 2:
        raise ValueError("degree must be at least 2")
    if degree > MAX_DEGREE:
        raise ValueError(f"degree {degree} exceeds supported maximum {MAX_DEGREE}")
    if polynomial is None:
        try:
            polynomial = DEFAULT_POLYNOMIALS[degree]
        except KeyError:
            raise ValueError(
                f"no default polynomial for degree {degree}; pass one explicitly"
            ) from None
    if polynomial >> degree != 1:
        raise ValueError(
            f"polynomial 0x{polynomial:x} does not have degree {degree}"
        )
    if polynomial & 1 != 1:
        raise ValueError("feedback polynomial must have a nonzero constant term")
    if seed_state == 0:
        raise ValueError("seed state must be nonzero")
    if seed_state >> degree != 0:
        raise ValueError(f"seed state 0x{seed_state:x} does not fit in {degree} bits")

    n = (1 << degree) - 1
    # Folding the x^degree..x^1 terms down one bit gives the state mask for
    # the right-shift Galois update.
    mask = polynomial >> 1
    bits, period = _kernels.glfsr_bits(mask, seed_state, n)
    if period != n:
        raise ValueError(
            f"polynomial 0x{polynomial:x} is not primitive: register period "
            f"{period or '>' + str(n)} != {n}"
        )
    chips = 1.0 - 2.0 * bits.astype(np.float64)
    return ChipSequence(chips=chips, period_length=n)


def periodic_chip(sequence: ChipSequence, n: int) -> float:
    """Chip value of the periodic extension at index n (n may be negative)."""
    return float(sequence.chips[n % sequence.period_length])


def circular_correlate(reference: ChipSequence, observed) -> CorrelationProfile:
    """Normalized circular correlation of a chip sequence against N samples.

    values[n] = (1/N) * sum_m reference[m] * observed[(m + n) mod N], so an
    observation that is the reference delayed by d chips peaks at lag d.
    Computed via FFT; see circular_correlate_direct for the direct route.
    """
    n = reference.period_length
    observed = np.asarray(observed, dtype=np.complex128)
    if observed.shape != (n,):
        raise ValueError(
            f"observed length {observed.shape} does not match period {n}"
        )
    spectrum = np.conj(np.fft.fft(reference.chips)) * np.fft.fft(observed)
    values = np.fft.ifft(spectrum) / n
    return CorrelationProfile(values=values, normalization=1.0 / n)


def circular_correlate_direct(reference: ChipSequence, observed) -> CorrelationProfile:
    """Direct O(N^2) evaluation of the same correlation (slow reference path)."""
    n = reference.period_length
    observed = np.asarray(observed, dtype=np.complex128)
    if observed.shape != (n,):
        raise ValueError(
            f"observed length {observed.shape} does not match period {n}"
        )
    values = _kernels.circular_correlate_direct(reference.chips, observed)
    return CorrelationProfile(values=values, normalization=1.0 / n)


def save_chips(sequence: ChipSequence, path) -> None:
    """Write one +1/-1 integer per line."""
    lines = "\n".join(str(int(c)) for c in sequence.chips)
    Path(path).write_text(lines + "\n")


def load_chips(path) -> ChipSequence:
    values = [int(line) for line in Path(path).read_text().split()]
    return ChipSequence(chips=np.array(values, dtype=np.float64),
                        period_length=len(values))
