"""Sliding-correlator receiver: correlation profiles to delay profiles.

The capture is averaged coherently over M chip periods, correlated
against the reference sequence, bias-corrected for the deterministic
-1/N sidelobe floor of maximal-length sequences, and thresholded into a
set of taps. Wideband path loss and RMS delay spread derive from the
surviving taps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from chansounder.exceptions import NoSignalError
from chansounder.pn import ChipSequence, circular_correlate
from chansounder.pulse import (
    BasebandSignal,
    FilterTaps,
    estimate_timing_phase,
    recover_symbols,
)

DETECTION_SIGMA_FACTOR = 5.0


@dataclass(frozen=True)
class SounderConfig:
    """Sliding-correlator receiver settings."""

    chip_period: float = 60e-9
    pn_degree: int = 10
    averaging_periods: int = 10
    detection_threshold_db: float = 30.0
    tx_power_db: float = 0.0

    def __post_init__(self):
        if self.chip_period <= 0:
            raise ValueError("chip_period must be positive")
        if self.averaging_periods < 1:
            raise ValueError("averaging_periods must be >= 1")
        if self.detection_threshold_db <= 0:
            raise ValueError("detection_threshold_db must be positive")


@dataclass(frozen=True)
class DelayProfile:
    """Estimated taps at chip-lag resolution plus derived scalars."""

    lags: np.ndarray
    gains: np.ndarray
    chip_period: float
    wideband_path_loss_db: float
    rms_delay_spread: float

    def __post_init__(self):
        lags = np.asarray(self.lags, dtype=np.int64)
        gains = np.asarray(self.gains, dtype=np.complex128)
        object.__setattr__(self, "lags", lags)
        object.__setattr__(self, "gains", gains)
        if len(lags) < 1 or len(lags) != len(gains):
            raise ValueError("need matching, nonempty lag and gain lists")
        if lags[0] < 0 or np.any(np.diff(lags) <= 0):
            raise ValueError("lags must be nonnegative and strictly increasing")
        if self.rms_delay_spread < 0:
            raise ValueError("rms_delay_spread must be nonnegative")
        span = (lags[-1] - lags[0]) * self.chip_period
        if self.rms_delay_spread > span + 1e-15:
            raise ValueError("rms_delay_spread exceeds the tap span")

    @property
    def tap_count(self) -> int:
        return len(self.lags)


def wideband_path_loss(gains, tx_power_db: float) -> float:
    """Transmit power minus the total power across all taps, in dB."""
    gains = np.asarray(gains, dtype=np.complex128)
    if len(gains) < 1:
        raise ValueError("need at least one tap")
    total = float(np.sum(np.abs(gains) ** 2))
    if total == 0.0:
        raise ValueError("total tap power is zero")
    return tx_power_db - 10.0 * math.log10(total)


def rms_delay_spread(lags, gains, chip_period: float) -> float:
    """Square root of the power-weighted second central moment of delay."""
    lags = np.asarray(lags, dtype=np.float64)
    powers = np.abs(np.asarray(gains, dtype=np.complex128)) ** 2
    if len(lags) < 1:
        raise ValueError("need at least one tap")
    # the spread is translation invariant; shifting to the first tap keeps
    # the single-tap case exactly zero
    delays = (lags - lags[0]) * chip_period
    mean = float(np.sum(powers * delays) / np.sum(powers))
    second = float(np.sum(powers * delays**2) / np.sum(powers))
    return math.sqrt(max(second - mean**2, 0.0))


def _threshold(corrected: np.ndarray, config: SounderConfig):
    magnitudes = np.abs(corrected)
    peak = float(magnitudes.max())
    if peak == 0.0:
        raise NoSignalError("correlation profile is identically zero")
    relative_floor = peak * 10.0 ** (-config.detection_threshold_db / 20.0)
    off_peak = magnitudes[magnitudes < relative_floor]
    noise_floor = DETECTION_SIGMA_FACTOR * float(off_peak.std()) if len(off_peak) else 0.0
    threshold = max(relative_floor, noise_floor)
    detected = np.nonzero(magnitudes >= threshold)[0]
    if len(detected) == 0 or len(detected) > len(corrected) // 2:
        raise NoSignalError(
            "no correlation lag stands clear of the detection floor"
        )
    return detected


def _detect_taps(mean_period: np.ndarray, chips: ChipSequence,
                 config: SounderConfig):
    """Correlate one averaged period and threshold it into tap lags.

    For an m-sequence, every tap contributes exactly -gain/N to all other
    lags. A first pass estimates the total gain from the lag-wise profile
    sum (exact in the noiseless case); a refinement pass re-estimates it
    from the detected taps only, which keeps the off-peak noise floor at
    the correlator's own level instead of folding the whole profile's
    noise back in.
    """
    n = chips.period_length
    profile = circular_correlate(chips, mean_period).values
    gain_sum = np.sum(profile)  # equals (sum of tap gains) / N + noise
    detected = None
    for _ in range(2):
        corrected = (profile + gain_sum) * (n / (n + 1.0))
        detected = _threshold(corrected, config)
        gain_sum = np.sum(corrected[detected]) / n
    return detected, corrected


def _rotate_to_first_arrival(lags: np.ndarray, period: int) -> np.ndarray:
    """Pick the first-arrival lag on the circle of correlation lags.

    Delay profiles are relative (first path at lag 0), so a capture that
    starts mid-sequence only rotates the lag set. The first arrival is
    the lag following the largest circular gap.
    """
    if len(lags) == 1:
        return lags[0]
    gaps = np.diff(np.concatenate([lags, [lags[0] + period]]))
    return lags[(int(np.argmax(gaps)) + 1) % len(lags)]


def sound(symbols, chips: ChipSequence, config: SounderConfig) -> DelayProfile:
    """Estimate the delay profile from symbol-rate capture samples.

    Averages M consecutive chip periods coherently, correlates once (the
    two commute), removes the exactly computable -1/N sidelobe bias, and
    keeps every lag whose magnitude clears both the relative detection
    threshold and five empirical off-peak standard deviations. Lags are
    reported relative to the first arrival.

    Raises NoSignalError when no lag rises above the detection floor.
    """
    symbols = np.asarray(symbols, dtype=np.complex128)
    n = chips.period_length
    m = config.averaging_periods
    if len(symbols) < m * n:
        raise ValueError(
            f"capture of {len(symbols)} symbols is shorter than "
            f"{m} periods ({m * n} symbols)"
        )
    mean_period = symbols[: m * n].reshape(m, n).mean(axis=0)
    detected, corrected = _detect_taps(mean_period, chips, config)

    # Re-running detection on the period vector rolled to put the first
    # arrival at lag 0 makes the result bit-identical for captures that
    # start anywhere inside the periodic steady state.
    first = _rotate_to_first_arrival(detected, n)
    if first != 0:
        detected, corrected = _detect_taps(np.roll(mean_period, -int(first)),
                                           chips, config)
        first = _rotate_to_first_arrival(detected, n)
    relative = (detected - first) % n
    order = np.argsort(relative)
    lags = relative[order]
    gains = corrected[detected[order]]

    return DelayProfile(
        lags=lags,
        gains=gains,
        chip_period=config.chip_period,
        wideband_path_loss_db=wideband_path_loss(gains, config.tx_power_db),
        rms_delay_spread=rms_delay_spread(lags, gains, config.chip_period),
    )


def measure_sliding(capture: BasebandSignal, chips: ChipSequence,
                    taps: FilterTaps, config: SounderConfig,
                    settle_periods: int = 1,
                    phase: int | None = None) -> DelayProfile:
    """Full receive chain: timing phase search, matched filtering,
    symbol recovery, then sound().

    The capture must hold settle_periods + averaging_periods chip periods
    of shaped waveform; the leading settle keeps filter ramp-in out of
    the averaged window.
    """
    n = chips.period_length
    skip = settle_periods * n
    if phase is None:
        phase = estimate_timing_phase(capture, chips, taps, skip_symbols=skip)
    symbols = recover_symbols(capture, taps, phase)
    window = symbols[skip: skip + config.averaging_periods * n]
    return sound(window, chips, config)


def profile_to_json(profile: DelayProfile) -> dict:
    return {
        "chip_period_s": profile.chip_period,
        "taps": [
            {"lag": int(lag), "gain_re": float(g.real), "gain_im": float(g.imag)}
            for lag, g in zip(profile.lags, profile.gains)
        ],
        "path_loss_db": profile.wideband_path_loss_db,
        "rms_delay_spread_s": profile.rms_delay_spread,
    }


def profile_from_json(doc: dict) -> DelayProfile:
    lags = [t["lag"] for t in doc["taps"]]
    gains = [complex(t["gain_re"], t["gain_im"]) for t in doc["taps"]]
    return DelayProfile(
        lags=np.array(lags, dtype=np.int64),
        gains=np.array(gains, dtype=np.complex128),
        chip_period=float(doc["chip_period_s"]),
        wideband_path_loss_db=float(doc["path_loss_db"]),
        rms_delay_spread=float(doc["rms_delay_spread_s"]),
    )
