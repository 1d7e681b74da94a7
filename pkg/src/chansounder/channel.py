"""Tapped-delay-line multipath channels and synthetic environments.

Channels are static per measurement: a list of complex gains at
nonnegative delays, applied to baseband signals as scaled, shifted
copies. Delays must land on the signal's sample grid; fractional delays
are rejected rather than silently rounded so estimator error stays
attributable. The closed-form transfer function doubles as the test
oracle for the frequency-domain sounder.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from chansounder.pulse import BasebandSignal


@dataclass(frozen=True)
class MultipathChannel:
    """Complex tap gains at strictly increasing delays, first delay zero."""

    gains: np.ndarray
    delays: np.ndarray

    def __post_init__(self):
        gains = np.asarray(self.gains, dtype=np.complex128)
        delays = np.asarray(self.delays, dtype=np.float64)
        object.__setattr__(self, "gains", gains)
        object.__setattr__(self, "delays", delays)
        if len(gains) < 1 or len(gains) != len(delays):
            raise ValueError("need matching, nonempty gain and delay lists")
        if delays[0] != 0.0:
            raise ValueError("first tap delay must be 0 (delays are relative)")
        if np.any(np.diff(delays) <= 0):
            raise ValueError("delays must be strictly increasing")
        if not np.all(np.isfinite(gains.view(np.float64))):
            raise ValueError("gains must be finite")
        if not np.any(gains != 0):
            raise ValueError("at least one gain must be nonzero")

    @property
    def tap_count(self) -> int:
        return len(self.gains)

    def total_power(self) -> float:
        return float(np.sum(np.abs(self.gains) ** 2))


@dataclass(frozen=True)
class EnvironmentModel:
    """Log-distance environment used to synthesize campaign channels."""

    reference_loss_db: float
    path_loss_exponent: float
    reference_distance_m: float = 1.0
    delay_spread_scale_s: float = 0.0
    tap_count_range: tuple = (1, 1)
    wall_loss_db: float = 0.0
    wall_grid_spacing_m: float | None = None
    rng_seed: int = 0

    def __post_init__(self):
        if self.path_loss_exponent <= 0:
            raise ValueError("path_loss_exponent must be positive")
        if self.reference_distance_m <= 0:
            raise ValueError("reference_distance_m must be positive")
        if self.delay_spread_scale_s < 0:
            raise ValueError("delay_spread_scale_s must be nonnegative")
        lo, hi = self.tap_count_range
        if not (1 <= lo <= hi):
            raise ValueError(f"bad tap_count_range {self.tap_count_range}")
        if self.wall_loss_db < 0:
            raise ValueError("wall_loss_db must be nonnegative")


def apply_channel(signal: BasebandSignal, channel: MultipathChannel) -> BasebandSignal:
    """Superpose scaled, delayed copies of the signal.

    Every tap delay must be an integer number of samples; the output is
    extended by the largest delay so no energy is dropped.
    """
    shifts = []
    for i, delay in enumerate(channel.delays):
        exact = delay * signal.sample_rate
        shift = int(round(exact))
        if abs(exact - shift) > 1e-6:
            raise ValueError(
                f"tap {i}: delay {delay!r} s is not an integer number of "
                f"samples at {signal.sample_rate!r} Hz"
            )
        shifts.append(shift)
    out = np.zeros(len(signal) + shifts[-1], dtype=np.complex128)
    for gain, shift in zip(channel.gains, shifts):
        out[shift:shift + len(signal)] += gain * signal.samples
    return BasebandSignal(samples=out, sample_rate=signal.sample_rate,
                          origin_time=signal.origin_time)


def add_awgn(signal: BasebandSignal, noise_power_dbfs: float,
             seed: int) -> BasebandSignal:
    """Add circularly symmetric complex Gaussian noise.

    noise_power_dbfs is the total noise variance in dB; -inf leaves the
    signal untouched. Deterministic for a fixed seed.
    """
    if noise_power_dbfs == -math.inf:
        return signal
    rng = np.random.default_rng(seed)
    sigma = math.sqrt(10.0 ** (noise_power_dbfs / 10.0) / 2.0)
    noise = rng.normal(scale=sigma, size=len(signal)) \
        + 1j * rng.normal(scale=sigma, size=len(signal))
    return BasebandSignal(samples=signal.samples + noise,
                          sample_rate=signal.sample_rate,
                          origin_time=signal.origin_time)


def frequency_response(channel: MultipathChannel, frequency):
    """Exact transfer value H(f) = sum_l gain_l * exp(-j*2*pi*f*delay_l)."""
    f = np.asarray(frequency, dtype=np.float64)
    phases = np.exp(-2j * np.pi * np.outer(f, channel.delays))
    response = np.sum(channel.gains * phases, axis=-1)
    if np.isscalar(frequency) or f.ndim == 0:
        return complex(response.reshape(-1)[0])
    return response


def _wall_crossings(env: EnvironmentModel, tx_position, rx_position) -> int:
    if env.wall_grid_spacing_m is None or env.wall_loss_db == 0.0:
        return 0
    g = env.wall_grid_spacing_m
    crossings = 0
    for axis in (0, 1):
        crossings += abs(math.floor(rx_position[axis] / g)
                         - math.floor(tx_position[axis] / g))
    return crossings


def synthesize_channel(env: EnvironmentModel, tx_position, rx_position,
                       seed: int, delay_grid_s: float = 60e-9):
    """Draw a multipath channel for a transmitter/receiver pair.

    Tap delays start at zero with exponential inter-arrivals snapped to
    the simulation delay grid; tap powers decay exponentially and are
    normalized so the total power matches the log-distance path loss
    (plus wall losses). Returns (channel, true_path_loss_db).
    """
    tx = np.asarray(tx_position, dtype=np.float64)
    rx = np.asarray(rx_position, dtype=np.float64)
    distance = float(np.linalg.norm(rx - tx))
    if distance == 0.0:
        raise ValueError("transmitter and receiver positions coincide")

    loss_db = (env.reference_loss_db
               + 10.0 * env.path_loss_exponent
               * math.log10(distance / env.reference_distance_m)
               + env.wall_loss_db * _wall_crossings(env, tx_position, rx_position))

    rng = np.random.default_rng(seed)
    lo, hi = env.tap_count_range
    tap_count = int(rng.integers(lo, hi + 1))
    if env.delay_spread_scale_s == 0.0:
        tap_count = 1

    delays = np.zeros(tap_count)
    if tap_count > 1:
        raw = np.cumsum(rng.exponential(env.delay_spread_scale_s, tap_count - 1))
        grid_steps = 0
        for k in range(1, tap_count):
            grid_steps = max(int(round(raw[k - 1] / delay_grid_s)), grid_steps + 1)
            delays[k] = grid_steps * delay_grid_s

    if env.delay_spread_scale_s > 0.0:
        powers = np.exp(-delays / env.delay_spread_scale_s)
    else:
        powers = np.ones(tap_count)
    powers *= 10.0 ** (-loss_db / 10.0) / np.sum(powers)
    phases = rng.uniform(0.0, 2.0 * np.pi, tap_count)
    gains = np.sqrt(powers) * np.exp(1j * phases)
    return MultipathChannel(gains=gains, delays=delays), loss_db


def channel_to_json(channel: MultipathChannel) -> list:
    return [
        {"gain_re": float(g.real), "gain_im": float(g.imag), "delay_s": float(d)}
        for g, d in zip(channel.gains, channel.delays)
    ]


def channel_from_json(taps: list) -> MultipathChannel:
    gains = [complex(t["gain_re"], t["gain_im"]) for t in taps]
    delays = [t["delay_s"] for t in taps]
    return MultipathChannel(gains=np.array(gains), delays=np.array(delays))


def save_channel(channel: MultipathChannel, path) -> None:
    Path(path).write_text(json.dumps(channel_to_json(channel), indent=2) + "\n")


def load_channel(path) -> MultipathChannel:
    return channel_from_json(json.loads(Path(path).read_text()))
