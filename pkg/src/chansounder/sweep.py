"""Stepped-frequency sounding: tones, FFT-bin powers, narrowband losses.

A transmitter steps through a carrier list emitting a baseband tone at
its assigned offset; the receiver takes a length-L FFT and reads the
tone's power from its bin. Tones are required to sit exactly on the FFT
bin grid so rectangular windowing keeps simultaneous transmitters
orthogonal; off-grid offsets are rejected outright.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from chansounder.channel import MultipathChannel
from chansounder.pulse import BasebandSignal

DEFAULT_SAMPLE_RATE = 1e6
DEFAULT_FFT_LENGTH = 4096
DEFAULT_GUARD_BAND = 25e3
DEFAULT_CARRIER_SPACING = 2e6
DEFAULT_CARRIER_COUNT = 10
DEFAULT_CARRIER_START = 700e6


@dataclass(frozen=True)
class SweepPlan:
    """Carrier list plus tone assignment for one synchronized sweep."""

    carrier_list: np.ndarray
    tone_offsets: np.ndarray
    step_duration: float
    sample_rate: float
    fft_length: int
    guard_band: float

    def __post_init__(self):
        carriers = np.asarray(self.carrier_list, dtype=np.float64)
        tones = np.asarray(self.tone_offsets, dtype=np.float64)
        object.__setattr__(self, "carrier_list", carriers)
        object.__setattr__(self, "tone_offsets", tones)
        if self.sample_rate <= 0 or self.fft_length < 2:
            raise ValueError("sample_rate and fft_length must be positive")
        if self.guard_band < 0:
            raise ValueError("guard_band must be nonnegative")
        if len(carriers) < 1 or len(tones) < 1:
            raise ValueError("need at least one carrier and one tone")
        if round(self.step_duration * self.sample_rate) < self.fft_length:
            raise ValueError("step_duration too short for one FFT window")
        spacing = np.diff(carriers)
        if len(spacing) and (np.any(spacing <= 0)
                             or np.max(np.abs(spacing - spacing[0])) > 1e-6 * abs(spacing[0])):
            raise ValueError("carriers must be strictly increasing with uniform spacing")
        nyquist = self.sample_rate / 2.0
        bin_width = self.sample_rate / self.fft_length
        for k, f in enumerate(tones):
            if abs(f) >= nyquist:
                raise ValueError(f"tone {k} at {f} Hz violates Nyquist band (+-{nyquist} Hz)")
            if abs(f / bin_width - round(f / bin_width)) > 1e-6:
                raise ValueError(
                    f"tone {k} at {f} Hz is not a multiple of the bin width "
                    f"{bin_width} Hz"
                )
        for j in range(len(tones)):
            for k in range(j + 1, len(tones)):
                if abs(tones[j] - tones[k]) < self.guard_band:
                    raise ValueError(
                        f"tones {j} and {k} are separated by "
                        f"{abs(tones[j] - tones[k])} Hz < guard band {self.guard_band} Hz"
                    )

    @property
    def step_count(self) -> int:
        return len(self.carrier_list)

    @property
    def carrier_spacing(self) -> float:
        if len(self.carrier_list) < 2:
            raise ValueError("need at least two carriers for a spacing")
        return float(self.carrier_list[1] - self.carrier_list[0])

    def bin_index(self, tone_offset: float) -> int:
        return int(round(self.fft_length * tone_offset / self.sample_rate)) % self.fft_length


@dataclass(frozen=True)
class NarrowbandLossSet:
    """Per-carrier narrowband path losses for one transmitter."""

    per_carrier_loss_db: np.ndarray
    transmitter_id: str
    tone_offset: float

    def __post_init__(self):
        losses = np.asarray(self.per_carrier_loss_db, dtype=np.float64)
        object.__setattr__(self, "per_carrier_loss_db", losses)
        if len(losses) < 1:
            raise ValueError("need at least one loss entry")
        if not np.all(np.isfinite(losses)):
            raise ValueError("losses must be finite")


@dataclass(frozen=True)
class PhaseNoiseSkirt:
    """Spectral skirt around each tone, power falling off per decade.

    Models oscillator phase noise as a noise density ref_level_dbc
    (dBc/Hz) below the tone at ref_offset_hz, decaying a further
    slope_db_per_decade with offset. Off by default everywhere.
    """

    ref_offset_hz: float
    ref_level_dbc: float
    slope_db_per_decade: float

    def level_dbc(self, offset_hz) -> np.ndarray:
        offset = np.maximum(np.abs(offset_hz), 1e-3)
        return -(self.ref_level_dbc
                 + self.slope_db_per_decade * np.log10(offset / self.ref_offset_hz))


def default_sweep_plan(tone_offsets=None) -> SweepPlan:
    """Ten carriers at 2 MHz spacing with simulation-friendly defaults."""
    carriers = DEFAULT_CARRIER_START + DEFAULT_CARRIER_SPACING * np.arange(DEFAULT_CARRIER_COUNT)
    bin_width = DEFAULT_SAMPLE_RATE / DEFAULT_FFT_LENGTH
    if tone_offsets is None:
        tone_offsets = [round(100e3 / bin_width) * bin_width]
    return SweepPlan(
        carrier_list=carriers,
        tone_offsets=np.asarray(tone_offsets, dtype=np.float64),
        step_duration=5e-3,
        sample_rate=DEFAULT_SAMPLE_RATE,
        fft_length=DEFAULT_FFT_LENGTH,
        guard_band=DEFAULT_GUARD_BAND,
    )


def generate_tone(offset: float, duration: float, sample_rate: float,
                  amplitude: float = 1.0) -> BasebandSignal:
    """Complex exponential amplitude * exp(j*2*pi*offset*t)."""
    if abs(offset) >= sample_rate / 2.0:
        raise ValueError(
            f"tone at {offset} Hz aliases at sample rate {sample_rate} Hz"
        )
    n = int(round(duration * sample_rate))
    t = np.arange(n) / sample_rate
    return BasebandSignal(samples=amplitude * np.exp(2j * np.pi * offset * t),
                          sample_rate=sample_rate)


def bin_power(capture: BasebandSignal, plan: SweepPlan, tone_offset: float) -> float:
    """Received power of one tone, read from its FFT bin.

    Takes a length-L DFT over the first L samples (an integer number of
    tone periods for bin-centered tones) and returns |X[bin]|^2 / L^2.
    Negative offsets wrap to the upper bins.
    """
    if not np.any(np.abs(plan.tone_offsets - tone_offset) < 1e-9):
        raise ValueError(f"tone offset {tone_offset} Hz is not part of the plan")
    length = plan.fft_length
    if len(capture) < length:
        raise ValueError(
            f"capture of {len(capture)} samples is shorter than the "
            f"FFT length {length}"
        )
    spectrum = np.fft.fft(capture.samples[:length])
    magnitude = abs(spectrum[plan.bin_index(tone_offset)])
    return (magnitude / length) ** 2


def received_tone(channel: MultipathChannel, carrier: float, tone_offset: float,
                  plan: SweepPlan, amplitude: float) -> np.ndarray:
    """Steady-state received tone samples through a multipath channel.

    Each tap contributes a copy of the tone scaled by its gain and
    rotated by the carrier-plus-offset phase its delay accumulates; the
    per-tap sum is the time-domain equivalent of multiplying by the
    channel transfer value at carrier + offset.
    """
    n = int(round(plan.step_duration * plan.sample_rate))
    t = np.arange(n) / plan.sample_rate
    acc = np.zeros(n, dtype=np.complex128)
    for gain, delay in zip(channel.gains, channel.delays):
        acc += gain * np.exp(-2j * np.pi * (carrier + tone_offset) * delay) \
            * np.exp(2j * np.pi * tone_offset * t)
    return amplitude * acc


def _skirt_noise(plan: SweepPlan, tone_offset: float, tone_power: float,
                 skirt: PhaseNoiseSkirt, rng) -> np.ndarray:
    """Frequency-shaped noise realizing the skirt, as time samples.

    The skirt level is read as a dBc/Hz density, so a length-L analysis
    window collects density * sample_rate / L per bin.
    """
    n = int(round(plan.step_duration * plan.sample_rate))
    freqs = np.fft.fftfreq(n, d=1.0 / plan.sample_rate)
    offsets = freqs - tone_offset
    density = tone_power * 10.0 ** (skirt.level_dbc(offsets) / 10.0)
    # noise inside the tone's own analysis bin is indistinguishable from
    # the tone; keep that region clean
    density[np.abs(offsets) < 2.0 * plan.sample_rate / plan.fft_length] = 0.0
    scale = np.sqrt(density * plan.sample_rate * n / 2.0)
    spectrum = scale * (rng.normal(size=n) + 1j * rng.normal(size=n))
    return np.fft.ifft(spectrum)


def compose_sweep_capture(entries, plan: SweepPlan, step: int,
                          skirt: PhaseNoiseSkirt | None = None,
                          noise_power_dbfs: float | None = None,
                          seed: int = 0) -> BasebandSignal:
    """Superpose the received tones of several transmitters for one step.

    entries: list of (tone_offset, channel) pairs, one per simultaneous
    transmitter. Tones are transmitted at unit amplitude; any level
    difference between transmitters lives in the channel gains.
    """
    n = int(round(plan.step_duration * plan.sample_rate))
    rng = np.random.default_rng(seed)
    acc = np.zeros(n, dtype=np.complex128)
    carrier = float(plan.carrier_list[step])
    for tone_offset, chan in entries:
        acc += received_tone(chan, carrier, tone_offset, plan, 1.0)
        if skirt is not None:
            tone_power = abs(
                np.sum(chan.gains * np.exp(-2j * np.pi * (carrier + tone_offset) * chan.delays))
            ) ** 2
            acc += _skirt_noise(plan, tone_offset, tone_power, skirt, rng)
    if noise_power_dbfs is not None and noise_power_dbfs != -math.inf:
        sigma = math.sqrt(10.0 ** (noise_power_dbfs / 10.0) / 2.0)
        acc += rng.normal(scale=sigma, size=n) + 1j * rng.normal(scale=sigma, size=n)
    return BasebandSignal(samples=acc, sample_rate=plan.sample_rate)


def sweep_sound(channels, plan: SweepPlan, tx_power_db: float,
                transmitter_id: str, tone_offset: float | None = None,
                skirt: PhaseNoiseSkirt | None = None,
                noise_power_dbfs: float | None = None,
                seed: int = 0) -> NarrowbandLossSet:
    """Sweep one transmitter across all carrier steps.

    channels holds one MultipathChannel per carrier step (a static
    environment may repeat the same one). Each step simulates a unit
    tone through the channel, captures, and converts the bin power to a
    narrowband path loss of tx_power_db - 10*log10(bin power).
    """
    if len(channels) != plan.step_count:
        raise ValueError(
            f"need one channel per carrier step ({plan.step_count}), "
            f"got {len(channels)}"
        )
    if tone_offset is None:
        tone_offset = float(plan.tone_offsets[0])
    losses = np.empty(plan.step_count)
    for i, chan in enumerate(channels):
        capture = compose_sweep_capture(
            [(tone_offset, chan)], plan, i,
            skirt=skirt, noise_power_dbfs=noise_power_dbfs,
            seed=seed + i,
        )
        power = bin_power(capture, plan, tone_offset)
        if power <= 0.0:
            raise ValueError(f"no received power at step {i}")
        losses[i] = tx_power_db - 10.0 * math.log10(power)
    return NarrowbandLossSet(per_carrier_loss_db=losses,
                             transmitter_id=transmitter_id,
                             tone_offset=tone_offset)


def mean_wideband_path_loss(losses: NarrowbandLossSet, domain: str = "db") -> float:
    """Average the narrowband losses into one wideband figure.

    domain="db" (default) averages the dB values; domain="linear"
    averages the linear power gains first. The two differ for
    frequency-selective channels.
    """
    values = losses.per_carrier_loss_db
    if domain == "db":
        return float(np.mean(values))
    if domain == "linear":
        return float(-10.0 * math.log10(np.mean(10.0 ** (-values / 10.0))))
    raise ValueError(f"unknown averaging domain {domain!r}")


def temporal_resolution(plan: SweepPlan) -> float:
    """Delay resolution of the swept band: 1 / (2 * (N - 1) * spacing)."""
    n = plan.step_count
    if n < 2:
        raise ValueError("need at least two carrier steps")
    return 1.0 / (2.0 * (n - 1) * plan.carrier_spacing)


def losses_to_json(losses: NarrowbandLossSet) -> dict:
    return {
        "transmitter_id": losses.transmitter_id,
        "tone_offset_hz": losses.tone_offset,
        "per_carrier_loss_db": [float(v) for v in losses.per_carrier_loss_db],
        "mean_path_loss_db": mean_wideband_path_loss(losses),
    }


def losses_from_json(doc: dict) -> NarrowbandLossSet:
    return NarrowbandLossSet(
        per_carrier_loss_db=np.asarray(doc["per_carrier_loss_db"],
                                       dtype=np.float64),
        transmitter_id=doc["transmitter_id"],
        tone_offset=float(doc["tone_offset_hz"]),
    )


def plan_to_json(plan: SweepPlan) -> dict:
    return {
        "carriers_hz": [float(c) for c in plan.carrier_list],
        "tone_offsets_hz": [float(f) for f in plan.tone_offsets],
        "step_duration_s": plan.step_duration,
        "sample_rate_hz": plan.sample_rate,
        "fft_length": plan.fft_length,
        "guard_band_hz": plan.guard_band,
    }


def plan_from_json(doc: dict) -> SweepPlan:
    return SweepPlan(
        carrier_list=np.asarray(doc["carriers_hz"], dtype=np.float64),
        tone_offsets=np.asarray(doc["tone_offsets_hz"], dtype=np.float64),
        step_duration=float(doc["step_duration_s"]),
        sample_rate=float(doc["sample_rate_hz"]),
        fft_length=int(doc["fft_length"]),
        guard_band=float(doc["guard_band_hz"]),
    )


def save_plan(plan: SweepPlan, path) -> None:
    Path(path).write_text(json.dumps(plan_to_json(plan), indent=2) + "\n")


def load_plan(path) -> SweepPlan:
    return plan_from_json(json.loads(Path(path).read_text()))
