"""Coordination of simultaneous transmitters.

Sliding mode shares one band by TDMA: each transmitter owns a rotating
slot, bursts its PN waveform inside it, and leaks an attenuated copy the
rest of the time (an idle radio is never perfectly silent). Clock
offsets shift where a node believes the slot boundaries are. Frequency
mode separates transmitters by tone frequency instead, packing
bin-centered tones with a guard band and spilling into extra time frames
when one frame's capacity runs out.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from chansounder.channel import MultipathChannel, apply_channel
from chansounder.pulse import BasebandSignal
from chansounder.sweep import SweepPlan

PARK_OFF_BAND = "off_band"
PARK_IN_BAND = "in_band"


@dataclass(frozen=True)
class TdmaSchedule:
    """Round-robin slot rotation: slot i of period r covers
    [i*slot_length + r*period, (i+1)*slot_length + r*period)."""

    slot_length: float
    transmitter_count: int
    total_periods: int = 1

    def __post_init__(self):
        if self.slot_length <= 0:
            raise ValueError("slot_length must be positive")
        if self.transmitter_count < 1:
            raise ValueError("transmitter_count must be >= 1")
        if self.total_periods < 1:
            raise ValueError("total_periods must be >= 1")

    @property
    def period(self) -> float:
        return self.slot_length * self.transmitter_count

    def slot_interval(self, transmitter: int, period_index: int = 0):
        start = transmitter * self.slot_length + period_index * self.period
        return start, start + self.slot_length


@dataclass(frozen=True)
class ClockModel:
    """Per-node clock error: fixed offset, linear drift, trigger jitter."""

    offset: float = 0.0
    drift: float = 0.0
    jitter_std: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.jitter_std < 0:
            raise ValueError("jitter_std must be nonnegative")

    def perceived(self, true_time: float) -> float:
        return true_time + self.offset + self.drift * true_time


NTP_OFFSET_STD = 5e-3    # typical spread of NTP-disciplined laptop clocks
GPS_OFFSET_STD = 100e-9  # typical spread of GPS-disciplined radio clocks


def draw_clock(offset_std: float, seed: int, jitter_std: float = 0.0) -> ClockModel:
    """Draw a node clock with a Gaussian offset of the given spread."""
    rng = np.random.default_rng(seed)
    return ClockModel(offset=float(rng.normal(scale=offset_std)) if offset_std > 0 else 0.0,
                      jitter_std=jitter_std, seed=seed)


@dataclass(frozen=True)
class LeakageModel:
    """Attenuation of a non-active transmitter's waveform, in dB below
    its nominal power. Parked off-band (the mitigation) vs emitting a
    null source in-band (the naive idle mode)."""

    parked_leakage_db: float = math.inf
    inband_null_leakage_db: float = 30.0

    def __post_init__(self):
        if self.parked_leakage_db < 0 or self.inband_null_leakage_db < 0:
            raise ValueError("leakage attenuations must be nonnegative")

    def gain(self, park_mode: str) -> float:
        if park_mode == PARK_OFF_BAND:
            att = self.parked_leakage_db
        elif park_mode == PARK_IN_BAND:
            att = self.inband_null_leakage_db
        else:
            raise ValueError(f"unknown park mode {park_mode!r}")
        return 0.0 if att == math.inf else 10.0 ** (-att / 20.0)


@dataclass(frozen=True)
class SceneTransmitter:
    """One transmitter's contribution to a composed capture."""

    waveform: BasebandSignal
    channel: MultipathChannel
    park_mode: str = PARK_OFF_BAND
    clock: ClockModel = field(default_factory=ClockModel)


@dataclass(frozen=True)
class SegmentedCapture:
    segments: list
    trim_samples: int
    guard_core_ratio: float
    misaligned: bool


def build_schedule(transmitter_count: int, slot_length: float,
                   total_periods: int = 1) -> TdmaSchedule:
    return TdmaSchedule(slot_length=slot_length,
                        transmitter_count=transmitter_count,
                        total_periods=total_periods)


def active_transmitter(schedule: TdmaSchedule, time: float,
                       clock_offset: float = 0.0) -> int:
    """Index of the transmitter owning the slot at the perceived time."""
    if time < 0:
        raise ValueError("time must be nonnegative")
    perceived = time + clock_offset
    position = perceived % schedule.period
    return int(position // schedule.slot_length) % schedule.transmitter_count


def compose_received(scene, schedule: TdmaSchedule,
                     leakage: LeakageModel | None = None,
                     burst_offset_samples: int = 0,
                     duration: float | None = None,
                     noise_power_dbfs: float | None = None,
                     seed: int = 0) -> BasebandSignal:
    """Sum every transmitter's channel-filtered waveform over one capture.

    During its own (clock-perceived) slot a transmitter contributes its
    burst, placed burst_offset_samples after the slot start; everywhere
    else it contributes an attenuated, periodically tiled copy — the
    correlated leakage that creates the near-far problem. All slot
    bookkeeping is done in integer samples so identical scenes compose
    bit-identically.
    """
    if leakage is None:
        leakage = LeakageModel()
    if not scene:
        raise ValueError("scene must contain at least one transmitter")
    rate = scene[0].waveform.sample_rate
    origin = scene[0].waveform.origin_time
    for tx in scene:
        if tx.waveform.sample_rate != rate:
            raise ValueError("all scene waveforms must share one sample rate")

    if duration is None:
        duration = schedule.period
    n = int(round(duration * rate))
    slot_samples = int(round(schedule.slot_length * rate))
    period_samples = slot_samples * schedule.transmitter_count
    sample_index = np.arange(n)

    out = np.zeros(n, dtype=np.complex128)
    for i, tx in enumerate(scene):
        received = apply_channel(tx.waveform, tx.channel).samples
        offset_samples = int(round(tx.clock.perceived(0.0) * rate))
        drift_samples = np.rint(tx.clock.drift * sample_index).astype(np.int64)
        perceived = sample_index + offset_samples + drift_samples
        position = perceived % period_samples
        local = position - i * slot_samples
        active = (local >= 0) & (local < slot_samples)

        burst_index = local - burst_offset_samples
        valid = active & (burst_index >= 0) & (burst_index < len(received))
        out[valid] += received[burst_index[valid]]

        leak_gain = leakage.gain(tx.park_mode)
        if leak_gain > 0.0:
            idle = ~active
            out[idle] += leak_gain * received[perceived[idle] % len(received)]

    if noise_power_dbfs is not None and noise_power_dbfs != -math.inf:
        rng = np.random.default_rng(seed)
        sigma = math.sqrt(10.0 ** (noise_power_dbfs / 10.0) / 2.0)
        out += rng.normal(scale=sigma, size=n) + 1j * rng.normal(scale=sigma, size=n)
    return BasebandSignal(samples=out, sample_rate=rate, origin_time=origin)


def guard_core_power_ratio(signal: BasebandSignal, schedule: TdmaSchedule,
                           trim_samples: int) -> float:
    """Power in the trimmed guard regions relative to the busiest slot core.

    Bursts sit inside the slot cores and leave the guard trims nearly
    silent; once clock error pushes a burst past its guard, the ratio
    approaches one. Offsets that are exact multiples of the slot length
    move bursts whole slots and remain invisible here.
    """
    if trim_samples < 1:
        return 0.0
    rate = signal.sample_rate
    slot_samples = int(round(schedule.slot_length * rate))
    guard_power = 0.0
    core_power = 0.0
    for i in range(schedule.transmitter_count):
        lo = i * slot_samples
        hi = lo + slot_samples
        head = np.mean(np.abs(signal.samples[lo:lo + trim_samples]) ** 2)
        tail = np.mean(np.abs(signal.samples[hi - trim_samples:hi]) ** 2)
        core = np.mean(np.abs(signal.samples[lo + trim_samples:hi - trim_samples]) ** 2)
        guard_power = max(guard_power, head, tail)
        core_power = max(core_power, core)
    if core_power == 0.0:
        return 0.0
    return float(guard_power / core_power)


def segment_capture(signal: BasebandSignal, schedule: TdmaSchedule,
                    capture_start: float = 0.0,
                    guard_fraction: float = 0.05,
                    trim_samples: int | None = None) -> SegmentedCapture:
    """Split one TDMA period into per-transmitter segments.

    The capture must begin at a period boundary of the receiver's clock
    and span at least one period. A guard trim is discarded from both
    ends of every slot to absorb small clock offsets; captures whose
    guard regions carry slot-core-level power are flagged as misaligned.
    """
    rate = signal.sample_rate
    slot_samples = int(round(schedule.slot_length * rate))
    period_samples = slot_samples * schedule.transmitter_count
    if len(signal) < period_samples:
        raise ValueError(
            f"capture of {len(signal)} samples is shorter than one TDMA "
            f"period ({period_samples} samples)"
        )
    boundary = capture_start / schedule.period
    if abs(boundary - round(boundary)) > 1e-9:
        raise ValueError("capture_start must be a multiple of the TDMA period")
    if trim_samples is None:
        trim_samples = int(guard_fraction * slot_samples)
    if 2 * trim_samples >= slot_samples:
        raise ValueError("guard trim would consume the whole slot")

    ratio = guard_core_power_ratio(signal, schedule, trim_samples)
    segments = []
    for i in range(schedule.transmitter_count):
        lo = i * slot_samples + trim_samples
        hi = (i + 1) * slot_samples - trim_samples
        segments.append(BasebandSignal(samples=signal.samples[lo:hi],
                                       sample_rate=rate,
                                       origin_time=signal.origin_time))
    return SegmentedCapture(
        segments=segments,
        trim_samples=trim_samples,
        guard_core_ratio=ratio,
        misaligned=ratio > 0.25,
    )


def build_frequency_plan(transmitter_count: int, guard_band: float,
                         sample_rate: float, fft_length: int,
                         carriers, step_duration: float,
                         tone_spacing: float | None = None,
                         max_frames: int | None = None) -> list[SweepPlan]:
    """Assign bin-centered tone offsets to transmitters, frame by frame.

    Tones are packed from the bottom of the Nyquist band with at least a
    guard band between neighbors. When the count exceeds one frame's
    capacity the surplus rolls into additional time frames (separation in
    both time and frequency). Raises when the capacity is zero or the
    frame budget is exceeded, naming the computed capacity.
    """
    if transmitter_count < 1:
        raise ValueError("transmitter_count must be >= 1")
    if guard_band <= 0:
        raise ValueError("guard_band must be positive")
    capacity = int(math.floor((sample_rate - guard_band) / guard_band))
    if capacity < 1:
        raise ValueError(
            f"guard band {guard_band} Hz leaves no room in the "
            f"{sample_rate} Hz Nyquist band (capacity 0)"
        )

    bin_width = sample_rate / fft_length
    spacing = max(guard_band, tone_spacing or 0.0)
    spacing = math.ceil(spacing / bin_width - 1e-9) * bin_width
    start = math.ceil((-sample_rate / 2.0 + guard_band) / bin_width) * bin_width
    # how many tones actually fit between start and the Nyquist edge
    fit = int(math.floor((sample_rate / 2.0 - bin_width - start) / spacing)) + 1
    capacity = min(capacity, fit)
    if capacity < 1:
        raise ValueError(
            f"no tone fits the {sample_rate} Hz band with guard {guard_band} Hz"
        )

    frames_needed = math.ceil(transmitter_count / capacity)
    if max_frames is not None and frames_needed > max_frames:
        raise ValueError(
            f"{transmitter_count} transmitters exceed {max_frames} frame(s) "
            f"at {capacity} tones per frame"
        )
    offsets = start + spacing * np.arange(min(transmitter_count, capacity))
    plans = []
    for frame in range(frames_needed):
        lo = frame * capacity
        count = min(capacity, transmitter_count - lo)
        plans.append(SweepPlan(
            carrier_list=np.asarray(carriers, dtype=np.float64),
            tone_offsets=offsets[:count],
            step_duration=step_duration,
            sample_rate=sample_rate,
            fft_length=fft_length,
            guard_band=guard_band,
        ))
    return plans


def frame_capacity(guard_band: float, sample_rate: float) -> int:
    """Transmitters per time frame for a given guard band."""
    return int(math.floor((sample_rate - guard_band) / guard_band))
