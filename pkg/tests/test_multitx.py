import math

import numpy as np
import numpy.testing as npt
import pytest

from chansounder import channel as ch
from chansounder import multitx, pulse, sliding


@pytest.fixture(scope="module")
def tdma_setup(request):
    """Burst, slot geometry, and schedule for a 3-transmitter TDMA scene."""
    chips10 = request.getfixturevalue("chips10")
    rrc_taps = request.getfixturevalue("rrc_taps")
    config = sliding.SounderConfig()
    burst = pulse.modulate(chips10, config.averaging_periods + 2, rrc_taps,
                           config.chip_period)
    sps = rrc_taps.samples_per_symbol
    slot_samples = math.ceil(len(burst) / 0.9 / sps) * sps
    guard = ((slot_samples - len(burst)) // 2) // sps * sps
    schedule = multitx.build_schedule(3, slot_samples / burst.sample_rate)
    return burst, guard, schedule, config


def flat_channel(level_db=0.0):
    return ch.MultipathChannel(gains=[10 ** (-level_db / 20.0)], delays=[0.0])


def test_schedule_slot_ownership():
    schedule = multitx.build_schedule(3, 1.0)
    assert schedule.period == 3.0
    assert schedule.slot_interval(1, 0) == (1.0, 2.0)
    assert schedule.slot_interval(1, 1) == (4.0, 5.0)


def test_single_transmitter_owns_everything():
    schedule = multitx.build_schedule(1, 2.0)
    for t in (0.0, 0.5, 1.9, 7.3):
        assert multitx.active_transmitter(schedule, t) == 0


def test_slot_tiling_partitions_each_period():
    schedule = multitx.build_schedule(4, 0.25)
    for period_index in range(3):
        edges = [schedule.slot_interval(i, period_index) for i in range(4)]
        # disjoint, adjacent, and tiling exactly one period
        for (lo1, hi1), (lo2, _) in zip(edges, edges[1:]):
            assert hi1 == lo2
        assert edges[0][0] == period_index * schedule.period
        assert edges[-1][1] == (period_index + 1) * schedule.period


def test_active_transmitter_examples():
    schedule = multitx.build_schedule(3, 1.0)
    assert multitx.active_transmitter(schedule, 0.0) == 0
    assert multitx.active_transmitter(schedule, 1.5) == 1
    assert multitx.active_transmitter(schedule, 3.5) == 0  # second period
    # one whole slot of clock offset shifts the segmentation by one slot
    for t in np.linspace(0.0, 2.9, 13):
        plain = multitx.active_transmitter(schedule, t)
        skewed = multitx.active_transmitter(schedule, t, clock_offset=1.0)
        assert skewed == (plain + 1) % 3
    with pytest.raises(ValueError, match="nonnegative"):
        multitx.active_transmitter(schedule, -1.0)


def test_draw_clock_spreads_and_determinism():
    assert multitx.NTP_OFFSET_STD == 5e-3
    assert multitx.GPS_OFFSET_STD == 100e-9
    one = multitx.draw_clock(multitx.NTP_OFFSET_STD, seed=4)
    two = multitx.draw_clock(multitx.NTP_OFFSET_STD, seed=4)
    assert one.offset == two.offset != 0.0
    offsets = [multitx.draw_clock(multitx.GPS_OFFSET_STD, seed=s).offset
               for s in range(200)]
    spread = np.std(offsets)
    assert 0.5 * multitx.GPS_OFFSET_STD < spread < 2.0 * multitx.GPS_OFFSET_STD
    assert multitx.draw_clock(0.0, seed=1).offset == 0.0


def test_schedule_validation():
    with pytest.raises(ValueError):
        multitx.build_schedule(0, 1.0)
    with pytest.raises(ValueError):
        multitx.build_schedule(3, 0.0)
    with pytest.raises(ValueError, match="jitter"):
        multitx.ClockModel(jitter_std=-1.0)
    with pytest.raises(ValueError, match="nonnegative"):
        multitx.LeakageModel(parked_leakage_db=-3.0)


def test_segment_distinct_constants():
    rate = 1000.0
    schedule = multitx.build_schedule(3, 0.1)
    samples = np.concatenate([np.full(100, 1.0), np.full(100, 2.0),
                              np.full(100, 3.0)]).astype(np.complex128)
    capture = pulse.BasebandSignal(samples, rate)
    segmented = multitx.segment_capture(capture, schedule, trim_samples=5)
    for i, segment in enumerate(segmented.segments):
        npt.assert_array_equal(segment.samples, i + 1.0)
        assert len(segment) == 90


def test_segment_preconditions():
    rate = 1000.0
    schedule = multitx.build_schedule(3, 0.1)
    short = pulse.BasebandSignal(np.ones(200), rate)
    with pytest.raises(ValueError, match="shorter"):
        multitx.segment_capture(short, schedule)
    good = pulse.BasebandSignal(np.ones(300), rate)
    with pytest.raises(ValueError, match="period"):
        multitx.segment_capture(good, schedule, capture_start=0.05)
    with pytest.raises(ValueError, match="consume"):
        multitx.segment_capture(good, schedule, trim_samples=60)


def test_compose_single_tx_matches_apply_channel(tdma_setup):
    burst, guard, _, _ = tdma_setup
    chan = ch.MultipathChannel(gains=[0.5, 0.25j],
                               delays=[0.0, 12 / burst.sample_rate])
    schedule = multitx.build_schedule(1, (len(burst) + 64) / burst.sample_rate)
    scene = [multitx.SceneTransmitter(burst, chan)]
    capture = multitx.compose_received(scene, schedule, burst_offset_samples=0)
    direct = ch.apply_channel(burst, chan)
    overlap = min(len(capture), len(direct))
    npt.assert_array_equal(capture.samples[:overlap], direct.samples[:overlap])
    npt.assert_array_equal(capture.samples[overlap:], 0.0)


def test_compose_leakage_off_is_exactly_isolated(tdma_setup):
    burst, guard, schedule, _ = tdma_setup
    rate = burst.sample_rate
    slot_samples = int(round(schedule.slot_length * rate))
    channels = [flat_channel(0.0), flat_channel(20.0), flat_channel(40.0)]
    scene = [multitx.SceneTransmitter(burst, c, multitx.PARK_OFF_BAND)
             for c in channels]
    capture = multitx.compose_received(scene, schedule,
                                       burst_offset_samples=guard)
    for i, chan in enumerate(channels):
        segment = capture.samples[i * slot_samples:(i + 1) * slot_samples]
        received = ch.apply_channel(burst, chan).samples
        expected = np.zeros(slot_samples, dtype=np.complex128)
        usable = min(slot_samples - guard, len(received))
        expected[guard:guard + usable] = received[:usable]
        npt.assert_array_equal(segment, expected)


def test_small_clock_offset_keeps_sounding_bit_identical(tdma_setup, chips10,
                                                         rrc_taps):
    burst, guard, schedule, config = tdma_setup
    rate = burst.sample_rate
    chan = ch.MultipathChannel(gains=[1.0, 0.3], delays=[0.0, 2 * config.chip_period])

    def profile_with_offset(offset_samples):
        clock = multitx.ClockModel(offset=offset_samples / rate)
        scene = [multitx.SceneTransmitter(burst, chan, clock=clock),
                 multitx.SceneTransmitter(burst, flat_channel(30.0), clock=clock),
                 multitx.SceneTransmitter(burst, flat_channel(35.0), clock=clock)]
        capture = multitx.compose_received(scene, schedule,
                                           burst_offset_samples=guard)
        segmented = multitx.segment_capture(capture, schedule,
                                            trim_samples=guard)
        assert not segmented.misaligned
        return sliding.measure_sliding(segmented.segments[0], chips10,
                                       rrc_taps, config)

    base = profile_with_offset(0)
    small = profile_with_offset(-8)  # well under the guard trim
    npt.assert_array_equal(base.lags, small.lags)
    npt.assert_array_equal(base.gains, small.gains)
    assert base.wideband_path_loss_db == small.wideband_path_loss_db


def test_gross_clock_offset_raises_flag(tdma_setup):
    burst, guard, schedule, _ = tdma_setup
    rate = burst.sample_rate
    offset = 1.5 * schedule.slot_length  # misattributes every segment
    clock = multitx.ClockModel(offset=offset)
    scene = [multitx.SceneTransmitter(burst, flat_channel(0.0), clock=clock),
             multitx.SceneTransmitter(burst, flat_channel(3.0), clock=clock),
             multitx.SceneTransmitter(burst, flat_channel(6.0), clock=clock)]
    capture = multitx.compose_received(scene, schedule,
                                       burst_offset_samples=guard)
    segmented = multitx.segment_capture(capture, schedule, trim_samples=guard)
    assert segmented.misaligned
    assert segmented.guard_core_ratio > 0.25


def test_near_far_failure_and_mitigation(tdma_setup, chips10, rrc_taps):
    burst, guard, _, config = tdma_setup
    rate = burst.sample_rate
    slot_samples = math.ceil(len(burst) / 0.9 / 4) * 4
    schedule = multitx.build_schedule(2, slot_samples / rate)
    near = flat_channel(40.0)
    far = flat_channel(80.0)

    def far_loss(park_mode):
        scene = [multitx.SceneTransmitter(burst, near, park_mode),
                 multitx.SceneTransmitter(burst, far, park_mode)]
        leakage = multitx.LeakageModel(parked_leakage_db=math.inf,
                                       inband_null_leakage_db=30.0)
        capture = multitx.compose_received(scene, schedule, leakage=leakage,
                                           burst_offset_samples=guard)
        segmented = multitx.segment_capture(capture, schedule,
                                            trim_samples=guard)
        profile = sliding.measure_sliding(segmented.segments[1], chips10,
                                          rrc_taps, config)
        return profile.wideband_path_loss_db

    corrupted = far_loss(multitx.PARK_IN_BAND)
    clean = far_loss(multitx.PARK_OFF_BAND)
    assert abs(corrupted - 80.0) > 3.0
    assert abs(clean - 80.0) < 0.1


def test_leakage_monotonicity(tdma_setup, chips10, rrc_taps):
    # more attenuation on the parked transmitters never hurts the far one
    burst, guard, schedule, config = tdma_setup
    near = flat_channel(40.0)
    far = flat_channel(80.0)
    third = flat_channel(60.0)
    errors = []
    for attenuation in (20.0, 30.0, 45.0, 60.0, 90.0):
        scene = [multitx.SceneTransmitter(burst, near, multitx.PARK_IN_BAND),
                 multitx.SceneTransmitter(burst, third, multitx.PARK_IN_BAND),
                 multitx.SceneTransmitter(burst, far, multitx.PARK_IN_BAND)]
        leakage = multitx.LeakageModel(inband_null_leakage_db=attenuation)
        capture = multitx.compose_received(scene, schedule, leakage=leakage,
                                           burst_offset_samples=guard)
        segmented = multitx.segment_capture(capture, schedule,
                                            trim_samples=guard)
        profile = sliding.measure_sliding(segmented.segments[2], chips10,
                                          rrc_taps, config)
        errors.append(abs(profile.wideband_path_loss_db - 80.0))
    assert all(a >= b - 1e-9 for a, b in zip(errors, errors[1:]))
    assert errors[0] > errors[-1]


def test_frequency_plan_default_capacity():
    capacity = multitx.frame_capacity(150e3, 1e6)
    assert capacity in (5, 6)
    plans = multitx.build_frequency_plan(
        capacity, 150e3, 1e6, 4096, [700e6 + 2e6 * k for k in range(10)], 5e-3)
    assert len(plans) == 1
    assert len(plans[0].tone_offsets) == capacity


def test_frequency_plan_single_transmitter():
    plans = multitx.build_frequency_plan(
        1, 25e3, 1e6, 4096, [700e6, 702e6], 5e-3)
    assert len(plans) == 1
    assert len(plans[0].tone_offsets) == 1


def test_frequency_plan_multi_frame():
    # capacity 6 at 140 kHz guard in a 1 MHz band: 12 transmitters need 2 frames
    plans = multitx.build_frequency_plan(
        12, 140e3, 1e6, 4096, [700e6 + 2e6 * k for k in range(10)], 5e-3)
    assert multitx.frame_capacity(140e3, 1e6) == 6
    assert len(plans) == 2
    assert [len(p.tone_offsets) for p in plans] == [6, 6]


def test_frequency_plan_infeasible():
    with pytest.raises(ValueError, match="capacity"):
        multitx.build_frequency_plan(2, 2e6, 1e6, 4096, [700e6], 5e-3)
    with pytest.raises(ValueError, match="frame"):
        multitx.build_frequency_plan(12, 140e3, 1e6, 4096, [700e6], 5e-3,
                                     max_frames=1)


def test_frequency_plan_emits_valid_plans():
    plans = multitx.build_frequency_plan(
        4, 100e3, 1e6, 4096, [700e6 + 2e6 * k for k in range(10)], 5e-3)
    plan = plans[0]
    bin_width = plan.sample_rate / plan.fft_length
    for tone in plan.tone_offsets:
        assert abs(tone) < plan.sample_rate / 2
        assert abs(tone / bin_width - round(tone / bin_width)) < 1e-6
    spacing = np.diff(np.sort(plan.tone_offsets))
    assert np.all(spacing >= plan.guard_band - 1e-9)
