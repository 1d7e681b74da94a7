import math

import numpy as np
import numpy.testing as npt
import pytest

from chansounder import channel as ch
from chansounder.pulse import BasebandSignal


def make_signal(samples, rate=1e6):
    return BasebandSignal(np.asarray(samples, dtype=np.complex128), rate)


def test_identity_channel():
    signal = make_signal([1.0, 2.0, 3.0 - 1.0j])
    flat = ch.MultipathChannel(gains=[1.0], delays=[0.0])
    out = ch.apply_channel(signal, flat)
    npt.assert_array_equal(out.samples, signal.samples)


def test_impulse_response_by_definition():
    impulse = make_signal([1.0])
    two_tap = ch.MultipathChannel(gains=[1.0, 0.5], delays=[0.0, 2e-6])
    out = ch.apply_channel(impulse, two_tap)
    npt.assert_array_equal(out.samples, [1.0, 0.0, 0.5])


def test_matches_dense_convolution_oracle(rng):
    gains = np.array([1.0, 0.4 - 0.2j, -0.1j])
    delays = np.array([0.0, 3e-6, 7e-6])
    chan = ch.MultipathChannel(gains=gains, delays=delays)
    x = rng.normal(size=500) + 1j * rng.normal(size=500)
    signal = make_signal(x)
    impulse = np.zeros(8, dtype=np.complex128)
    impulse[[0, 3, 7]] = gains
    expected = np.convolve(x, impulse)
    out = ch.apply_channel(signal, chan)
    npt.assert_allclose(out.samples, expected, atol=1e-12)


def test_fractional_delay_rejected():
    signal = make_signal(np.ones(8))
    chan = ch.MultipathChannel(gains=[1.0, 1.0], delays=[0.0, 2.5e-6])
    with pytest.raises(ValueError, match="tap 1"):
        ch.apply_channel(signal, chan)


def test_channel_invariants():
    with pytest.raises(ValueError, match="first tap"):
        ch.MultipathChannel(gains=[1.0], delays=[1e-6])
    with pytest.raises(ValueError, match="strictly increasing"):
        ch.MultipathChannel(gains=[1.0, 1.0], delays=[0.0, 0.0])
    with pytest.raises(ValueError, match="nonzero"):
        ch.MultipathChannel(gains=[0.0], delays=[0.0])


def test_linearity_exact(rng):
    chan = ch.MultipathChannel(gains=[0.8, 0.3j], delays=[0.0, 4e-6])
    a = rng.normal(size=64) + 1j * rng.normal(size=64)
    b = rng.normal(size=64) + 1j * rng.normal(size=64)
    combined = ch.apply_channel(make_signal(a + b), chan).samples
    separate = (ch.apply_channel(make_signal(a), chan).samples
                + ch.apply_channel(make_signal(b), chan).samples)
    npt.assert_allclose(combined, separate, rtol=1e-12, atol=1e-14)


def test_time_invariance_exact(rng):
    chan = ch.MultipathChannel(gains=[0.8, 0.3j], delays=[0.0, 4e-6])
    x = rng.normal(size=64) + 1j * rng.normal(size=64)
    out = ch.apply_channel(make_signal(x), chan).samples
    shifted_in = np.concatenate([np.zeros(5), x])
    out_shifted = ch.apply_channel(make_signal(shifted_in), chan).samples
    npt.assert_array_equal(out_shifted[5:], out)
    npt.assert_array_equal(out_shifted[:5], 0.0)


def test_awgn_flag_value_passthrough():
    signal = make_signal(np.ones(16))
    out = ch.add_awgn(signal, -math.inf, seed=3)
    npt.assert_array_equal(out.samples, signal.samples)


def test_awgn_variance():
    signal = make_signal(np.zeros(10**6))
    out = ch.add_awgn(signal, -13.0, seed=9)
    variance = np.mean(np.abs(out.samples) ** 2)
    nominal = 10 ** (-13.0 / 10.0)
    assert abs(variance - nominal) / nominal < 0.02


def test_awgn_deterministic():
    signal = make_signal(np.ones(256))
    one = ch.add_awgn(signal, -20.0, seed=11)
    two = ch.add_awgn(signal, -20.0, seed=11)
    npt.assert_array_equal(one.samples, two.samples)


def test_power_bookkeeping_white_input(rng):
    chan = ch.MultipathChannel(gains=[0.7, 0.4j, -0.2], delays=[0.0, 1e-6, 5e-6])
    x = (rng.normal(size=200_000) + 1j * rng.normal(size=200_000)) / math.sqrt(2)
    out = ch.apply_channel(make_signal(x), chan)
    out_power = np.mean(np.abs(out.samples[:200_000]) ** 2)
    assert abs(out_power - chan.total_power()) / chan.total_power() < 0.02


def test_frequency_response_flat():
    flat = ch.MultipathChannel(gains=[1.0], delays=[0.0])
    for f in (0.0, 1e6, -3e9):
        assert ch.frequency_response(flat, f) == 1.0 + 0.0j


def test_frequency_response_two_tap_closed_form():
    chan = ch.MultipathChannel(gains=[1.0, 1.0], delays=[0.0, 250e-9])
    got = ch.frequency_response(chan, 2e6)
    expected = 1.0 + np.exp(-2j * np.pi * 2e6 * 250e-9)
    assert got == pytest.approx(expected, abs=1e-15)


def test_frequency_response_at_zero_is_gain_sum(rng):
    gains = rng.normal(size=4) + 1j * rng.normal(size=4)
    gains[0] = 1.0
    chan = ch.MultipathChannel(gains=gains, delays=[0.0, 1e-6, 2e-6, 5e-6])
    assert ch.frequency_response(chan, 0.0) == complex(np.sum(gains))


def test_frequency_response_matches_dft():
    rate = 1e6
    chan = ch.MultipathChannel(gains=[1.0, 0.5 - 0.2j, 0.1j],
                               delays=[0.0, 2e-6, 9e-6])
    n = 64
    impulse = np.zeros(n, dtype=np.complex128)
    impulse[[0, 2, 9]] = chan.gains
    dft = np.fft.fft(impulse)
    bins = np.fft.fftfreq(n, d=1.0 / rate)
    npt.assert_allclose(ch.frequency_response(chan, bins), dft, atol=1e-9)


def test_synthesize_log_distance_arithmetic():
    env = ch.EnvironmentModel(reference_loss_db=40.0, path_loss_exponent=2.0,
                              reference_distance_m=1.0)
    chan, loss = ch.synthesize_channel(env, (0, 0, 0), (10.0, 0, 0), seed=5)
    assert loss == pytest.approx(60.0)
    assert chan.total_power() == pytest.approx(10 ** (-60.0 / 10.0), rel=1e-12)


def test_synthesize_deterministic():
    env = ch.EnvironmentModel(reference_loss_db=40.0, path_loss_exponent=2.5,
                              delay_spread_scale_s=8e-8, tap_count_range=(2, 6))
    one, _ = ch.synthesize_channel(env, (0, 0, 0), (7.0, 3.0, 1.0), seed=42)
    two, _ = ch.synthesize_channel(env, (0, 0, 0), (7.0, 3.0, 1.0), seed=42)
    npt.assert_array_equal(one.gains, two.gains)
    npt.assert_array_equal(one.delays, two.delays)


def test_synthesize_monte_carlo_mean_power():
    env = ch.EnvironmentModel(reference_loss_db=35.0, path_loss_exponent=3.0,
                              delay_spread_scale_s=1e-7, tap_count_range=(1, 8))
    target = None
    powers = []
    for seed in range(1000):
        chan, loss = ch.synthesize_channel(env, (0, 0, 0), (5.0, 0, 0), seed=seed)
        target = 10 ** (-loss / 10.0)
        powers.append(chan.total_power())
    mean_db = 10 * math.log10(np.mean(powers))
    assert abs(mean_db - 10 * math.log10(target)) < 0.5


def test_synthesize_structure():
    env = ch.EnvironmentModel(reference_loss_db=40.0, path_loss_exponent=2.0,
                              delay_spread_scale_s=2e-7, tap_count_range=(4, 8))
    chan, _ = ch.synthesize_channel(env, (0, 0, 0), (3.0, 4.0, 0.0), seed=8,
                                    delay_grid_s=60e-9)
    assert chan.delays[0] == 0.0
    assert np.all(np.diff(chan.delays) > 0)
    steps = chan.delays / 60e-9
    npt.assert_allclose(steps, np.round(steps), atol=1e-9)


def test_synthesize_wall_losses():
    env = ch.EnvironmentModel(reference_loss_db=40.0, path_loss_exponent=2.0,
                              wall_loss_db=3.0, wall_grid_spacing_m=5.0)
    _, through = ch.synthesize_channel(env, (1.0, 1.0, 0), (13.0, 1.0, 0), seed=0)
    open_env = ch.EnvironmentModel(reference_loss_db=40.0, path_loss_exponent=2.0)
    _, free = ch.synthesize_channel(open_env, (1.0, 1.0, 0), (13.0, 1.0, 0), seed=0)
    assert through == pytest.approx(free + 2 * 3.0)


def test_synthesize_coincident_positions():
    env = ch.EnvironmentModel(reference_loss_db=40.0, path_loss_exponent=2.0)
    with pytest.raises(ValueError, match="coincide"):
        ch.synthesize_channel(env, (1.0, 2.0, 3.0), (1.0, 2.0, 3.0), seed=0)


def test_channel_json_roundtrip(tmp_path):
    chan = ch.MultipathChannel(gains=[1.0, 0.5 - 0.25j], delays=[0.0, 3e-7])
    target = tmp_path / "channel.json"
    ch.save_channel(chan, target)
    loaded = ch.load_channel(target)
    npt.assert_array_equal(loaded.gains, chan.gains)
    npt.assert_array_equal(loaded.delays, chan.delays)
