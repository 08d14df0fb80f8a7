"""The spectral backend must agree with the sample-level chain."""

import numpy as np
import pytest

from conftest import mid_frame_channel
from fmcwspoof.attacker import AttackerState
from fmcwspoof.channel import ChannelParams, crop, propagate_echo
from fmcwspoof.engine import echo_train, simulate_frame
from fmcwspoof.errors import ChannelError
from fmcwspoof.render import render_if_spectra
from fmcwspoof.victim import dechirp, range_spectra
from fmcwspoof.waveform import generate_frame


def fft_spectra(config, channel, phases, hops):
    tx = generate_frame(config, phases, hop_offsets_hz=hops)
    rx = crop(propagate_echo(tx, channel, config), 0.0, len(tx))
    return range_spectra(dechirp(tx, rx).windows(config.samples_per_chirp), config)


@pytest.mark.parametrize("hopped", [False, True])
def test_echo_spectra_match_fft(short_radar, hopped):
    rng = np.random.default_rng(5)
    n = short_radar.chirps_per_frame
    phases = rng.uniform(0, 2 * np.pi, n)
    hops = rng.choice([-1e6, 0.0, 1.5e6], n) if hopped else np.zeros(n)
    channel = ChannelParams(distance_m=47.3, relative_velocity_mps=-21.0, path_gain=0.1)
    expected, f0 = fft_spectra(short_radar, channel, phases, hops)
    weights = short_radar.tx_power * np.exp(1j * phases)
    got, g0 = render_if_spectra(short_radar, weights, hops, [echo_train(short_radar, weights, hops, channel)], 0.0)
    assert g0 == f0
    scale = np.abs(expected).max()
    assert np.max(np.abs(got - expected)) / scale < 1e-3


def test_rendered_noise_level(short_radar):
    weights = np.full(short_radar.chirps_per_frame, 2.0 + 0j)
    spectra, _ = render_if_spectra(
        short_radar, weights, np.zeros(short_radar.chirps_per_frame), [], 0.0, 0.5, np.random.default_rng(0)
    )
    # FFT of tx * conj(noise) over L samples: variance |tx|^2 * L * p per bin.
    expected = 4.0 * short_radar.samples_per_chirp * 0.5
    assert np.var(spectra) == pytest.approx(expected, rel=0.05)


@pytest.mark.parametrize("d, v", [(5.0, -50.0), (60.0, 0.0), (100.0, 45.0)])
def test_backends_agree_on_echo(short_radar, d, v):
    channel = mid_frame_channel(short_radar, d, v, path_gain=0.1)
    fast, _ = simulate_frame(short_radar, channel, 0.0, backend="spectral")
    slow, _ = simulate_frame(short_radar, channel, 0.0, backend="samples")
    assert fast.range_m == pytest.approx(slow.range_m, abs=1e-3)
    assert fast.velocity_mps == pytest.approx(slow.velocity_mps, abs=1e-4)


@pytest.mark.parametrize("target, v_hat, offset", [(45.0, -5.0, 0.0), (80.0, 12.0, 250.0)])
def test_backends_agree_under_attack(short_radar, target, v_hat, offset):
    channel = ChannelParams(distance_m=60.0, path_gain=0.1, oscillator_offset_hz=offset)
    state = AttackerState().retarget(target, v_hat)
    fast, fast_state = simulate_frame(short_radar, channel, 0.0, attacker=state, backend="spectral")
    slow, slow_state = simulate_frame(short_radar, channel, 0.0, attacker=state, backend="samples")
    assert fast_state.per_chirp_drift_rad == pytest.approx(slow_state.per_chirp_drift_rad, abs=1e-9)
    assert fast.range_m == pytest.approx(slow.range_m, abs=1e-3)
    assert fast.velocity_mps == pytest.approx(slow.velocity_mps, abs=1e-4)
    assert np.allclose(fast.per_chirp_rssi, slow.per_chirp_rssi, rtol=1e-3)


def test_spectral_rejects_zero_crossing(short_radar):
    with pytest.raises(ChannelError):
        simulate_frame(short_radar, ChannelParams(distance_m=0.1, relative_velocity_mps=-50.0), 0.0)


def test_unknown_backend(short_radar):
    with pytest.raises(ValueError):
        simulate_frame(short_radar, ChannelParams(), 0.0, backend="gpu")
