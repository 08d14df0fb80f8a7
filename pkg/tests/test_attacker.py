import logging

import numpy as np
import pytest

from fmcwspoof.attacker import (
    AttackerState,
    check_feasible,
    estimate_drift,
    frame_head,
    internal_if_signals,
    plan_attack,
    run_attack_frame,
    synthesize_spoof_frame,
    sync_toa,
)
from fmcwspoof.channel import ChannelParams, complex_noise, propagate_one_way
from fmcwspoof.engine import simulate_frame
from fmcwspoof.errors import InfeasibleSpoofError, InsufficientDataError, ProtocolError, SyncFailureError
from fmcwspoof.victim import process_frame
from fmcwspoof.waveform import SPEED_OF_LIGHT, ComplexSignal, generate_frame


def head_at_attacker(config, channel, rng=None, n_chirps=1):
    tx = generate_frame(config)
    head = frame_head(tx, config, n_chirps)
    return propagate_one_way(head, channel, config, rng=rng)


def drift_from_channel(config, channel):
    tx = generate_frame(config)
    head = frame_head(tx, config, config.sync_chirps)
    rx = propagate_one_way(head, channel, config)
    arrivals = channel.one_way_delay_s + np.arange(config.sync_chirps) * config.chirp_duration_s
    return estimate_drift(internal_if_signals(rx, arrivals, config))


class TestSync:
    def test_noiseless_toa(self, short_radar):
        rx = head_at_attacker(short_radar, ChannelParams(distance_m=60.0, path_gain=1.0))
        toa = sync_toa(rx, 3.0)
        assert 60.0 / SPEED_OF_LIGHT == pytest.approx(200.1e-9, abs=0.1e-9)
        assert abs(toa - 60.0 / SPEED_OF_LIGHT) <= 1 / short_radar.sample_rate_hz

    def test_all_noise_fails(self):
        rng = np.random.default_rng(1)
        noise = ComplexSignal(complex_noise(rng, 56_000, 1.0), 56e6)
        with pytest.raises(SyncFailureError):
            sync_toa(noise, 3.0)

    def test_silence_fails(self):
        with pytest.raises(SyncFailureError):
            sync_toa(ComplexSignal(np.zeros(4096), 56e6), 3.0)

    def test_threshold_positive(self):
        with pytest.raises(ValueError):
            sync_toa(ComplexSignal(np.ones(4096), 56e6), 0.0)

    def test_20db_snr_within_two_samples(self, short_radar):
        # Unit-amplitude chirp, noise power 0.01: 20 dB SNR.
        channel = ChannelParams(distance_m=60.0, path_gain=1.0, noise_power=0.01)
        fs = short_radar.sample_rate_hz
        truth = channel.one_way_delay_s
        errors = []
        for seed in range(100):
            rx = head_at_attacker(short_radar, channel, rng=np.random.default_rng(seed))
            errors.append(abs(sync_toa(rx, 3.0) - truth) * fs)
        assert max(errors) <= 2.0


class TestDrift:
    def test_oscillator_offset(self, short_radar):
        drift = drift_from_channel(short_radar, ChannelParams(distance_m=60.0, oscillator_offset_hz=100.0))
        # The first sync chirp lacks the tail of a preceding chirp, which biases
        # the estimate by under 1e-4 rad.
        assert drift == pytest.approx(2 * np.pi * 100 * short_radar.chirp_duration_s, abs=1e-4)
        assert drift == pytest.approx(0.6283, abs=1e-4)

    def test_no_offset(self, short_radar):
        assert drift_from_channel(short_radar, ChannelParams(distance_m=60.0)) == pytest.approx(0.0, abs=1e-4)

    def test_offset_and_motion(self, short_radar):
        channel = ChannelParams(distance_m=60.0, relative_velocity_mps=1.0, oscillator_offset_hz=100.0)
        # Oracle: phase advance between the same sample of consecutive chirps
        # straight out of the one-way channel.
        tx = generate_frame(short_radar)
        rx = propagate_one_way(tx, channel, short_radar)
        n = short_radar.samples_per_chirp
        i = n // 2
        oracle = np.angle(rx.samples[n + i] * np.conj(rx.samples[i]) / (tx.samples[n + i] * np.conj(tx.samples[i])))
        # A receding target lengthens the path, which retards the carrier phase.
        assert oracle == pytest.approx(0.6283 - 0.0419 / 2, abs=1e-3)
        assert drift_from_channel(short_radar, channel) == pytest.approx(oracle, abs=2e-4)

    def test_needs_two_signals(self, short_radar):
        rx = head_at_attacker(short_radar, ChannelParams(distance_m=60.0))
        with pytest.raises(InsufficientDataError):
            estimate_drift(internal_if_signals(rx, [200e-9], short_radar))
        with pytest.raises(InsufficientDataError):
            estimate_drift([])


class TestPlan:
    @pytest.mark.parametrize("target, v_hat", [(30.0, 0.0), (60.0, -10.0), (85.0, 20.0)])
    def test_invariants(self, radar, target, v_hat):
        state = plan_attack(AttackerState().retarget(target, v_hat), ChannelParams(distance_m=60.0), radar)
        assert state.manipulated_delay_s == pytest.approx(2 * (target - 60.0) / SPEED_OF_LIGHT)
        assert state.manipulating_phase_rad == pytest.approx(4 * np.pi * v_hat * 1e-3 / radar.wavelength_m)

    def test_closer_phantom(self, radar):
        state = plan_attack(AttackerState().retarget(30.0, 0.0), ChannelParams(distance_m=60.0), radar)
        assert state.manipulated_delay_s == pytest.approx(-200.1e-9, abs=0.1e-9)
        m, _ = simulate_frame(radar, ChannelParams(distance_m=60.0, path_gain=0.1), 0.0, attacker=state)
        assert m.beat_freq_hz == pytest.approx(2 * radar.slope_hz_per_s * 30.0 / SPEED_OF_LIGHT, abs=500)
        assert m.beat_freq_hz == pytest.approx(5.6e3, abs=500)

    def test_phi_m_for_minus_10(self, radar):
        state = plan_attack(AttackerState().retarget(60.0, -10.0), ChannelParams(distance_m=60.0), radar)
        assert state.manipulating_phase_rad == pytest.approx(-0.4192, abs=1e-4)

    def test_unrepresentable_velocity(self, radar):
        with pytest.raises(InfeasibleSpoofError):
            plan_attack(AttackerState().retarget(60.0, 80.0), ChannelParams(distance_m=60.0), radar)

    def test_acausal_range(self, radar):
        state = plan_attack(AttackerState().retarget(-10.0, 0.0), ChannelParams(distance_m=60.0), radar)
        with pytest.raises(InfeasibleSpoofError):
            check_feasible(state, radar)

    def test_synthesis_needs_sync(self, radar):
        with pytest.raises(ProtocolError):
            synthesize_spoof_frame(AttackerState().retarget(60.0, 0.0), radar)


def attacked(config, target, v_hat, channel=None, margin_db=20.0, backend="spectral"):
    channel = channel or ChannelParams(distance_m=60.0, path_gain=0.1)
    state = AttackerState(power_margin_db=margin_db).retarget(target, v_hat)
    m, state = simulate_frame(config, channel, 0.0, attacker=state, backend=backend)
    return m, state


class TestEndToEnd:
    def test_identity_spoof(self, radar):
        m, _ = attacked(radar, 60.0, 0.0)
        assert abs(m.range_m - 60.0) <= radar.range_resolution_m
        assert abs(m.velocity_mps) <= 0.05

    def test_velocity_spoof(self, radar):
        m, _ = attacked(radar, 60.0, -10.0)
        assert m.velocity_mps == pytest.approx(-10.0, abs=0.1)

    def test_drift_compensated(self, radar):
        channel = ChannelParams(distance_m=60.0, path_gain=0.1, oscillator_offset_hz=100.0)
        m, state = attacked(radar, 60.0, 0.0, channel)
        assert state.per_chirp_drift_rad == pytest.approx(0.6283, abs=1e-3)
        assert abs(m.velocity_mps) <= 0.05

    def test_uncompensated_drift_leaks(self, radar):
        channel = ChannelParams(distance_m=60.0, path_gain=0.1, oscillator_offset_hz=100.0)
        state = AttackerState(compensate_drift=False).retarget(60.0, 0.0)
        m, _ = simulate_frame(radar, channel, 0.0, attacker=state)
        leak = radar.phase_step_to_velocity(0.6283)
        assert abs(abs(m.velocity_mps) - leak) < 0.1

    @pytest.mark.parametrize("backend", ["spectral", "samples"])
    def test_45m_closing_at_5(self, short_radar, radar, backend):
        config = short_radar if backend == "samples" else radar
        m, _ = attacked(config, 45.0, -5.0, backend=backend)
        assert abs(m.range_m - 45.0) <= config.range_resolution_m
        assert m.velocity_mps == pytest.approx(-5.0, abs=0.1)

    def test_sample_level_full_loop(self, short_radar):
        tx = generate_frame(short_radar)
        state = AttackerState().retarget(60.0, 0.0)
        rx, state = run_attack_frame(tx, state, ChannelParams(distance_m=60.0, path_gain=0.1), short_radar)
        m = process_frame(tx, rx, short_radar)
        assert state.synced
        assert abs(m.range_m - 60.0) <= short_radar.range_resolution_m
        assert abs(m.velocity_mps) <= 0.05

    def test_sync_happens_once(self, short_radar):
        channel = ChannelParams(distance_m=60.0, path_gain=0.1)
        state = AttackerState().retarget(50.0, -3.0)
        first_toa = None
        for frame in range(3):
            start = frame * short_radar.frame_interval_s
            tx = generate_frame(short_radar, start_time_s=start)
            _, state = run_attack_frame(tx, state, channel, short_radar)
            first_toa = first_toa if first_toa is not None else state.toa_s
            assert state.sync_count == 1
            assert state.toa_s == first_toa
            assert state.frame_start_est_s == pytest.approx(start, abs=1 / short_radar.sample_rate_hz)

    def test_equal_power_is_unreliable(self, radar, caplog):
        with caplog.at_level(logging.WARNING, logger="fmcwspoof"):
            m, state = attacked(radar, 30.0, 0.0, margin_db=0.0)
        assert not state.reliable
        assert "power margin" in caplog.text
        # The victim picks one of the two components.
        assert min(abs(m.range_m - 30.0), abs(m.range_m - 60.0)) <= radar.range_resolution_m

    def test_margin_sweep(self, radar):
        hits = {}
        for margin in (-10.0, 20.0):
            m, state = attacked(radar, 30.0, 0.0, margin_db=margin)
            hits[margin] = abs(m.range_m - 30.0) <= radar.range_resolution_m
        assert hits == {-10.0: False, 20.0: True}
