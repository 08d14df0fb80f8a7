"""One victim frame, with or without an attacker, via two interchangeable backends.

``"samples"`` runs the full sample-level chain (frame synthesis, channel,
attacker, dechirp, range-FFT). ``"spectral"`` keeps the attacker's
sample-level sync and drift estimation but renders the victim's range
spectra directly (see :mod:`fmcwspoof.render`); it is the default for
multi-frame scenarios because it is one to two orders of magnitude faster.
"""

from __future__ import annotations

import dataclasses

import numpy as np

from .attacker import (
    AttackerState,
    observe_frame,
    run_attack_frame,
    check_feasible,
    spoof_chirp_phases,
    spoof_transmit_offset_s,
)
from .channel import ChannelParams, complex_noise, crop, propagate_echo
from .errors import ChannelError
from .render import ChirpTrain, render_if_spectra
from .victim import Measurement, measure_spectra, process_frame
from .waveform import SPEED_OF_LIGHT, ComplexSignal, RadarConfig, generate_chirp, generate_frame

BACKENDS = ("spectral", "samples")


def frame_head_signal(config: RadarConfig, phases, hops, n_chirps: int, frame_start_s: float) -> ComplexSignal:
    """A silent chirp slot followed by the first ``n_chirps`` chirps of a frame."""
    n_samp = config.samples_per_chirp
    parts = [np.zeros(n_samp, dtype=np.complex128)]
    for k in range(n_chirps):
        parts.append(generate_chirp(config, phases[k], hop_offset_hz=hops[k]).samples)
    return ComplexSignal(np.concatenate(parts), config.sample_rate_hz, frame_start_s - config.chirp_duration_s)


def echo_train(
    config: RadarConfig, ref_weights, ref_hops, channel: ChannelParams, fade=None
) -> ChirpTrain:
    k = np.arange(config.chirps_per_frame)
    dist = channel.distance_at(k * config.chirp_duration_s)
    if np.any(dist < 0):
        raise ChannelError("target passes through zero range inside the frame")
    delays = 2 * dist / SPEED_OF_LIGHT
    gain = channel.path_gain**2 * np.exp(-2j * np.pi * config.carrier_freq_hz * delays)
    if fade is not None:
        gain = gain * fade
    return ChirpTrain(delays, gain, np.asarray(ref_weights), np.asarray(ref_hops, dtype=float))


def spoof_train(
    config: RadarConfig, state: AttackerState, channel: ChannelParams, frame_start_s: float
) -> ChirpTrain:
    n, n_total = config.sync_chirps, config.chirps_per_frame
    k = np.arange(n_total)
    one_way = channel.distance_at(k * config.chirp_duration_s) / SPEED_OF_LIGHT
    offset = state.frame_start_est_s - frame_start_s + spoof_transmit_offset_s(state)
    weights = np.zeros(n_total, dtype=np.complex128)
    weights[n:] = state.tx_amplitude * np.exp(1j * spoof_chirp_phases(state, config))
    gain = channel.path_gain * np.exp(-2j * np.pi * config.carrier_freq_hz * one_way)
    return ChirpTrain(offset + one_way, gain, weights, np.zeros(n_total), channel.oscillator_offset_hz)


def simulate_frame(
    config: RadarConfig,
    channel: ChannelParams,
    frame_start_s: float,
    *,
    attacker: AttackerState | None = None,
    tx_phases=None,
    tx_hops=None,
    rng: np.random.Generator | None = None,
    frame_index: int = 0,
    backend: str = "spectral",
    echo_fade=None,
) -> tuple[Measurement, AttackerState | None]:
    """Simulate one frame and return the victim's measurement and the attacker state.

    Args:
        config: Victim radar parameters.
        channel: Geometry at ``frame_start_s`` plus noise and oscillator offset.
        frame_start_s: Absolute start time of the frame.
        attacker: State carrying the spoof targets (see
            :meth:`AttackerState.retarget`); ``None`` means no attack.
        tx_phases: Per-chirp initial phases, known to the victim.
        tx_hops: Per-chirp sweep-centre offsets, known to the victim.
        rng: Noise source; required when ``channel.noise_power > 0``.
        frame_index: Copied into the Measurement.
        backend: ``"spectral"`` or ``"samples"``.
        echo_fade: Optional per-chirp amplitude factor applied to the
            legitimate echo (e.g. a slow fade); receiver noise is unaffected.

    Returns:
        ``(measurement, attacker_state)``.
    """
    n_total = config.chirps_per_frame
    phases = np.zeros(n_total) if tx_phases is None else np.asarray(tx_phases, dtype=float)
    hops = np.zeros(n_total) if tx_hops is None else np.asarray(tx_hops, dtype=float)
    fade = None if echo_fade is None else np.asarray(echo_fade, dtype=float)
    if fade is not None and fade.shape != (n_total,):
        raise ValueError(f"echo_fade needs {n_total} entries, got {fade.size}")

    if backend == "samples":
        tx = generate_frame(config, phases, hop_offsets_hz=hops, start_time_s=frame_start_s)
        if fade is not None:
            if attacker is not None:
                raise ValueError("echo_fade with an attacker needs the spectral backend")
            quiet = dataclasses.replace(channel, noise_power=0.0)
            echo = crop(propagate_echo(tx, quiet, config), tx.start_time_s, len(tx))
            samples = (echo.windows(config.samples_per_chirp) * fade[:, None]).ravel()
            if channel.noise_power > 0:
                if rng is None:
                    raise ValueError("noise_power > 0 requires an explicit random generator")
                samples = samples + complex_noise(rng, samples.size, channel.noise_power)
            rx = echo.replace(samples=samples)
        elif attacker is None:
            rx = propagate_echo(tx, channel, config, rng)
        else:
            rx, attacker = run_attack_frame(tx, attacker, channel, config, rng)
        return process_frame(tx, rx, config, frame_index=frame_index, hops_hz=hops), attacker
    if backend != "spectral":
        raise ValueError(f"unknown backend {backend!r}; expected one of {BACKENDS}")

    ref_weights = config.tx_power * np.exp(1j * phases)
    trains = [echo_train(config, ref_weights, hops, channel, fade)]
    if attacker is not None:
        head = frame_head_signal(config, phases, hops, config.sync_chirps, frame_start_s)
        attacker = observe_frame(head, frame_start_s, attacker, channel, config, rng)
        check_feasible(attacker, config)
        trains.append(spoof_train(config, attacker, channel, frame_start_s))
    spectra, first_freq = render_if_spectra(
        config, ref_weights, hops, trains, frame_start_s, channel.noise_power, rng
    )
    measurement = measure_spectra(
        spectra, config, first_freq, hops_hz=hops, timestamp_s=frame_start_s, frame_index=frame_index
    )
    return measurement, attacker
