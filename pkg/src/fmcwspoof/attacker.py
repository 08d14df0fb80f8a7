"""Adversarial radar: one-shot TOA sync, drift estimation and spoof synthesis.

The attacker listens to the first ``n`` chirps of every victim frame, mixes
them with internal copies of the victim chirp, measures how the IF phase
advances from chirp to chirp and then transmits the remaining ``N - n``
chirps itself, delayed to encode the phantom range and phase-stepped to
encode the phantom velocity.

Sign convention: the victim dechirps with ``tx * conj(rx)``, so a chirp
transmitted with initial phase ``theta`` shows up in the victim IF as
``-theta``. The attacker therefore steps its chirps by ``-(drift + phi_m)``.
"""

from __future__ import annotations

import dataclasses
import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy import fft as sp_fft

from .channel import ChannelParams, crop, mix_signals, propagate_echo, propagate_one_way
from .errors import (
    InfeasibleSpoofError,
    InsufficientDataError,
    ProtocolError,
    SyncFailureError,
)
from .waveform import SPEED_OF_LIGHT, ComplexSignal, RadarConfig, chirp_waveform, generate_chirp

log = logging.getLogger(__name__)

# Below this margin the victim may lock onto the real echo instead of the spoof.
RELIABLE_MARGIN_DB = 6.0


@dataclass(frozen=True)
class AttackerState:
    """Everything the attacker knows and intends, threaded from frame to frame."""

    synced: bool = False
    toa_s: float | None = None
    frame_epoch_s: float | None = None
    frame_start_est_s: float | None = None
    t_d_est_s: float = 0.0
    per_chirp_drift_rad: float = 0.0
    spoof_range_m: float | None = None
    spoof_velocity_mps: float = 0.0
    manipulated_delay_s: float = 0.0
    manipulating_phase_rad: float = 0.0
    power_margin_db: float = 20.0
    tx_amplitude: float = 1.0
    sync_threshold: float = 3.0
    compensate_drift: bool = True
    sync_count: int = 0

    def replace(self, **changes) -> "AttackerState":
        return dataclasses.replace(self, **changes)

    @property
    def adversarial_phase_step_rad(self) -> float:
        drift = self.per_chirp_drift_rad if self.compensate_drift else 0.0
        return drift + self.manipulating_phase_rad

    @property
    def reliable(self) -> bool:
        return self.power_margin_db >= RELIABLE_MARGIN_DB

    def retarget(self, spoof_range_m: float, spoof_velocity_mps: float) -> "AttackerState":
        return self.replace(spoof_range_m=spoof_range_m, spoof_velocity_mps=spoof_velocity_mps)


def sync_toa(
    rx: ComplexSignal,
    threshold: float = 3.0,
    *,
    noise_window: int = 128,
    min_run: int = 8,
    floor_ratio: float = 0.1,
) -> float:
    """Time of the first sample that rises above ``threshold`` times the noise level.

    The noise level is the median magnitude of the first ``noise_window``
    samples, floored at ``floor_ratio`` of the buffer's peak magnitude so a
    noiseless buffer still has a finite reference. A crossing only counts if
    it persists for ``min_run`` consecutive samples, which keeps isolated
    noise spikes from triggering the sync.
    """
    if threshold <= 0:
        raise ValueError("threshold must be positive")
    mags = np.abs(rx.samples)
    if mags.size <= noise_window + min_run:
        raise ValueError("buffer too short for the noise window")
    ref = max(float(np.median(mags[:noise_window])), floor_ratio * float(mags.max()))
    if ref == 0:
        raise SyncFailureError("buffer is silent")
    above = mags[noise_window:] > threshold * ref
    if min_run > 1:
        runs = np.convolve(above.astype(np.int32), np.ones(min_run, dtype=np.int32), "valid")
        hits = np.flatnonzero(runs == min_run)
    else:
        hits = np.flatnonzero(above)
    if hits.size == 0:
        raise SyncFailureError("no sample exceeded the sync threshold")
    return rx.start_time_s + (noise_window + int(hits[0])) / rx.sample_rate_hz


def internal_if_signals(
    rx: ComplexSignal, chirp_starts_s, config: RadarConfig
) -> list[ComplexSignal]:
    """Mix received chirps with the attacker's internal chirp: ``rx * conj(internal)``.

    ``chirp_starts_s`` are the attacker's estimated arrival times of the
    chirps to analyse; each is snapped to the receive buffer's sample grid.
    """
    n_samp = config.samples_per_chirp
    internal = np.conj(generate_chirp(config).samples) / config.tx_power
    out = []
    for start in chirp_starts_s:
        grid_start = rx.start_time_s + round((start - rx.start_time_s) * rx.sample_rate_hz) / rx.sample_rate_hz
        seg = crop(rx, grid_start, n_samp)
        out.append(seg.replace(samples=seg.samples * internal))
    return out


def estimate_drift(internal_if_signals: list[ComplexSignal]) -> float:
    """Circular mean of the adjacent-chirp IF phase increments.

    Phases are read at the bin that dominates the summed spectra so every
    chirp is compared at the same frequency.
    """
    if len(internal_if_signals) < 2:
        raise InsufficientDataError("drift estimation needs at least two IF signals")
    spectra = sp_fft.fft(np.stack([s.samples for s in internal_if_signals]), axis=1)
    power = spectra.real**2 + spectra.imag**2
    common_bin = int(np.argmax(power.sum(axis=0)))
    z = spectra[:, common_bin]
    steps = z[1:] * np.conj(z[:-1])
    mags = np.abs(steps)
    if not np.any(mags):
        raise InsufficientDataError("IF signals carry no energy")
    unit = steps[mags > 0] / mags[mags > 0]
    return float(np.angle(unit.mean()))


def plan_attack(
    state: AttackerState, channel: ChannelParams, config: RadarConfig
) -> AttackerState:
    """Derive ``t_m`` and ``phi_m`` from the true geometry and the spoof targets."""
    target_range = channel.distance_m if state.spoof_range_m is None else state.spoof_range_m
    vmax = config.max_unambiguous_velocity_mps
    if abs(state.spoof_velocity_mps) >= vmax:
        raise InfeasibleSpoofError(
            f"spoof velocity {state.spoof_velocity_mps:g} m/s outside the victim's "
            f"unambiguous interval +/-{vmax:.3f} m/s"
        )
    return state.replace(
        spoof_range_m=target_range,
        t_d_est_s=channel.round_trip_delay_s,
        manipulated_delay_s=2 * (target_range - channel.distance_m) / SPEED_OF_LIGHT,
        manipulating_phase_rad=float(config.velocity_to_phase_step(state.spoof_velocity_mps)),
    )


def check_feasible(state: AttackerState, config: RadarConfig) -> None:
    """Raise unless the total spoofed delay ``t_d + t_m`` lies in ``[0, T_c)``."""
    total = state.t_d_est_s + state.manipulated_delay_s
    if total < 0 or total >= config.chirp_duration_s:
        raise InfeasibleSpoofError(
            f"spoofed delay {total:.3e} s outside [0, T_c); phantom range {state.spoof_range_m} m"
        )


def spoof_chirp_phases(state: AttackerState, config: RadarConfig) -> np.ndarray:
    """Initial phase of every chirp slot ``k = n..N-1`` the attacker fills."""
    k = np.arange(config.sync_chirps, config.chirps_per_frame)
    return -k * state.adversarial_phase_step_rad


def spoof_transmit_offset_s(state: AttackerState) -> float:
    """Transmit time of spoof chirp ``k`` relative to the estimated victim chirp-``k`` start."""
    return state.t_d_est_s / 2 + state.manipulated_delay_s


def synthesize_spoof_frame(state: AttackerState, config: RadarConfig) -> ComplexSignal:
    """Build the ``N - n`` phase-stepped, delayed chirps the attacker transmits.

    Chirp ``k`` is the victim chirp evaluated analytically at an offset of
    ``t_d/2 + t_m`` after the estimated victim chirp-``k`` start, scaled by
    ``exp(-j*k*(drift + phi_m))``. The buffer starts one chirp slot before
    the first spoof chirp so negative manipulated delays fit.
    """
    if not state.synced or state.frame_start_est_s is None or state.toa_s is None:
        raise ProtocolError("attacker must sync before synthesizing a spoof frame")
    check_feasible(state, config)
    fs = config.sample_rate_hz
    n_samp = config.samples_per_chirp
    n, n_total = config.sync_chirps, config.chirps_per_frame
    # Snap the buffer to the receive grid anchored by the TOA sample.
    nominal = state.frame_start_est_s + (n - 1) * config.chirp_duration_s
    start = state.toa_s + round((nominal - state.toa_s) * fs) / fs
    n_slots = n_total - n + 1
    t = start + np.arange(n_slots * n_samp) / fs
    out = np.zeros(t.size, dtype=np.complex128)
    offset = spoof_transmit_offset_s(state)
    phases = spoof_chirp_phases(state, config)
    for j, k in enumerate(range(n, n_total)):
        chirp_start = state.frame_start_est_s + k * config.chirp_duration_s + offset
        lo = max(0, int(math.floor((chirp_start - start) * fs)) - 1)
        hi = min(t.size, lo + n_samp + 3)
        out[lo:hi] += np.exp(1j * phases[j]) * chirp_waveform(config, t[lo:hi] - chirp_start)
    out *= state.tx_amplitude
    return ComplexSignal(out, fs, start)


def frame_head(victim_tx: ComplexSignal, config: RadarConfig, n_chirps: int) -> ComplexSignal:
    """First ``n_chirps`` chirps of a frame preceded by one silent chirp slot."""
    n_samp = config.samples_per_chirp
    lead = victim_tx.start_time_s - config.chirp_duration_s
    return crop(victim_tx, lead, (n_chirps + 1) * n_samp)


def observe_frame(
    victim_tx_head: ComplexSignal,
    frame_start_s: float,
    state: AttackerState,
    channel: ChannelParams,
    config: RadarConfig,
    rng: np.random.Generator | None = None,
) -> AttackerState:
    """Receive the sync chirps of one frame and update timing and drift.

    ``victim_tx_head`` must start one chirp slot before the frame and hold
    at least ``n`` chirps (see :func:`frame_head`); ``frame_start_s`` is only
    used to place the channel geometry, never as attacker knowledge.
    """
    state = plan_attack(state, channel, config)
    head_channel = dataclasses.replace(
        channel,
        distance_m=float(channel.distance_at(victim_tx_head.start_time_s - frame_start_s)),
    )
    received = propagate_one_way(victim_tx_head, head_channel, config, apply_drift=True, rng=rng)

    one_way = channel.one_way_delay_s
    if not state.synced:
        toa = sync_toa(received, state.sync_threshold)
        epoch = toa - one_way
        state = state.replace(
            synced=True, toa_s=toa, frame_epoch_s=epoch, sync_count=state.sync_count + 1
        )
        log.debug("synced: toa=%.9f s", toa)
    interval = config.frame_interval_s
    index = round((victim_tx_head.start_time_s + config.chirp_duration_s - state.frame_epoch_s) / interval)
    frame_start_est = state.frame_epoch_s + index * interval
    state = state.replace(frame_start_est_s=frame_start_est)

    arrivals = frame_start_est + one_way + np.arange(config.sync_chirps) * config.chirp_duration_s
    # Arrival times sit on the TOA grid up to range drift; internal_if_signals snaps them.
    ifs = internal_if_signals(received, arrivals, config)
    drift = estimate_drift(ifs)
    amplitude = config.tx_power * channel.path_gain * 10 ** (state.power_margin_db / 20)
    if not state.reliable:
        log.warning(
            "attacker power margin %.1f dB: victim may lock onto the real echo", state.power_margin_db
        )
    return state.replace(per_chirp_drift_rad=drift, tx_amplitude=amplitude)


def run_attack_frame(
    victim_tx: ComplexSignal,
    state: AttackerState,
    channel: ChannelParams,
    config: RadarConfig,
    rng: np.random.Generator | None = None,
) -> tuple[ComplexSignal, AttackerState]:
    """Simulate one attacked frame end to end at sample level.

    Returns the superposition of the legitimate echo (with receiver noise)
    and the attacker's transmission as seen at the victim antenna, and the
    updated attacker state. Sync happens on the first call only.
    """
    head = frame_head(victim_tx, config, config.sync_chirps)
    state = observe_frame(head, victim_tx.start_time_s, state, channel, config, rng)
    spoof = synthesize_spoof_frame(state, config)
    uplink = dataclasses.replace(
        channel,
        distance_m=float(channel.distance_at(spoof.start_time_s - victim_tx.start_time_s)),
        noise_power=0.0,
    )
    at_victim = propagate_one_way(spoof, uplink, config, apply_drift=True)
    echo = propagate_echo(victim_tx, channel, config, rng)
    return mix_signals(echo, at_victim), state
