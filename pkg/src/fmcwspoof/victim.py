"""Victim receive chain: dechirp, range-FFT, beat/phase extraction, frame estimates."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import fft as sp_fft

from .channel import crop
from .errors import NoDetectionError
from .waveform import ComplexSignal, RadarConfig

DETECTION_MARGIN_DB = 12.0
WEAK_CHIRP_GATE_DB = 10.0


@dataclass(frozen=True)
class Measurement:
    """One frame's worth of victim output.

    ``range_m`` is derived from ``beat_freq_hz`` with ``d = c*f_b/(2*S)``.
    Per-chirp arrays have one entry per chirp in the frame; ``valid`` marks
    the chirps that entered the frame averages.
    """

    timestamp_s: float
    range_m: float
    velocity_mps: float
    beat_freq_hz: float
    per_chirp_phase_rad: np.ndarray
    per_chirp_rssi: np.ndarray
    frame_index: int = 0
    per_chirp_beat_hz: np.ndarray | None = None
    valid: np.ndarray | None = None
    phase_step_circvar: float = 0.0

    @property
    def n_valid(self) -> int:
        return int(np.count_nonzero(self.valid)) if self.valid is not None else len(self.per_chirp_rssi)


def dechirp(tx_chirp: ComplexSignal, rx_chirp: ComplexSignal) -> ComplexSignal:
    """Mix the received chirp with the transmitted one: ``tx * conj(rx)``.

    A pure echo delayed by ``t_d`` becomes a tone at ``+S*t_d``.
    """
    if tx_chirp.sample_rate_hz != rx_chirp.sample_rate_hz:
        raise ValueError("tx and rx sample rates differ")
    if len(tx_chirp) != len(rx_chirp):
        raise ValueError(f"length mismatch: tx {len(tx_chirp)} vs rx {len(rx_chirp)}")
    return tx_chirp.replace(samples=tx_chirp.samples * np.conj(rx_chirp.samples))


def range_band(n_bins: int, sample_rate_hz: float, if_bandwidth_hz: float | None):
    """FFT bin indices kept by the IF filter, ordered by ascending frequency.

    Returns:
        ``(indices, first_freq_hz)``; column ``j`` of a band-limited spectrum
        sits at ``first_freq_hz + j * sample_rate_hz / n_bins``.
    """
    spacing = sample_rate_hz / n_bins
    if if_bandwidth_hz is None or if_bandwidth_hz >= sample_rate_hz:
        half = n_bins // 2
        return np.arange(-half, n_bins - half) % n_bins, -half * spacing
    k = int(np.floor(if_bandwidth_hz / 2 / spacing))
    return np.arange(-k, k + 1) % n_bins, -k * spacing


def _parabolic_offset(power: np.ndarray, peak: np.ndarray) -> np.ndarray:
    """Sub-bin peak offset from a parabola through the log-powers around ``peak``."""
    n_rows, n_bins = power.shape
    rows = np.arange(n_rows)
    tiny = np.finfo(float).tiny
    left = np.log(power[rows, np.maximum(peak - 1, 0)] + tiny)
    mid = np.log(power[rows, peak] + tiny)
    right = np.log(power[rows, np.minimum(peak + 1, n_bins - 1)] + tiny)
    denom = left - 2 * mid + right
    with np.errstate(divide="ignore", invalid="ignore"):
        delta = np.where(denom < 0, 0.5 * (left - right) / denom, 0.0)
    edge = (peak == 0) | (peak == n_bins - 1)
    return np.where(edge, 0.0, np.clip(delta, -0.5, 0.5))


def _complex_offset(spectra: np.ndarray, peak: np.ndarray, dft_length: int) -> np.ndarray:
    """Near-unbiased sub-bin offset from the complex peak and its neighbours.

    Candan's correction of Jacobsen's estimator for a rectangular window;
    used where the delay must be known to a small fraction of a bin.
    """
    n_rows, n_cols = spectra.shape
    rows = np.arange(n_rows)
    left = spectra[rows, np.maximum(peak - 1, 0)]
    mid = spectra[rows, peak]
    right = spectra[rows, np.minimum(peak + 1, n_cols - 1)]
    denom = 2 * mid - left - right
    with np.errstate(divide="ignore", invalid="ignore"):
        raw = np.real((left - right) / denom)
    raw = np.where(np.isfinite(raw), raw, 0.0)
    delta = raw * np.tan(np.pi / dft_length) / (np.pi / dft_length)
    edge = (peak == 0) | (peak == n_cols - 1)
    return np.where(edge, 0.0, np.clip(delta, -0.5, 0.5))


def peak_table(spectra: np.ndarray):
    """Per-row peak column, sub-bin offset, peak power and median power of ``spectra``."""
    power = spectra.real**2 + spectra.imag**2
    peak = np.argmax(power, axis=1)
    rows = np.arange(power.shape[0])
    peak_power = power[rows, peak]
    half = power.shape[1] // 2
    median = np.partition(power, half, axis=1)[:, half]
    delta = _parabolic_offset(power, peak)
    return power, peak, delta, peak_power, median


def range_spectra(if_windows: np.ndarray, config: RadarConfig) -> tuple[np.ndarray, float]:
    """Range-FFT of each IF window, restricted to the IF band.

    Returns:
        ``(spectra, first_freq_hz)`` with columns in ascending frequency.
    """
    n_bins = if_windows.shape[-1]
    idx, f0 = range_band(n_bins, config.sample_rate_hz, config.if_bandwidth_hz)
    return sp_fft.fft(if_windows, axis=-1)[..., idx], f0


def estimate_beat(if_signal: ComplexSignal) -> tuple[float, float, float]:
    """Dominant tone of an IF signal.

    Returns:
        ``(freq_hz, phase_rad, magnitude)`` where the frequency is refined by
        parabolic interpolation over log-magnitudes and the phase/magnitude
        are read at the peak bin.
    """
    if len(if_signal) < 64:
        raise ValueError("estimate_beat needs at least 64 samples")
    if not np.any(if_signal.samples):
        raise NoDetectionError("IF signal is identically zero")
    n_bins = len(if_signal)
    idx, f0 = range_band(n_bins, if_signal.sample_rate_hz, None)
    spectrum = sp_fft.fft(if_signal.samples)[idx][None, :]
    _, peak, delta, _, _ = peak_table(spectrum)
    k = int(peak[0])
    freq = f0 + (k + delta[0]) * if_signal.sample_rate_hz / n_bins
    value = spectrum[0, k]
    return float(freq), float(np.angle(value)), float(np.abs(value))


def measure_spectra(
    spectra: np.ndarray,
    config: RadarConfig,
    first_freq_hz: float,
    *,
    hops_hz=None,
    timestamp_s: float = 0.0,
    frame_index: int = 0,
    detection_margin_db: float = DETECTION_MARGIN_DB,
    weak_gate_db: float = WEAK_CHIRP_GATE_DB,
) -> Measurement:
    """Turn per-chirp range spectra into a frame Measurement.

    ``spectra`` holds one row per chirp and one column per range bin in
    ascending frequency, starting at ``first_freq_hz`` with the FFT bin
    spacing ``1 / T_c``.

    A chirp is used when its peak exceeds the spectrum median by
    ``detection_margin_db`` and is no more than ``weak_gate_db`` below the
    frame's typical peak.

    Each chirp's phase is read at its own peak bin and stripped of every
    term that does not come from the carrier (see :func:`_waveform_phase`),
    using a straight-line fit of the per-chirp beats as the delay estimate.
    A target migrating across bins during the frame therefore does not
    inject pi jumps. With frequency hopping, whatever residual is still
    proportional to the hop offset is fitted out afterwards; see
    :func:`_hop_corrected_step`.
    """
    n_chirps, n_bins = spectra.shape
    power, peak, delta, peak_power, median = peak_table(spectra)
    detected = peak_power >= median * 10 ** (detection_margin_db / 10)
    if np.count_nonzero(detected) * 2 <= n_chirps:
        raise NoDetectionError(
            f"only {np.count_nonzero(detected)}/{n_chirps} chirps rose above the noise floor"
        )
    typical = np.median(peak_power[detected])
    valid = detected & (peak_power >= typical * 10 ** (-weak_gate_db / 10))

    spacing = config.sample_rate_hz / config.samples_per_chirp
    beats = first_freq_hz + (peak + delta) * spacing
    beat = float(np.mean(beats[valid]))

    k = np.arange(n_chirps)
    fine_beats = first_freq_hz + (peak + _complex_offset(spectra, peak, config.samples_per_chirp)) * spacing
    trend = np.polyfit(k[valid], fine_beats[valid], 1) if np.count_nonzero(valid) > 1 else [0.0, beat]
    delay_est = np.polyval(trend, k) / config.slope_hz_per_s
    hops = np.zeros(n_chirps) if hops_hz is None else np.asarray(hops_hz, dtype=float)
    signed_bin = round(first_freq_hz / spacing) + peak
    phasors = spectra[k, peak] * np.exp(-1j * _waveform_phase(config, delay_est, signed_bin, hops))
    phases = np.angle(phasors)
    pairs = valid[1:] & valid[:-1]
    if not np.any(pairs):
        raise NoDetectionError("no adjacent pair of detected chirps")
    steps = phasors[1:][pairs] * np.conj(phasors[:-1][pairs])
    unit_mean = np.mean(steps / np.maximum(np.abs(steps), np.finfo(float).tiny))
    mean_step = float(np.angle(unit_mean))
    if np.ptp(hops[valid]) > 0:
        mean_step = _hop_corrected_step(phasors, valid, hops, mean_step)

    return Measurement(
        timestamp_s=timestamp_s,
        range_m=float(config.beat_to_range(beat)),
        velocity_mps=float(config.phase_step_to_velocity(mean_step)),
        beat_freq_hz=beat,
        per_chirp_phase_rad=phases,
        per_chirp_rssi=np.sqrt(peak_power),
        frame_index=frame_index,
        per_chirp_beat_hz=beats,
        valid=valid,
        phase_step_circvar=float(1.0 - np.abs(unit_mean)),
    )


def _waveform_phase(config: RadarConfig, delay_s, signed_bin, hops_hz) -> np.ndarray:
    """Phase of DFT bin ``m`` of an echo with delay ``t_d``, minus the carrier term.

    A chirp hopped by ``h`` and delayed by ``t_d`` dechirps to a tone at
    ``f = B*t_d`` bins with starting phase ``2*pi*(h - B/2)*t_d - pi*S*t_d**2``
    that only exists from sample ``n0 = ceil(t_d*f_s)``. Summing the truncated
    tone at bin ``m`` adds ``pi*(f - m)*(n0 + L - 1)/L``. Only the carrier
    phase ``2*pi*f_c*t_d`` is left once this is removed, including the
    second-order ``S*t_d**2`` term (residual video phase).
    """
    n_samp = config.samples_per_chirp
    delay = np.asarray(delay_s, dtype=float)
    n0 = np.clip(np.ceil(delay * config.sample_rate_hz), 0, n_samp - 1)
    f_bins = config.bandwidth_hz * delay
    return (
        2 * np.pi * (hops_hz - config.bandwidth_hz / 2) * delay
        - np.pi * config.slope_hz_per_s * delay**2
        + np.pi * (f_bins - signed_bin) * (n0 + n_samp - 1) / n_samp
    )


def _hop_corrected_step(phasors, valid, hops, step) -> float:
    """Refine the phase step by regressing the residual phase on ``[1, k, hop]``.

    Any leftover delay error ``dt`` adds ``2*pi*hop_k*dt`` to chirp ``k``,
    which a plain circular mean of the steps would partly absorb.
    """
    k = np.flatnonzero(valid)
    z = phasors[k] * np.exp(-1j * step * k)
    resid = np.angle(z * np.conj(np.mean(z / np.maximum(np.abs(z), np.finfo(float).tiny))))
    design = np.column_stack([np.ones(k.size), k, hops[k]])
    coef, *_ = np.linalg.lstsq(design, resid, rcond=None)
    return float(np.angle(np.exp(1j * (step + coef[1]))))


def process_frame(
    tx_frame: ComplexSignal,
    rx_frame: ComplexSignal,
    config: RadarConfig,
    *,
    frame_index: int = 0,
    hops_hz=None,
) -> Measurement:
    """Estimate range and velocity from a transmitted and a received frame.

    The received signal is cropped to the transmit frame's time support,
    each chirp is dechirped against the chirp actually transmitted (so any
    known per-chirp phase the victim applied cancels), and the range-FFT of
    every chirp feeds :func:`measure_spectra`.
    """
    n_samp = config.samples_per_chirp
    if len(tx_frame) != n_samp * config.chirps_per_frame:
        raise ValueError("tx_frame does not hold N chirps")
    rx = crop(rx_frame, tx_frame.start_time_s, len(tx_frame))
    if_frame = dechirp(tx_frame, rx).windows(n_samp)
    spectra, f0 = range_spectra(if_frame, config)
    return measure_spectra(
        spectra, config, f0, hops_hz=hops_hz, timestamp_s=tx_frame.start_time_s, frame_index=frame_index
    )


def rssi_profile(measurement: Measurement) -> np.ndarray:
    """Per-chirp peak power in dB relative to the frame median."""
    power = np.asarray(measurement.per_chirp_rssi, dtype=float) ** 2
    ref = np.median(power)
    tiny = np.finfo(float).tiny
    return 10 * np.log10(np.maximum(power, tiny) / max(ref, tiny))
