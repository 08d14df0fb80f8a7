"""Per-chirp range spectra rendered directly from the frame structure.

A received frame is a sum of chirp trains. Inside victim window ``k`` a
train contributes its chirp ``k`` delayed by ``tau_k`` plus the tail of
chirp ``k-1``; both are copies of one analytic waveform up to a complex
weight. Dechirping and the range-FFT are linear, so each window's spectrum
is a weighted sum of a handful of basis spectra, computed once per distinct
(delay, hop, frequency offset) combination. Receiver noise is white after
dechirping with a constant-envelope chirp, so it is drawn directly in the
FFT domain with the matching per-bin variance.

This reproduces ``process_frame(tx, propagate(...))`` without materialising
the ``N * T_c * f_s`` samples of a frame.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .victim import range_band
from .waveform import RadarConfig


@dataclass
class ChirpTrain:
    """One chirp train as seen in the victim's receive windows.

    Attributes:
        delays_s: Delay of the train inside each window, shape ``(N,)``.
        window_gain: Complex channel factor applied to the whole window.
        chirp_weights: Complex amplitude of source chirp ``k`` (zero = silent).
        hops_hz: Sweep-centre offset of source chirp ``k``.
        freq_offset_hz: Residual carrier offset, applied as
            ``exp(j*2*pi*f*t)`` in absolute time.
    """

    delays_s: np.ndarray
    window_gain: np.ndarray
    chirp_weights: np.ndarray
    hops_hz: np.ndarray
    freq_offset_hz: float = 0.0


class _BasisCache:
    """Band-limited DFTs of ``ref * conj(src)`` for one chirp window.

    Both chirps share the slope ``S``, so their product is a single complex
    tone truncated to the overlap of their supports. Its DFT is a Dirichlet
    kernel, evaluated here in closed form on the IF-band bins only.
    """

    def __init__(self, config: RadarConfig):
        self.config = config
        self.fs = config.sample_rate_hz
        self.n_samp = config.samples_per_chirp
        self.t = np.arange(self.n_samp) / self.fs
        self.band, self.first_freq_hz = range_band(self.n_samp, self.fs, config.if_bandwidth_hz)
        first_bin = int(round(self.first_freq_hz * self.n_samp / self.fs))
        self.bins = first_bin + np.arange(self.band.size)
        self._bases = {}

    def _support(self, lag):
        # Same boundary test as chirp_waveform so both paths agree sample for sample.
        local = self.t - lag
        idx = np.flatnonzero((local >= 0) & (local < self.config.chirp_duration_s))
        return (int(idx[0]), int(idx[-1]) + 1) if idx.size else (0, 0)

    def basis(self, ref_hop, src_hop, delay, freq, tail):
        key = (ref_hop, src_hop, delay, freq, tail)
        if key not in self._bases:
            cfg = self.config
            lag = delay - (cfg.chirp_duration_s if tail else 0.0)
            lo, hi = self._support(lag)
            slope = cfg.slope_hz_per_s
            tone_hz = ref_hop - src_hop + slope * lag - freq
            phase0 = 2 * np.pi * ((src_hop - cfg.bandwidth_hz / 2) * lag - 0.5 * slope * lag * lag)
            count = hi - lo
            x = tone_hz / self.fs - self.bins / self.n_samp
            sin_x = np.sin(np.pi * x)
            small = np.abs(sin_x) < 1e-12
            ratio = np.where(small, count, np.sin(np.pi * x * count) / np.where(small, 1.0, sin_x))
            self._bases[key] = np.exp(1j * (phase0 + np.pi * x * (2 * lo + count - 1))) * ratio
        return self._bases[key]


def render_if_spectra(
    config: RadarConfig,
    ref_weights: np.ndarray,
    ref_hops: np.ndarray,
    trains: list[ChirpTrain],
    frame_start_s: float,
    noise_power: float = 0.0,
    rng: np.random.Generator | None = None,
) -> tuple[np.ndarray, float]:
    """Range spectra ``FFT(tx_k * conj(rx_k))`` for every chirp window ``k``.

    Args:
        config: Radar parameters.
        ref_weights: Complex amplitude of each transmitted chirp (tx power
            times the known per-chirp phase).
        ref_hops: Sweep-centre offset of each transmitted chirp.
        trains: Everything arriving at the victim antenna.
        frame_start_s: Absolute time of window 0.
        noise_power: Receiver noise variance per sample.
        rng: Source of the noise draws.

    Returns:
        ``(spectra, first_freq_hz)`` laid out like
        :func:`fmcwspoof.victim.range_spectra`: one row per chirp, IF-band
        columns in ascending frequency.
    """
    n_chirps, n_samp = config.chirps_per_frame, config.samples_per_chirp
    ref_weights = np.asarray(ref_weights, dtype=np.complex128)
    ref_hops = np.asarray(ref_hops, dtype=float)
    cache = _BasisCache(config)
    window_times = frame_start_s + np.arange(n_chirps) * config.chirp_duration_s

    columns: dict[tuple, np.ndarray] = {}
    for train in trains:
        gain = np.asarray(train.window_gain, dtype=np.complex128)
        if train.freq_offset_hz:
            gain = gain * np.exp(2j * np.pi * train.freq_offset_hz * window_times)
        weights = np.asarray(train.chirp_weights, dtype=np.complex128)
        prev_weights = np.concatenate([[0.0], weights[:-1]])
        prev_hops = np.concatenate([[0.0], train.hops_hz[:-1]])
        for k in range(n_chirps):
            delay = float(train.delays_s[k])
            for tail, w, hop in ((False, weights[k], train.hops_hz[k]), (True, prev_weights[k], prev_hops[k])):
                if w == 0 or (tail and delay <= 0):
                    continue
                key = (float(ref_hops[k]), float(hop), delay, float(train.freq_offset_hz), tail)
                col = columns.setdefault(key, np.zeros(n_chirps, dtype=np.complex128))
                col[k] += ref_weights[k] * np.conj(gain[k] * w)

    n_cols = cache.band.size
    spectra = np.zeros((n_chirps, n_cols), dtype=np.complex128)
    if columns:
        keys = list(columns)
        coef = np.stack([columns[key] for key in keys], axis=1)
        basis = np.stack([cache.basis(*key) for key in keys], axis=0)
        spectra = coef @ basis
    if noise_power > 0:
        if rng is None:
            raise ValueError("noise_power > 0 requires an explicit random generator")
        scale = np.abs(ref_weights) * math.sqrt(noise_power * n_samp / 2)
        noise = rng.standard_normal((n_chirps, 2 * n_cols)).view(np.complex128)
        noise *= scale[:, None]
        spectra += noise
    return spectra, cache.first_freq_hz
