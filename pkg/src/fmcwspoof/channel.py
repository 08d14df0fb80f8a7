"""Propagation between the radars: delay, carrier rotation, gain, drift and noise.

Delays are realised with a frequency-domain phase ramp, so sub-sample
delays are exact for band-limited content. The delay is held constant
inside each chirp window and re-evaluated at every window start.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import fft as sp_fft

from .errors import ChannelError, ConfigurationError
from .waveform import SPEED_OF_LIGHT, ComplexSignal, RadarConfig

_GUARD = 64


@dataclass(frozen=True)
class ChannelParams:
    """Geometry and impairments of the path between victim and attacker.

    ``distance_m`` is the range at the start time of the signal being
    propagated; it then evolves linearly with ``relative_velocity_mps``.
    ``path_gain`` is the linear amplitude factor of one traversal.
    """

    distance_m: float = 60.0
    relative_velocity_mps: float = 0.0
    path_gain: float = 0.1
    noise_power: float = 0.0
    oscillator_offset_hz: float = 0.0

    def __post_init__(self):
        problems = self.violations()
        if problems:
            raise ConfigurationError("; ".join(problems))

    def violations(self) -> list[str]:
        out = []
        if self.distance_m < 0:
            out.append("distance_m must be >= 0")
        if self.path_gain < 0:
            out.append("path_gain must be >= 0")
        if self.noise_power < 0:
            out.append("noise_power must be >= 0")
        return out

    @property
    def round_trip_delay_s(self) -> float:
        return 2 * self.distance_m / SPEED_OF_LIGHT

    @property
    def one_way_delay_s(self) -> float:
        return self.distance_m / SPEED_OF_LIGHT

    def distance_at(self, t_rel_s):
        return self.distance_m + self.relative_velocity_mps * np.asarray(t_rel_s)



def fractional_delay(samples: np.ndarray, delay_samples: float) -> np.ndarray:
    """Delay ``samples`` by a possibly fractional, possibly negative number of samples.

    The output has the input's length: content shifted past the end is
    dropped, and the vacated region holds the band-limited interpolant
    (zeros up to ringing).
    """
    x = np.asarray(samples, dtype=np.complex128)
    if delay_samples == 0:
        return x.copy()
    n = x.size
    shift = int(math.ceil(abs(delay_samples)))
    lead = _GUARD + (shift if delay_samples < 0 else 0)
    size = sp_fft.next_fast_len(n + shift + 2 * _GUARD, real=False)
    buf = np.zeros(size, dtype=np.complex128)
    buf[lead : lead + n] = x
    spectrum = sp_fft.fft(buf)
    spectrum *= np.exp(-2j * np.pi * sp_fft.fftfreq(size) * delay_samples)
    return sp_fft.ifft(spectrum)[lead : lead + n]


def complex_noise(rng: np.random.Generator, size: int, power: float) -> np.ndarray:
    """Circular complex Gaussian noise with variance ``power`` per sample."""
    draws = rng.standard_normal(2 * size)
    return math.sqrt(power / 2) * draws.view(np.complex128)


def _propagate(tx, params, config, *, round_trip, apply_drift, rng):
    fs = tx.sample_rate_hz
    n_win = config.samples_per_chirp
    x = tx.samples
    n = x.size
    n_windows = -(-n // n_win)
    t_rel = np.arange(n_windows) * config.chirp_duration_s
    dist = params.distance_at(t_rel)
    if np.any(dist < 0):
        raise ChannelError("target passes through zero range inside the signal")
    factor = 2.0 if round_trip else 1.0
    delays = factor * dist / SPEED_OF_LIGHT
    if delays.max() >= tx.duration_s:
        raise ChannelError(
            f"delay {delays.max():.3e} s is not shorter than the signal ({tx.duration_s:.3e} s)"
        )

    out = np.empty(n, dtype=np.complex128)
    reach = int(math.ceil(delays.max() * fs / n_win)) if delays.max() > 0 else 0
    start = 0
    while start < n_windows:
        stop = start + 1
        while stop < n_windows and delays[stop] == delays[start]:
            stop += 1
        lo = max(0, (start - reach) * n_win)
        hi = min(n, stop * n_win)
        seg = fractional_delay(x[lo:hi], delays[start] * fs)
        out[start * n_win : hi] = seg[start * n_win - lo :]
        start = stop

    rotation = params.path_gain**factor * np.exp(-2j * np.pi * config.carrier_freq_hz * delays)
    per_sample = np.repeat(rotation, n_win)[:n]
    out *= per_sample
    if apply_drift and params.oscillator_offset_hz:
        out *= np.exp(2j * np.pi * params.oscillator_offset_hz * tx.times())
    if params.noise_power > 0:
        if rng is None:
            raise ValueError("noise_power > 0 requires an explicit random generator")
        out += complex_noise(rng, n, params.noise_power)
    return tx.replace(samples=out)


def propagate_echo(
    tx: ComplexSignal,
    params: ChannelParams,
    config: RadarConfig,
    rng: np.random.Generator | None = None,
) -> ComplexSignal:
    """Reflect ``tx`` off a target: round-trip delay, ``gain**2``, carrier rotation, noise.

    Within chirp window ``k`` the delay is ``2*(d + v*k*T_c)/c`` and the
    carrier rotation ``exp(-j*2*pi*f_c*delay)``, so adjacent chirps advance
    by ``4*pi*v*T_c/lambda`` after dechirping.
    """
    return _propagate(tx, params, config, round_trip=True, apply_drift=False, rng=rng)


def propagate_one_way(
    tx: ComplexSignal,
    params: ChannelParams,
    config: RadarConfig,
    apply_drift: bool = True,
    rng: np.random.Generator | None = None,
) -> ComplexSignal:
    """One traversal between the radars (``d/c`` delay, single ``path_gain``).

    With ``apply_drift`` the samples are additionally rotated by
    ``exp(j*2*pi*oscillator_offset_hz*t)`` with ``t`` the absolute sample
    time. The same rotation is used in both directions (reciprocal drift).
    """
    return _propagate(tx, params, config, round_trip=False, apply_drift=apply_drift, rng=rng)


def mix_signals(a: ComplexSignal, b: ComplexSignal) -> ComplexSignal:
    """Superpose two signals on the union of their time supports."""
    if a.sample_rate_hz != b.sample_rate_hz:
        raise ValueError("cannot mix signals with different sample rates")
    fs = a.sample_rate_hz
    offset = (b.start_time_s - a.start_time_s) * fs
    shift = int(round(offset))
    if abs(offset - shift) > 1e-6:
        raise ValueError("signals are not aligned on a common sample grid")
    first = min(0, shift)
    last = max(a.samples.size, shift + b.samples.size)
    out = np.zeros(last - first, dtype=np.complex128)
    out[-first : -first + a.samples.size] += a.samples
    out[shift - first : shift - first + b.samples.size] += b.samples
    return ComplexSignal(out, fs, a.start_time_s + first / fs)


def crop(signal: ComplexSignal, start_time_s: float, n_samples: int) -> ComplexSignal:
    """Extract ``n_samples`` starting at ``start_time_s``, zero-filling outside the support."""
    fs = signal.sample_rate_hz
    offset = (start_time_s - signal.start_time_s) * fs
    shift = int(round(offset))
    if abs(offset - shift) > 1e-6:
        raise ValueError("crop start is not on the signal's sample grid")
    out = np.zeros(n_samples, dtype=np.complex128)
    lo = max(shift, 0)
    hi = min(shift + n_samples, signal.samples.size)
    if hi > lo:
        out[lo - shift : hi - shift] = signal.samples[lo:hi]
    return ComplexSignal(out, fs, start_time_s)
