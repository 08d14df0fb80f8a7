"""Saw-tooth FMCW chirp synthesis at complex baseband.

Chirps sweep symmetrically from ``-B/2`` to ``+B/2`` around the carrier so
that every carrier effect can be expressed as a phase rotation in the
channel. Each chirp restarts at its commanded initial phase.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .errors import ConfigurationError

SPEED_OF_LIGHT = 299_792_458.0


@dataclass(frozen=True)
class RadarConfig:
    """Waveform and frame parameters of the victim radar.

    The slope and wavelength are derived properties, so they can never drift
    out of sync with the bandwidth, chirp duration and carrier.
    """

    carrier_freq_hz: float = 1.0e9
    bandwidth_hz: float = 28.0e6
    chirp_duration_s: float = 1.0e-3
    chirps_per_frame: int = 128
    sync_chirps: int = 2
    sample_rate_hz: float = 56.0e6
    frame_interval_s: float = 0.25
    tx_power: float = 1.0
    if_bandwidth_hz: float | None = 2.0e6

    def __post_init__(self):
        problems = self.violations()
        if problems:
            raise ConfigurationError("; ".join(problems))

    def violations(self) -> list[str]:
        """Return a human-readable list of broken invariants (empty if valid)."""
        out = []
        if self.carrier_freq_hz <= 0:
            out.append("carrier_freq_hz must be positive")
        if self.bandwidth_hz <= 0:
            out.append("bandwidth_hz must be positive")
        if self.chirp_duration_s <= 0:
            out.append("chirp_duration_s must be positive")
        if self.sample_rate_hz < 2 * self.bandwidth_hz:
            out.append(
                f"sample_rate_hz={self.sample_rate_hz:g} below Nyquist 2*B={2 * self.bandwidth_hz:g}"
            )
        if not 0 < self.sync_chirps < self.chirps_per_frame:
            out.append(
                f"need 0 < sync_chirps < chirps_per_frame, got n={self.sync_chirps}, "
                f"N={self.chirps_per_frame}"
            )
        if self.chirp_duration_s * self.chirps_per_frame > self.frame_interval_s * (1 + 1e-12):
            out.append("frame does not fit in frame_interval_s (N*T_c > interval)")
        if self.tx_power <= 0:
            out.append("tx_power must be positive")
        if self.if_bandwidth_hz is not None and not (
            0 < self.if_bandwidth_hz <= self.sample_rate_hz
        ):
            out.append("if_bandwidth_hz must lie in (0, sample_rate_hz]")
        if self.sample_rate_hz > 0 and self.chirp_duration_s > 0:
            n = self.chirp_duration_s * self.sample_rate_hz
            if abs(n - round(n)) > 1e-6 or round(n) < 64:
                out.append("chirp_duration_s * sample_rate_hz must be an integer >= 64")
        return out

    @property
    def slope_hz_per_s(self) -> float:
        return self.bandwidth_hz / self.chirp_duration_s

    @property
    def wavelength_m(self) -> float:
        return SPEED_OF_LIGHT / self.carrier_freq_hz

    @property
    def samples_per_chirp(self) -> int:
        return int(round(self.chirp_duration_s * self.sample_rate_hz))

    @property
    def frame_duration_s(self) -> float:
        return self.chirp_duration_s * self.chirps_per_frame

    @property
    def range_resolution_m(self) -> float:
        return SPEED_OF_LIGHT / (2 * self.bandwidth_hz)

    @property
    def max_unambiguous_velocity_mps(self) -> float:
        return self.wavelength_m / (4 * self.chirp_duration_s)

    def range_to_beat(self, range_m):
        return 2 * self.slope_hz_per_s * np.asarray(range_m) / SPEED_OF_LIGHT

    def beat_to_range(self, beat_hz):
        return SPEED_OF_LIGHT * np.asarray(beat_hz) / (2 * self.slope_hz_per_s)

    def velocity_to_phase_step(self, velocity_mps):
        """Adjacent-chirp IF phase increment produced by a radial velocity."""
        return 4 * math.pi * np.asarray(velocity_mps) * self.chirp_duration_s / self.wavelength_m

    def phase_step_to_velocity(self, phase_rad):
        return self.wavelength_m * np.asarray(phase_rad) / (4 * math.pi * self.chirp_duration_s)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class ComplexSignal:
    """A block of complex baseband samples anchored in absolute simulation time."""

    samples: np.ndarray
    sample_rate_hz: float
    start_time_s: float = 0.0
    metadata: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.complex128)
        if samples.ndim != 1 or samples.size == 0:
            raise ValueError("ComplexSignal needs a non-empty 1-D sample array")
        if self.sample_rate_hz <= 0:
            raise ValueError("sample_rate_hz must be positive")
        object.__setattr__(self, "samples", samples)

    def __len__(self) -> int:
        return self.samples.size

    @property
    def duration_s(self) -> float:
        return self.samples.size / self.sample_rate_hz

    @property
    def end_time_s(self) -> float:
        return self.start_time_s + self.duration_s

    def times(self) -> np.ndarray:
        return self.start_time_s + np.arange(self.samples.size) / self.sample_rate_hz

    def replace(self, samples=None, start_time_s=None) -> "ComplexSignal":
        return ComplexSignal(
            self.samples if samples is None else samples,
            self.sample_rate_hz,
            self.start_time_s if start_time_s is None else start_time_s,
            self.metadata,
        )

    def windows(self, length: int) -> np.ndarray:
        """View the signal as consecutive windows of ``length`` samples."""
        if self.samples.size % length:
            raise ValueError(f"signal length {self.samples.size} is not a multiple of {length}")
        return self.samples.reshape(-1, length)


def chirp_waveform(config: RadarConfig, t, hop_offset_hz=0.0) -> np.ndarray:
    """Evaluate the zero-phase unit chirp at arbitrary times ``t`` (seconds).

    Times outside ``[0, T_c)`` evaluate to zero, which lets callers place
    chirps at fractional-sample offsets analytically.
    """
    t = np.asarray(t, dtype=float)
    half_bw = config.bandwidth_hz / 2
    phase = 2 * np.pi * ((hop_offset_hz - half_bw) * t + 0.5 * config.slope_hz_per_s * t * t)
    out = np.exp(1j * phase)
    out[(t < 0) | (t >= config.chirp_duration_s)] = 0
    return out


def generate_chirp(
    config: RadarConfig,
    initial_phase_rad: float = 0.0,
    *,
    hop_offset_hz: float = 0.0,
    start_time_s: float = 0.0,
) -> ComplexSignal:
    """Synthesize one constant-envelope chirp.

    Sample ``k`` carries phase ``phi0 + 2*pi*(-B/2*t + S/2*t**2)`` with
    ``t = k/f_s`` (plus ``2*pi*hop*t`` when a hop offset is requested).

    Args:
        config: Radar parameters.
        initial_phase_rad: Commanded phase of the first sample.
        hop_offset_hz: Shift of the sweep centre, used by frequency hopping.
        start_time_s: Absolute time of the first sample.

    Returns:
        ComplexSignal holding ``T_c * f_s`` samples.
    """
    if abs(hop_offset_hz) + config.bandwidth_hz / 2 > config.sample_rate_hz / 2:
        raise ConfigurationError("hop offset pushes the sweep outside the Nyquist band")
    t = np.arange(config.samples_per_chirp) / config.sample_rate_hz
    samples = config.tx_power * np.exp(1j * initial_phase_rad) * chirp_waveform(config, t, hop_offset_hz)
    return ComplexSignal(samples, config.sample_rate_hz, start_time_s)


def generate_frame(
    config: RadarConfig,
    phases_rad: Sequence[float] | None = None,
    *,
    hop_offsets_hz: Sequence[float] | None = None,
    start_time_s: float = 0.0,
) -> ComplexSignal:
    """Concatenate ``N`` chirps, chirp ``i`` starting at ``i*T_c`` with phase ``phases_rad[i]``."""
    n_chirps = config.chirps_per_frame
    phases = np.zeros(n_chirps) if phases_rad is None else np.asarray(phases_rad, dtype=float)
    hops = np.zeros(n_chirps) if hop_offsets_hz is None else np.asarray(hop_offsets_hz, dtype=float)
    if phases.shape != (n_chirps,):
        raise ValueError(f"expected {n_chirps} chirp phases, got {phases.size}")
    if hops.shape != (n_chirps,):
        raise ValueError(f"expected {n_chirps} hop offsets, got {hops.size}")
    if np.any(np.abs(hops) + config.bandwidth_hz / 2 > config.sample_rate_hz / 2):
        raise ConfigurationError("hop offset pushes the sweep outside the Nyquist band")

    n_samp = config.samples_per_chirp
    t = np.arange(n_samp) / config.sample_rate_hz
    frame = np.empty((n_chirps, n_samp), dtype=np.complex128)
    base = chirp_waveform(config, t)
    for hop in np.unique(hops):
        rows = hops == hop
        template = base if hop == 0 else chirp_waveform(config, t, hop)
        frame[rows] = template
    frame *= (config.tx_power * np.exp(1j * phases))[:, None]
    return ComplexSignal(frame.ravel(), config.sample_rate_hz, start_time_s)
