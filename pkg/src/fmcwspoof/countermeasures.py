"""Victim-side defenses: per-chirp phase randomization, frequency hopping, RSSI checks.

The victim always knows its own random sequences. It dechirps every chirp
against the chirp it actually transmitted, so a random initial phase or a
hop cancels for legitimate echoes. The attacker only sees the first ``n``
chirps and cannot predict the rest.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import ConfigurationError
from .victim import Measurement, rssi_profile
from .waveform import ComplexSignal, RadarConfig, generate_frame

MODES = ("none", "phase_random", "freq_hop", "rssi_detect", "combined")

# Circular variance of the adjacent-chirp phase steps above which a frame is
# considered incoherent (a clean echo sits near 0, random steps near 1).
PHASE_ALARM_CIRCVAR = 0.5


def default_hop_pool(span_hz: float = 2.0e6, size: int = 8) -> tuple[float, ...]:
    return tuple(float(h) for h in np.linspace(-span_hz, span_hz, size))


@dataclass(frozen=True)
class CountermeasureConfig:
    """Which defenses the victim runs and how they are parameterized.

    Attributes:
        mode: One of ``none``, ``phase_random``, ``freq_hop``,
            ``rssi_detect`` or ``combined`` (all three).
        phase_pool_size: Number of equally spaced phases the random initial
            phase is drawn from.
        hop_pool_hz: Sweep-centre offsets a hopped chirp is drawn from.
        rssi_pattern_threshold_db: Prefix-to-rest RSSI gap that flags a frame.
        rssi_prefix_length: Length of the weak prefix to test; ``None``
            means the radar's ``sync_chirps``.
    """

    mode: str = "none"
    phase_pool_size: int = 64
    hop_pool_hz: tuple[float, ...] = field(default_factory=default_hop_pool)
    rssi_pattern_threshold_db: float = 10.0
    rssi_prefix_length: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "hop_pool_hz", tuple(float(h) for h in self.hop_pool_hz))
        problems = self.violations()
        if problems:
            raise ConfigurationError("; ".join(problems))

    def violations(self, radar: RadarConfig | None = None) -> list[str]:
        out = []
        if self.mode not in MODES:
            out.append(f"unknown countermeasure mode {self.mode!r}; expected one of {MODES}")
        if self.phase_pool_size < 2:
            out.append("phase_pool_size must be >= 2")
        if len(set(self.hop_pool_hz)) < 2:
            out.append("hop_pool_hz needs at least 2 distinct offsets")
        if self.rssi_prefix_length is not None and self.rssi_prefix_length < 1:
            out.append("rssi_prefix_length must be >= 1")
        if radar is not None:
            edge = max(abs(h) for h in self.hop_pool_hz) + radar.bandwidth_hz / 2
            if edge > radar.sample_rate_hz / 2:
                out.append(
                    f"hop offsets push the sweep to {edge:g} Hz, beyond f_s/2={radar.sample_rate_hz / 2:g} Hz"
                )
            if self.rssi_prefix_length is not None and self.rssi_prefix_length >= radar.chirps_per_frame:
                out.append("rssi_prefix_length must be < chirps_per_frame")
        return out

    @property
    def randomizes_phase(self) -> bool:
        return self.mode in ("phase_random", "combined")

    @property
    def hops(self) -> bool:
        return self.mode in ("freq_hop", "combined")

    @property
    def checks_rssi(self) -> bool:
        return self.mode in ("rssi_detect", "combined")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["hop_pool_hz"] = list(self.hop_pool_hz)
        return d


def draw_phases(n_chirps: int, rng: np.random.Generator, pool_size: int | None = None) -> np.ndarray:
    """Independent uniform initial phases, from ``pool_size`` equally spaced values.

    ``pool_size=None`` draws from the continuous interval ``[0, 2*pi)``.
    """
    if pool_size is None:
        return rng.uniform(0.0, 2 * np.pi, n_chirps)
    if pool_size < 1:
        raise ValueError("pool_size must be >= 1")
    pool = 2 * np.pi * np.arange(pool_size) / pool_size
    return pool[rng.integers(0, pool_size, n_chirps)]


def draw_hops(n_chirps: int, hop_pool_hz, rng: np.random.Generator) -> np.ndarray:
    pool = np.asarray(hop_pool_hz, dtype=float)
    if pool.size == 0:
        raise ValueError("hop pool is empty")
    return pool[rng.integers(0, pool.size, n_chirps)]


def phase_randomized_frame(
    config: RadarConfig, seed, pool_size: int | None = None
) -> tuple[ComplexSignal, np.ndarray]:
    """A frame whose chirps carry random initial phases known only to the victim.

    Args:
        config: Radar parameters.
        seed: Integer seed or ``numpy.random.Generator``.
        pool_size: Number of equally spaced candidate phases. ``1`` pins every
            chirp to phase 0, which disables the defense.

    Returns:
        ``(frame, phases_rad)``.
    """
    rng = np.random.default_rng(seed)
    phases = draw_phases(config.chirps_per_frame, rng, pool_size)
    return generate_frame(config, phases), phases


def frequency_hopped_frame(
    config: RadarConfig, hop_pool_hz, seed
) -> tuple[ComplexSignal, np.ndarray]:
    """A frame whose chirps are centred on offsets drawn from ``hop_pool_hz``.

    Returns:
        ``(frame, hop_sequence_hz)``.

    Raises:
        ConfigurationError: if a hop pushes the sweep past the Nyquist band.
    """
    rng = np.random.default_rng(seed)
    hops = draw_hops(config.chirps_per_frame, hop_pool_hz, rng)
    return generate_frame(config, hop_offsets_hz=hops), hops


@dataclass(frozen=True)
class Verdict:
    flagged: bool
    score: float


def rssi_detect(measurement: Measurement, config: CountermeasureConfig, sync_chirps: int = 2) -> Verdict:
    """Look for a weak prefix followed by hot chirps in the per-chirp RSSI.

    The score is the gap in dB between the median RSSI of the remaining
    chirps and that of the first ``rssi_prefix_length`` chirps; the frame is
    flagged when the gap exceeds ``rssi_pattern_threshold_db``.
    """
    prefix = config.rssi_prefix_length or sync_chirps
    profile = rssi_profile(measurement)
    if not 0 < prefix < profile.size:
        raise ValueError(f"prefix length {prefix} incompatible with {profile.size} chirps")
    score = float(np.median(profile[prefix:]) - np.median(profile[:prefix]))
    return Verdict(score > config.rssi_pattern_threshold_db, score)


def phase_consistency_alarm(measurement: Measurement, threshold: float = PHASE_ALARM_CIRCVAR) -> Verdict:
    """Flag frames whose adjacent-chirp phase steps do not agree with each other.

    After the victim removes its own random phases, a physical target yields
    a nearly constant step. An attacker that cannot predict the phases
    leaves steps spread around the circle.
    """
    score = float(measurement.phase_step_circvar)
    return Verdict(score > threshold, score)
