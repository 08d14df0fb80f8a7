"""Multi-frame experiments: trajectories, frame scheduling, Monte Carlo trials.

A scenario samples the true and the spoofed trajectories once per
measurement interval, simulates one victim frame at each instant and
aggregates the victim's estimates across independently seeded trials.
"""

from __future__ import annotations

import dataclasses
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .attacker import AttackerState
from .channel import ChannelParams
from .countermeasures import (
    CountermeasureConfig,
    draw_hops,
    draw_phases,
    phase_consistency_alarm,
    rssi_detect,
)
from .engine import BACKENDS, simulate_frame
from .errors import ConfigurationError, NoDetectionError
from .victim import Measurement
from .waveform import RadarConfig

log = logging.getLogger(__name__)

# Scenario defaults: 20 dB SNR at the attacker (one-way) and 0 dB per-sample
# SNR for the echo at the victim, i.e. about 47 dB after the range-FFT.
DEFAULT_NOISE_POWER = 1e-4
DEFAULT_PATH_GAIN = 0.1


@dataclass(frozen=True)
class KinematicState:
    distance_m: float
    velocity_mps: float
    acceleration_mps2: float = 0.0


@dataclass(frozen=True)
class Trajectory:
    """Piecewise constant-acceleration motion starting from ``(distance_m, velocity_mps)`` at t=0.

    ``segments`` is a sequence of ``(start_s, acceleration_mps2)`` pairs with
    increasing start times, the first at 0. Position and velocity are
    continuous across segment boundaries by construction.
    """

    distance_m: float
    velocity_mps: float = 0.0
    segments: tuple[tuple[float, float], ...] = ((0.0, 0.0),)

    def __post_init__(self):
        segs = tuple((float(t), float(a)) for t, a in self.segments)
        object.__setattr__(self, "segments", segs)
        if not segs or segs[0][0] != 0.0:
            raise ConfigurationError("trajectory segments must start at t=0")
        starts = [t for t, _ in segs]
        if any(b <= a for a, b in zip(starts, starts[1:])):
            raise ConfigurationError("trajectory segment start times must increase")

    @classmethod
    def constant_acceleration(cls, distance_m, velocity_mps=0.0, acceleration_mps2=0.0):
        return cls(distance_m, velocity_mps, ((0.0, acceleration_mps2),))

    def state_at(self, t_s: float) -> KinematicState:
        d, v = float(self.distance_m), float(self.velocity_mps)
        for i, (start, accel) in enumerate(self.segments):
            end = self.segments[i + 1][0] if i + 1 < len(self.segments) else math.inf
            dt = min(t_s, end) - start
            if dt < 0:
                break
            if t_s < end:
                return KinematicState(d + v * dt + 0.5 * accel * dt * dt, v + accel * dt, accel)
            d, v = d + v * dt + 0.5 * accel * dt * dt, v + accel * dt
        raise ValueError(f"time {t_s} precedes the trajectory start")

    def sample(self, times) -> tuple[np.ndarray, np.ndarray]:
        states = [self.state_at(float(t)) for t in times]
        return (
            np.array([s.distance_m for s in states]),
            np.array([s.velocity_mps for s in states]),
        )

    def to_dict(self) -> dict:
        return {
            "distance_m": self.distance_m,
            "velocity_mps": self.velocity_mps,
            "segments": [list(s) for s in self.segments],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Trajectory":
        segments = d.get("segments", [[0.0, d.get("acceleration_mps2", 0.0)]])
        return cls(float(d["distance_m"]), float(d.get("velocity_mps", 0.0)), tuple(map(tuple, segments)))


@dataclass(frozen=True)
class ScenarioSpec:
    """Everything needed to reproduce one experiment (apart from the seed)."""

    name: str
    duration_s: float
    true_trajectory: Trajectory
    spoof_trajectory: Trajectory | None = None
    measurement_interval_s: float = 0.25
    trials: int = 15
    radar: RadarConfig = field(default_factory=RadarConfig)
    channel: ChannelParams = field(
        default_factory=lambda: ChannelParams(
            path_gain=DEFAULT_PATH_GAIN, noise_power=DEFAULT_NOISE_POWER
        )
    )
    power_margin_db: float = 20.0
    countermeasure: CountermeasureConfig = field(default_factory=CountermeasureConfig)
    backend: str = "spectral"

    def __post_init__(self):
        problems = self.violations()
        if problems:
            raise ConfigurationError("; ".join(problems))

    @property
    def n_steps(self) -> int:
        return int(math.floor(self.duration_s / self.measurement_interval_s + 1e-9)) + 1

    @property
    def times(self) -> np.ndarray:
        return self.measurement_interval_s * np.arange(self.n_steps)

    def violations(self) -> list[str]:
        radar = self.radar
        out = [f"radar: {p}" for p in radar.violations()]
        out += [f"channel: {p}" for p in self.channel.violations()]
        out += [f"countermeasure: {p}" for p in self.countermeasure.violations(radar)]
        if self.duration_s < 0:
            out.append("duration_s must be >= 0")
        if self.trials < 1:
            out.append("trials must be >= 1")
        if self.backend not in BACKENDS:
            out.append(f"backend must be one of {BACKENDS}")
        if self.measurement_interval_s < radar.frame_duration_s:
            out.append(
                f"measurement_interval_s={self.measurement_interval_s:g} shorter than a frame "
                f"(N*T_c={radar.frame_duration_s:g} s)"
            )
        if self.measurement_interval_s <= 0 or self.duration_s < 0:
            return out
        times = self.times
        vmax = (
            radar.max_unambiguous_velocity_mps
            if radar.carrier_freq_hz > 0 and radar.chirp_duration_s > 0
            else math.inf
        )
        for label, traj in (("true", self.true_trajectory), ("spoof", self.spoof_trajectory)):
            if traj is None:
                continue
            dist, vel = traj.sample(times)
            if np.any(dist < 0):
                out.append(f"{label} distance becomes negative at t={times[np.argmax(dist < 0)]:g} s")
            if np.any(np.abs(vel) >= vmax):
                out.append(
                    f"{label} velocity reaches {np.max(np.abs(vel)):.2f} m/s, beyond the "
                    f"unambiguous limit lambda/(4*T_c)={vmax:.2f} m/s"
                )
        return out

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "duration_s": self.duration_s,
            "measurement_interval_s": self.measurement_interval_s,
            "trials": self.trials,
            "backend": self.backend,
            "power_margin_db": self.power_margin_db,
            "true_trajectory": self.true_trajectory.to_dict(),
            "spoof_trajectory": None if self.spoof_trajectory is None else self.spoof_trajectory.to_dict(),
            "radar": self.radar.to_dict(),
            "channel": dataclasses.asdict(self.channel),
            "countermeasure": self.countermeasure.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict, *, check: bool = True) -> "ScenarioSpec":
        """Build a spec from a (possibly partial) mapping; missing sections take defaults.

        With ``check=False`` no invariant is enforced, so that every problem
        can be listed at once with :meth:`violations`. Type and key errors
        still raise ConfigurationError.
        """
        make = _checked if check else _unchecked
        d = dict(d)
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigurationError(f"unknown scenario keys: {sorted(unknown)}")
        try:
            kwargs = {k: d[k] for k in ("name", "duration_s") if k in d}
            for key in ("measurement_interval_s", "power_margin_db"):
                if key in d:
                    kwargs[key] = float(d[key])
            if "trials" in d:
                kwargs["trials"] = int(d["trials"])
            if "backend" in d:
                kwargs["backend"] = str(d["backend"])
            kwargs["true_trajectory"] = Trajectory.from_dict(d["true_trajectory"])
            if d.get("spoof_trajectory") is not None:
                kwargs["spoof_trajectory"] = Trajectory.from_dict(d["spoof_trajectory"])
            if d.get("radar"):
                kwargs["radar"] = make(RadarConfig, d["radar"])
            if d.get("channel"):
                base = dataclasses.asdict(ScenarioSpec.__dataclass_fields__["channel"].default_factory())
                base.update(d["channel"])
                kwargs["channel"] = make(ChannelParams, base)
            if d.get("countermeasure"):
                kwargs["countermeasure"] = make(CountermeasureConfig, d["countermeasure"])
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, ConfigurationError):
                raise
            raise ConfigurationError(f"invalid scenario description: {exc}") from exc
        kwargs.setdefault("name", "custom")
        if "duration_s" not in kwargs:
            raise ConfigurationError("scenario needs duration_s")
        kwargs["duration_s"] = float(kwargs["duration_s"])
        return make(cls, kwargs)


def _checked(cls, kwargs: dict):
    return cls(**kwargs)


def _unchecked(cls, kwargs: dict):
    """Instantiate a frozen dataclass without running ``__post_init__``."""
    fields = {f.name: f for f in dataclasses.fields(cls)}
    unknown = set(kwargs) - set(fields)
    if unknown:
        raise TypeError(f"{cls.__name__} got unexpected fields {sorted(unknown)}")
    obj = object.__new__(cls)
    for name, f in fields.items():
        if name in kwargs:
            value = kwargs[name]
        elif f.default is not dataclasses.MISSING:
            value = f.default
        elif f.default_factory is not dataclasses.MISSING:
            value = f.default_factory()
        else:
            raise TypeError(f"{cls.__name__} missing field {name!r}")
        object.__setattr__(obj, name, value)
    return obj


def emergency_brake_spec(**overrides) -> ScenarioSpec:
    """Phantom car braking at 10 m/s^2 from the true 60 m until it hits 0 m."""
    spec = ScenarioSpec(
        name="emergency_brake",
        duration_s=math.sqrt(12.0),
        true_trajectory=Trajectory.constant_acceleration(60.0, 0.0, 0.0),
        spoof_trajectory=Trajectory.constant_acceleration(60.0, 0.0, -10.0),
    )
    return dataclasses.replace(spec, **overrides)


def phantom_acceleration_spec(**overrides) -> ScenarioSpec:
    """Phantom car pulling away at 10 m/s^2 for 3.5 s."""
    spec = ScenarioSpec(
        name="phantom_acceleration",
        duration_s=3.5,
        true_trajectory=Trajectory.constant_acceleration(60.0, 0.0, 0.0),
        spoof_trajectory=Trajectory.constant_acceleration(60.0, 0.0, 10.0),
    )
    return dataclasses.replace(spec, **overrides)


def baseline_spec(**overrides) -> ScenarioSpec:
    """Same geometry as the attacks with nobody spoofing."""
    spec = ScenarioSpec(
        name="baseline",
        duration_s=3.5,
        true_trajectory=Trajectory.constant_acceleration(60.0, 0.0, 0.0),
    )
    return dataclasses.replace(spec, **overrides)


BUILTIN_SCENARIOS = {
    "emergency_brake": emergency_brake_spec,
    "phantom_acceleration": phantom_acceleration_spec,
    "baseline": baseline_spec,
}


@dataclass
class TrialSeries:
    """One trial's per-instant output; ``None`` marks a dropout."""

    measurements: list[Measurement | None]
    rssi_flags: np.ndarray
    rssi_scores: np.ndarray
    phase_alarms: np.ndarray


@dataclass
class ScenarioResult:
    """Per-trial series, targets and per-instant statistics across trials.

    Statistics ignore dropouts; ``std_*`` is the population standard
    deviation (``ddof=0``) over the surviving trials.
    """

    spec: ScenarioSpec
    seed: int
    times_s: np.ndarray
    truth_range_m: np.ndarray
    truth_velocity_mps: np.ndarray
    spoof_range_m: np.ndarray | None
    spoof_velocity_mps: np.ndarray | None
    trials: list[TrialSeries]
    range_m: np.ndarray = field(init=False)
    velocity_mps: np.ndarray = field(init=False)

    def __post_init__(self):
        shape = (len(self.trials), self.times_s.size)
        self.range_m = np.full(shape, np.nan)
        self.velocity_mps = np.full(shape, np.nan)
        for i, trial in enumerate(self.trials):
            for j, m in enumerate(trial.measurements):
                if m is not None:
                    self.range_m[i, j] = m.range_m
                    self.velocity_mps[i, j] = m.velocity_mps

    @property
    def dropout_count(self) -> np.ndarray:
        return np.count_nonzero(np.isnan(self.range_m), axis=0)

    def _stat(self, fn, values):
        out = np.full(values.shape[1], np.nan)
        ok = ~np.all(np.isnan(values), axis=0)
        out[ok] = fn(values[:, ok], axis=0)
        return out

    @property
    def mean_range_m(self) -> np.ndarray:
        return self._stat(np.nanmean, self.range_m)

    @property
    def std_range_m(self) -> np.ndarray:
        return self._stat(np.nanstd, self.range_m)

    @property
    def mean_velocity_mps(self) -> np.ndarray:
        return self._stat(np.nanmean, self.velocity_mps)

    @property
    def std_velocity_mps(self) -> np.ndarray:
        return self._stat(np.nanstd, self.velocity_mps)

    @property
    def rssi_flags(self) -> np.ndarray:
        return np.array([t.rssi_flags for t in self.trials])

    @property
    def phase_alarms(self) -> np.ndarray:
        return np.array([t.phase_alarms for t in self.trials])

    def aggregate_columns(self) -> dict[str, np.ndarray]:
        cols = {
            "time_s": self.times_s,
            "truth_range_m": self.truth_range_m,
            "truth_velocity_mps": self.truth_velocity_mps,
        }
        if self.spoof_range_m is not None:
            cols["spoof_range_m"] = self.spoof_range_m
            cols["spoof_velocity_mps"] = self.spoof_velocity_mps
        cols.update(
            mean_range_m=self.mean_range_m,
            std_range_m=self.std_range_m,
            mean_velocity_mps=self.mean_velocity_mps,
            std_velocity_mps=self.std_velocity_mps,
            dropout_count=self.dropout_count,
        )
        return cols


def trial_seed_sequence(seed: int, trial: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([int(seed), int(trial)])


def run_trial(spec: ScenarioSpec, seed: int, trial: int) -> TrialSeries:
    """Simulate every measurement instant of one trial."""
    noise_seq, victim_seq = trial_seed_sequence(seed, trial).spawn(2)
    rng = np.random.default_rng(noise_seq)
    victim_rng = np.random.default_rng(victim_seq)
    radar, cm = spec.radar, spec.countermeasure
    n_total = radar.chirps_per_frame

    attacker = None
    if spec.spoof_trajectory is not None:
        attacker = AttackerState(power_margin_db=spec.power_margin_db)

    times = spec.times
    n_steps = times.size
    measurements: list[Measurement | None] = []
    rssi_flags = np.zeros(n_steps, dtype=bool)
    rssi_scores = np.full(n_steps, np.nan)
    phase_alarms = np.zeros(n_steps, dtype=bool)
    for j, t in enumerate(times):
        truth = spec.true_trajectory.state_at(t)
        channel = dataclasses.replace(
            spec.channel, distance_m=truth.distance_m, relative_velocity_mps=truth.velocity_mps
        )
        phases = draw_phases(n_total, victim_rng, cm.phase_pool_size) if cm.randomizes_phase else None
        hops = draw_hops(n_total, cm.hop_pool_hz, victim_rng) if cm.hops else None
        if attacker is not None:
            target = spec.spoof_trajectory.state_at(t)
            attacker = attacker.retarget(target.distance_m, target.velocity_mps)
        try:
            m, attacker = simulate_frame(
                radar,
                channel,
                float(t),
                attacker=attacker,
                tx_phases=phases,
                tx_hops=hops,
                rng=rng,
                frame_index=j,
                backend=spec.backend,
            )
        except NoDetectionError as exc:
            log.info("trial %d, t=%.2f s: dropout (%s)", trial, t, exc)
            measurements.append(None)
            continue
        measurements.append(m)
        verdict = rssi_detect(m, cm, radar.sync_chirps)
        rssi_flags[j], rssi_scores[j] = verdict.flagged, verdict.score
        phase_alarms[j] = phase_consistency_alarm(m).flagged
    return TrialSeries(measurements, rssi_flags, rssi_scores, phase_alarms)


def _run_trial_args(args):
    return run_trial(*args)


def run_scenario(spec: ScenarioSpec, seed: int, *, workers: int = 1, progress=None) -> ScenarioResult:
    """Run all trials of ``spec``; identical ``(spec, seed)`` gives identical results.

    Each trial draws from its own stream seeded by ``(seed, trial)``, so the
    outcome does not depend on ``workers`` or on execution order.

    Args:
        spec: Scenario description.
        seed: Top-level seed.
        workers: Number of worker processes (1 runs in-process).
        progress: Optional callable invoked with ``(done, total)`` after each trial.
    """
    jobs = [(spec, seed, k) for k in range(spec.trials)]
    trials: list[TrialSeries] = []
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for k, series in enumerate(pool.map(_run_trial_args, jobs)):
                trials.append(series)
                if progress:
                    progress(k + 1, spec.trials)
    else:
        for k, job in enumerate(jobs):
            trials.append(run_trial(*job))
            if progress:
                progress(k + 1, spec.trials)

    times = spec.times
    truth_d, truth_v = spec.true_trajectory.sample(times)
    spoof_d = spoof_v = None
    if spec.spoof_trajectory is not None:
        spoof_d, spoof_v = spec.spoof_trajectory.sample(times)
    return ScenarioResult(spec, seed, times, truth_d, truth_v, spoof_d, spoof_v, trials)
