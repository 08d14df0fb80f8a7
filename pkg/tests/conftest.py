import numpy as np
import pytest

from fmcwspoof.channel import ChannelParams
from fmcwspoof.engine import simulate_frame
from fmcwspoof.waveform import RadarConfig


@pytest.fixture
def radar():
    return RadarConfig()


@pytest.fixture
def short_radar():
    """Paper waveform with an 8-chirp frame, cheap enough for sample-level runs."""
    return RadarConfig(chirps_per_frame=8)


def mid_frame_channel(config, distance_m, velocity_mps, **kwargs):
    """Channel whose range at the middle of the frame is ``distance_m``.

    The victim averages the per-chirp beats, so its range estimate refers
    to the mid-frame range of a moving target.
    """
    start = distance_m - velocity_mps * (config.chirps_per_frame - 1) * config.chirp_duration_s / 2
    return ChannelParams(distance_m=start, relative_velocity_mps=velocity_mps, **kwargs)


def measure_echo(config, distance_m, velocity_mps=0.0, backend="spectral", **kwargs):
    channel = mid_frame_channel(config, distance_m, velocity_mps, path_gain=kwargs.pop("path_gain", 0.1))
    m, _ = simulate_frame(config, channel, 0.0, backend=backend, **kwargs)
    return m


def wrap(phase):
    return np.angle(np.exp(1j * np.asarray(phase)))


# Full 15-trial scenario runs are shared by the scenario and acceptance tests.
_RUNS = {}


def timed_run(name, seed=0, **overrides):
    import time

    from fmcwspoof.scenario import BUILTIN_SCENARIOS, run_scenario

    key = (name, seed, tuple(sorted(overrides.items(), key=lambda kv: kv[0])))
    if key not in _RUNS:
        spec = BUILTIN_SCENARIOS[name](**overrides)
        start = time.perf_counter()
        result = run_scenario(spec, seed)
        _RUNS[key] = (result, time.perf_counter() - start)
    return _RUNS[key]


@pytest.fixture(scope="session")
def brake_run():
    return timed_run("emergency_brake")


@pytest.fixture(scope="session")
def phantom_run():
    return timed_run("phantom_acceleration")
