import math

import numpy as np
import pytest

from fmcwspoof.channel import ChannelParams
from fmcwspoof.countermeasures import CountermeasureConfig
from fmcwspoof.errors import ConfigurationError
from fmcwspoof.scenario import (
    ScenarioSpec,
    Trajectory,
    baseline_spec,
    emergency_brake_spec,
    phantom_acceleration_spec,
    run_scenario,
    run_trial,
)
from fmcwspoof.waveform import RadarConfig

QUIET = ChannelParams(path_gain=0.1, noise_power=0.0)


class TestTrajectory:
    def test_constant_acceleration(self):
        traj = Trajectory.constant_acceleration(60.0, 2.0, -4.0)
        s = traj.state_at(1.5)
        assert s.distance_m == pytest.approx(60 + 3 - 4.5)
        assert s.velocity_mps == pytest.approx(2 - 6)

    def test_segments_are_continuous(self):
        traj = Trajectory(10.0, 0.0, ((0.0, 2.0), (1.0, -2.0), (3.0, 0.0)))
        eps = 1e-9
        for boundary in (1.0, 3.0):
            a, b = traj.state_at(boundary - eps), traj.state_at(boundary)
            assert b.distance_m == pytest.approx(a.distance_m, abs=1e-6)
            assert b.velocity_mps == pytest.approx(a.velocity_mps, abs=1e-6)
        assert traj.state_at(2.0).velocity_mps == pytest.approx(0.0)
        assert traj.state_at(5.0).velocity_mps == pytest.approx(-2.0)

    def test_bad_segments(self):
        with pytest.raises(ConfigurationError):
            Trajectory(1.0, 0.0, ((0.5, 1.0),))
        with pytest.raises(ConfigurationError):
            Trajectory(1.0, 0.0, ((0.0, 1.0), (0.0, 2.0)))

    def test_dict_round_trip(self):
        traj = Trajectory(10.0, 1.0, ((0.0, 2.0), (1.0, -2.0)))
        assert Trajectory.from_dict(traj.to_dict()) == traj


class TestBuiltins:
    def test_emergency_brake(self):
        spec = emergency_brake_spec()
        spoof = spec.spoof_trajectory
        assert spoof.state_at(1.0).distance_m == pytest.approx(55.0)
        assert spoof.state_at(3.0).velocity_mps == pytest.approx(-30.0)
        assert spec.duration_s == pytest.approx(math.sqrt(12))
        assert spec.duration_s == pytest.approx(3.5, abs=0.05)
        assert spoof.state_at(spec.duration_s).distance_m == pytest.approx(0.0, abs=1e-9)
        assert spec.true_trajectory.state_at(2.0).distance_m == 60.0
        assert spec.trials == 15 and spec.measurement_interval_s == 0.25
        assert spec.n_steps == 14

    def test_phantom_acceleration(self):
        spec = phantom_acceleration_spec()
        spoof = spec.spoof_trajectory
        s = spoof.state_at(2.0)
        assert (s.distance_m, s.velocity_mps) == pytest.approx((80.0, 20.0))
        s0 = spoof.state_at(0.0)
        t0 = spec.true_trajectory.state_at(0.0)
        assert (s0.distance_m, s0.velocity_mps) == (t0.distance_m, t0.velocity_mps)
        assert spoof.state_at(3.5).distance_m == pytest.approx(121.25)
        assert spec.n_steps == 15

    def test_series_length(self):
        for spec in (emergency_brake_spec(), phantom_acceleration_spec(), baseline_spec()):
            assert spec.times.size == math.floor(spec.duration_s / spec.measurement_interval_s) + 1


class TestSpecValidation:
    def test_interval_shorter_than_frame(self):
        with pytest.raises(ConfigurationError, match="shorter than a frame"):
            baseline_spec(measurement_interval_s=0.1)

    def test_trials(self):
        with pytest.raises(ConfigurationError):
            baseline_spec(trials=0)

    def test_unrepresentable_spoof(self):
        slow = RadarConfig(chirp_duration_s=4e-3, chirps_per_frame=32, sample_rate_hz=56e6)
        assert slow.max_unambiguous_velocity_mps < 33.3
        with pytest.raises(ConfigurationError, match="unambiguous"):
            emergency_brake_spec(radar=slow)

    def test_negative_distance(self):
        with pytest.raises(ConfigurationError, match="negative"):
            emergency_brake_spec(duration_s=4.0)

    def test_dict_round_trip(self):
        spec = emergency_brake_spec(countermeasure=CountermeasureConfig(mode="combined"), trials=3)
        assert ScenarioSpec.from_dict(spec.to_dict()) == spec

    def test_partial_dict(self):
        spec = ScenarioSpec.from_dict({"duration_s": 1.0, "true_trajectory": {"distance_m": 30.0}})
        assert spec.radar == RadarConfig()
        assert spec.channel.noise_power > 0

    def test_unknown_key(self):
        with pytest.raises(ConfigurationError, match="unknown"):
            ScenarioSpec.from_dict({"duration_s": 1.0, "true_trajectory": {"distance_m": 1}, "speed": 3})

    def test_unchecked_lists_everything(self):
        doc = baseline_spec().to_dict()
        doc["trials"] = 0
        doc["radar"] = dict(doc["radar"], sync_chirps=128)
        spec = ScenarioSpec.from_dict(doc, check=False)
        problems = spec.violations()
        assert any("trials" in p for p in problems)
        assert any("sync_chirps" in p for p in problems)


class TestRun:
    def test_noiseless_baseline(self):
        result = run_scenario(baseline_spec(trials=2, duration_s=1.0, channel=QUIET), seed=1)
        bin_m = result.spec.radar.range_resolution_m
        assert np.all(np.abs(result.range_m - 60.0) <= bin_m)
        assert np.all(np.abs(result.velocity_mps) <= 0.05)
        assert result.spoof_range_m is None

    @pytest.mark.slow
    def test_aggregation_matches_recompute(self, brake_run):
        result, _ = brake_run
        for j in range(result.times_s.size):
            ranges = [t.measurements[j].range_m for t in result.trials if t.measurements[j] is not None]
            vels = [t.measurements[j].velocity_mps for t in result.trials if t.measurements[j] is not None]
            assert result.mean_range_m[j] == pytest.approx(sum(ranges) / len(ranges), rel=1e-12)
            assert result.mean_velocity_mps[j] == pytest.approx(sum(vels) / len(vels), rel=1e-12, abs=1e-12)
            mu = sum(ranges) / len(ranges)
            std = math.sqrt(sum((r - mu) ** 2 for r in ranges) / len(ranges))
            assert result.std_range_m[j] == pytest.approx(std, rel=1e-9, abs=1e-12)

    @pytest.mark.slow
    def test_dropout_bound(self, brake_run, phantom_run):
        for result, _ in (brake_run, phantom_run):
            assert result.dropout_count.sum() <= 0.01 * result.range_m.size

    def test_determinism(self):
        spec = emergency_brake_spec(trials=2, duration_s=0.5)
        a = run_scenario(spec, 9)
        b = run_scenario(spec, 9)
        assert np.array_equal(a.range_m, b.range_m)
        assert np.array_equal(a.velocity_mps, b.velocity_mps)
        c = run_scenario(spec, 10)
        assert not np.array_equal(a.range_m, c.range_m)

    def test_workers_do_not_change_results(self):
        spec = emergency_brake_spec(trials=2, duration_s=0.5)
        assert np.array_equal(run_scenario(spec, 3).range_m, run_scenario(spec, 3, workers=2).range_m)

    def test_trial_streams_are_independent(self):
        spec = emergency_brake_spec(trials=3, duration_s=0.25)
        full = run_scenario(spec, 4)
        alone = run_trial(spec, 4, 2)
        assert alone.measurements[1].range_m == full.trials[2].measurements[1].range_m

    def test_dropouts_are_recorded(self):
        noisy = ChannelParams(path_gain=0.1, noise_power=3.0)
        result = run_scenario(baseline_spec(trials=2, duration_s=0.25, channel=noisy), seed=0)
        assert result.dropout_count.tolist() == [2, 2]
        assert np.all(np.isnan(result.mean_range_m))
        assert all(m is None for t in result.trials for m in t.measurements)

    def test_progress_callback(self):
        seen = []
        run_scenario(baseline_spec(trials=2, duration_s=0.0), 0, progress=lambda d, n: seen.append((d, n)))
        assert seen == [(1, 2), (2, 2)]

    @pytest.mark.slow
    def test_aggregate_columns(self, brake_run):
        cols = brake_run[0].aggregate_columns()
        assert list(cols) == [
            "time_s",
            "truth_range_m",
            "truth_velocity_mps",
            "spoof_range_m",
            "spoof_velocity_mps",
            "mean_range_m",
            "std_range_m",
            "mean_velocity_mps",
            "std_velocity_mps",
            "dropout_count",
        ]
        base = run_scenario(baseline_spec(trials=1, duration_s=0.0), 0).aggregate_columns()
        assert "spoof_range_m" not in base
