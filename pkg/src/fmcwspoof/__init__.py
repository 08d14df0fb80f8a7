"""Complex-baseband simulator of FMCW radar range and velocity spoofing."""

from .attacker import AttackerState, run_attack_frame, synthesize_spoof_frame, sync_toa
from .channel import ChannelParams, mix_signals, propagate_echo, propagate_one_way
from .countermeasures import (
    CountermeasureConfig,
    frequency_hopped_frame,
    phase_consistency_alarm,
    phase_randomized_frame,
    rssi_detect,
)
from .engine import simulate_frame
from .errors import (
    ChannelError,
    ConfigurationError,
    InfeasibleSpoofError,
    InsufficientDataError,
    NoDetectionError,
    ProtocolError,
    SimulationError,
    SyncFailureError,
)
from .scenario import (
    KinematicState,
    ScenarioResult,
    ScenarioSpec,
    Trajectory,
    baseline_spec,
    emergency_brake_spec,
    phantom_acceleration_spec,
    run_scenario,
)
from .victim import Measurement, dechirp, estimate_beat, process_frame, rssi_profile
from .waveform import SPEED_OF_LIGHT, ComplexSignal, RadarConfig, generate_chirp, generate_frame

__version__ = "0.1.0"

__all__ = [
    "AttackerState",
    "ChannelError",
    "ChannelParams",
    "ComplexSignal",
    "ConfigurationError",
    "CountermeasureConfig",
    "InfeasibleSpoofError",
    "InsufficientDataError",
    "KinematicState",
    "Measurement",
    "NoDetectionError",
    "ProtocolError",
    "RadarConfig",
    "SPEED_OF_LIGHT",
    "ScenarioResult",
    "ScenarioSpec",
    "SimulationError",
    "SyncFailureError",
    "Trajectory",
    "baseline_spec",
    "dechirp",
    "emergency_brake_spec",
    "estimate_beat",
    "frequency_hopped_frame",
    "generate_chirp",
    "generate_frame",
    "mix_signals",
    "phantom_acceleration_spec",
    "phase_consistency_alarm",
    "phase_randomized_frame",
    "process_frame",
    "propagate_echo",
    "propagate_one_way",
    "rssi_detect",
    "rssi_profile",
    "run_attack_frame",
    "run_scenario",
    "simulate_frame",
    "sync_toa",
    "synthesize_spoof_frame",
]
