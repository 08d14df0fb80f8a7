"""Exception hierarchy shared by all simulator modules."""


class SimulationError(Exception):
    """Base class for every error raised by the simulator."""


class ConfigurationError(SimulationError, ValueError):
    """A radar or scenario configuration violates one of its invariants."""


class ChannelError(SimulationError):
    """A propagation request cannot be honoured (e.g. delay longer than the signal)."""


class NoDetectionError(SimulationError):
    """No spectral peak rose above the detection threshold."""


class SyncFailureError(SimulationError):
    """The attacker could not find the victim's chirp onset."""


class InsufficientDataError(SimulationError):
    """Too few IF snapshots to estimate the inter-chirp drift."""


class ProtocolError(SimulationError):
    """An attacker operation was invoked out of order (e.g. before sync)."""


class InfeasibleSpoofError(SimulationError):
    """The requested phantom range cannot be produced causally."""
