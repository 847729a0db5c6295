"""Exception types shared across the package."""


class UDNError(Exception):
    """Base class for all package errors."""


class ConfigError(UDNError, ValueError):
    """Invalid scenario, campaign or config-file content."""


class Infeasible(UDNError):
    """The pairing problem admits no assignment covering every UE."""


class InstanceTooLarge(UDNError):
    """Exhaustive enumeration would exceed the configured cap."""


class SolverNumericalFailure(UDNError):
    """The conic solver could not reach a reliable decision.

    Never raised for a problem that is merely infeasible.
    """


class RankDeficientLocalChannel(UDNError):
    """A local channel matrix is numerically rank deficient, so zero-forcing is undefined."""


class BracketError(UDNError):
    """The supplied SINR bracket does not enclose the optimum."""
