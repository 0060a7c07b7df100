"""Exception types shared across the solvers and the energy pipeline."""


class FleetOptError(Exception):
    """Base class for all package errors."""


class InstanceParseError(FleetOptError):
    pass


class InstanceValidationError(FleetOptError):
    pass


class MissingDeadheadError(FleetOptError, KeyError):
    def __init__(self, origin: str, destination: str):
        self.origin = origin
        self.destination = destination
        super().__init__(f"missing deadhead entry for ({origin!r}, {destination!r})")

    def __str__(self) -> str:
        return self.args[0]


class InfeasibleError(FleetOptError):
    """Raised by a solver that cannot produce a complete feasible solution."""

    def __init__(self, message: str, trip: str | None = None):
        self.trip = trip
        super().__init__(message)


class ChargingRepairFailed(FleetOptError):
    def __init__(self, vehicle: str):
        self.vehicle = vehicle
        super().__init__(f"no charging insertion clears the battery floor for {vehicle!r}")


class NeighborExhausted(FleetOptError):
    pass


class TimeLimitError(FleetOptError):
    pass


class ModelTooLarge(FleetOptError):
    pass


class PipelineError(FleetOptError):
    pass


class EmptyAfterFilter(PipelineError):
    pass


class NonMonotonicTimestamps(PipelineError):
    pass


class DegenerateNetwork(PipelineError):
    pass


class FeatureJoinGap(PipelineError):
    pass


class InsufficientSamples(PipelineError):
    pass


class EncodingMismatch(PipelineError):
    pass
