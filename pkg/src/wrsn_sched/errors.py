from typing import Optional


class WrsnError(Exception):
    pass


class InstanceError(WrsnError):
    pass


class InstanceValidationError(InstanceError):
    pass


class InstanceParseError(InstanceError):
    def __init__(self, message: str, line: Optional[int] = None, field: Optional[str] = None):
        self.line = line
        self.field = field
        where = ""
        if line is not None:
            where += f"line {line}"
        if field:
            where += f"{', ' if where else ''}field '{field}'"
        super().__init__(f"{where}: {message}" if where else message)


class InfeasibleDeploymentError(InstanceError):
    pass


class GeometryError(WrsnError):
    pass


class ScheduleError(WrsnError):
    pass


class SolverError(WrsnError):
    pass


class InstanceTooLargeError(SolverError):
    pass


class InfeasibleScheduleError(SolverError):
    pass


class SolverMemoryError(SolverError):
    pass


class TrainingError(WrsnError):
    pass


class TrainingDivergedError(TrainingError):
    pass


class CheckpointError(WrsnError):
    pass


class ConfigError(WrsnError):
    pass


class SchedulerError(WrsnError):
    pass
