from enum import IntEnum
from typing import Optional


class ExitStatus(IntEnum):
    OK = 0
    SIMULATION_ERROR = 1
    CONFIG_ERROR = 2
    IO_ERROR = 3
    SELFCHECK_FAILED = 4


class SimulationError(Exception):
    """Base error raised by the simulator; carries the CLI exit status"""

    exit_code: ExitStatus = ExitStatus.SIMULATION_ERROR

    def __init__(self, detail: str):
        super().__init__(detail)
        self.detail = detail


class InvalidParameterError(SimulationError, ValueError):
    """A parameter violates the operation's precondition"""


class DegenerateChannelError(SimulationError):
    """The channel carries no energy (all-zero vector)"""


class IllConditionedChannelError(SimulationError):
    """Tag and reader channels are too close to collinear for zero forcing"""

    def __init__(self, detail: str, condition_number: float):
        super().__init__(detail)
        self.condition_number = condition_number


class OutOfModelRangeError(SimulationError, ValueError):
    """Distance outside the far-field validity of the Friis model"""


class UnsupportedModulationError(SimulationError):
    """Closed-form ΔSNR requested for non-default modulation factors"""


class ConfigError(SimulationError):
    exit_code = ExitStatus.CONFIG_ERROR


class ArtifactIOError(SimulationError):
    exit_code = ExitStatus.IO_ERROR

    def __init__(self, detail: str, path: Optional[str] = None):
        super().__init__(detail)
        self.path = path
