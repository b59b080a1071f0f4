"""Exception hierarchy shared by every module of the package."""


class FedOpenMaxError(Exception):
    """Base class for all package errors."""


class InvalidInputError(FedOpenMaxError, ValueError):
    """An argument violates an operation's preconditions."""


class InsufficientDataError(FedOpenMaxError, ValueError):
    """Too few usable values to fit a model."""


class DegenerateDataError(FedOpenMaxError, ValueError):
    """Data has no spread, so a maximum-likelihood fit does not exist."""


class MissingClassError(FedOpenMaxError):
    """No client reported calibration data for a known class."""

    def __init__(self, class_id):
        super().__init__(f"no client reported calibration data for class {class_id}")
        self.class_id = class_id


class CalibrationError(FedOpenMaxError):
    """A per-class Weibull fit failed during aggregation."""

    def __init__(self, class_id, cause):
        super().__init__(f"class {class_id}: {cause}")
        self.class_id = class_id
        self.cause = cause


class ProtocolError(FedOpenMaxError):
    """Malformed message or mismatched payload between participants."""


class TransportTimeout(FedOpenMaxError):
    """A participant did not receive an expected message in time."""


class AbortedRoundError(FedOpenMaxError):
    """A synchronous round could not complete because a client never replied."""

    def __init__(self, phase, round_, client_id):
        super().__init__(f"{phase} aborted in round {round_}: no reply from client {client_id}")
        self.phase = phase
        self.round = round_
        self.client_id = client_id


class InfeasibleSpecError(FedOpenMaxError):
    """Dataset generation could not satisfy its separation constraints."""


class ParseError(FedOpenMaxError, ValueError):
    """A data or configuration file could not be parsed."""

    def __init__(self, message, line=None, path=None):
        where = ""
        if path is not None:
            where += f"{path}"
        if line is not None:
            where += f"{':' if where else 'line '}{line}"
        super().__init__(f"{where}: {message}" if where else message)
        self.line = line
        self.path = path
