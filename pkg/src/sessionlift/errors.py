"""Exception hierarchy. The CLI maps each family onto an exit code."""


class SessionLiftError(Exception):
    exit_code = 1


class UsageError(SessionLiftError, ValueError):
    exit_code = 2


class DataError(SessionLiftError, ValueError):
    exit_code = 3


class ParseError(DataError):
    """Malformed log syntax. ``position`` is a line number or ``(line, column)``."""

    def __init__(self, message, position=None):
        if position is not None:
            message = f"{message} (at {position})"
        super().__init__(message)
        self.position = position


class ValidationError(DataError):
    def __init__(self, message, case_id=None):
        if case_id is not None:
            message = f"case {case_id!r}: {message}"
        super().__init__(message)
        self.case_id = case_id


class OrderingError(DataError):
    pass


class EmptyInputError(DataError):
    pass


class NamingError(DataError):
    pass


class SpecError(DataError):
    pass


class ClusteringError(SessionLiftError, ValueError):
    exit_code = 4


class ParameterError(ClusteringError):
    pass
