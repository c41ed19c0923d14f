"""Exception hierarchy shared by every module."""


class DarcsError(Exception):
    pass


class ContractViolation(DarcsError, ValueError):
    """Two operands disagree on shape, or a vector is non-finite."""


class InvalidInputError(DarcsError, ValueError):
    pass


class IdxFormatError(DarcsError, ValueError):
    """Malformed IDX file. ``field`` names the offending header field."""

    def __init__(self, field, message):
        super().__init__(f"{field}: {message}")
        self.field = field


class ConfigError(DarcsError, ValueError):
    pass
