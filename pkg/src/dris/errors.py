"""Exception hierarchy shared by every node and tool in the package."""

from __future__ import annotations


class DrisError(Exception):
    """Base class for all errors raised by this package."""


class DomainNameError(DrisError, ValueError):
    pass


class ConfigError(DrisError, ValueError):
    def __init__(self, field: str, message: str):
        super().__init__(f"invalid config field {field!r}: {message}")
        self.field = field


class InfeasibleMutation(DrisError, ValueError):
    pass


class SnapshotParseError(DrisError):
    def __init__(self, message: str, line: int | None = None):
        where = f" (line {line})" if line is not None else ""
        super().__init__(f"{message}{where}")
        self.line = line


class ProtocolError(DrisError):
    """A well-formed error reply from a node, e.g. ``badResumptionToken``."""

    def __init__(self, code: str, detail: str = ""):
        super().__init__(f"{code}: {detail}" if detail else code)
        self.code = code


class TransportError(DrisError):
    pass


class RegistrationError(DrisError):
    pass


class ResolutionError(DrisError, LookupError):
    pass
