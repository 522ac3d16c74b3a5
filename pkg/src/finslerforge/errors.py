"""Exception hierarchy shared by all finslerforge modules."""


class FinslerForgeError(Exception):
    """Base class for every error raised by this package."""


class ConfigError(FinslerForgeError):
    """Invalid run configuration; ``path`` names the offending field."""

    def __init__(self, message, path=""):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)


class ParseError(ConfigError):
    def __init__(self, message, offset, text=""):
        self.offset = offset
        self.text = text
        super().__init__(f"{message} at offset {offset}")


class UndeclaredVariableError(ConfigError):
    def __init__(self, name):
        self.name = name
        super().__init__(f"undeclared coordinate {name!r}")


class NumericError(FinslerForgeError):
    """Failure of a numerical procedure (singular matrix, no root, ...)."""


class EvalDomainError(NumericError):
    """Expression evaluated outside the domain of one of its nodes."""

    def __init__(self, message, node=None):
        self.node = node
        where = f" in node {node}" if node is not None else ""
        super().__init__(message + where)


class DegenerateMetricError(NumericError):
    def __init__(self, det, what="metric"):
        self.det = det
        super().__init__(f"degenerate {what}: |det| = {abs(det):.3e} <= 1e-12")
