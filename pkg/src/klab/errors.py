"""Error classes shared by the library and mapped to CLI exit codes."""


class ConfigError(ValueError):
    """Malformed system, stream, function or experiment configuration (exit 2)."""


class ResourceError(RuntimeError):
    """An enumeration or iteration budget was exceeded (exit 3)."""


class DomainError(ValueError):
    """Argument outside the mathematical domain of an operation."""
