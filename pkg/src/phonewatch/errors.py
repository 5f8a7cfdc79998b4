"""Exception taxonomy shared across the engine."""


class PhonewatchError(Exception):
    """Base class for all engine errors."""


class GeometryError(PhonewatchError):
    """Invalid geometry: degenerate boxes, mismatched spaces."""


class SchemaError(PhonewatchError):
    """A record violates a declared file schema or value constraint."""


class ScriptParseError(SchemaError):
    """Detection script could not be parsed; carries the offending line."""

    def __init__(self, path, line_no: int, message: str):
        super().__init__(f"{path}:{line_no}: {message}")
        self.path = path
        self.line_no = line_no


class BackendError(PhonewatchError):
    """A detector backend failed; carries the backend name."""

    def __init__(self, backend_name: str, message: str):
        super().__init__(f"backend '{backend_name}': {message}")
        self.backend_name = backend_name


class SequencingError(PhonewatchError):
    """Frame indices arrived out of order for a stream."""


class DegenerateInputError(PhonewatchError):
    """An evaluation input combination has no defined result."""


class NotFoundError(PhonewatchError):
    """Lookup of a record or stream that does not exist."""


class ConflictError(PhonewatchError):
    """A state transition was attempted from an incompatible state."""


class ConfigError(PhonewatchError):
    """Engine configuration is missing, malformed, or inconsistent."""


class InputError(PhonewatchError):
    """A frame source or data file is missing or unreadable."""
