"""Exception types raised across the toolkit."""

from typing import Optional


class ConfigError(ValueError):
    """Invalid or missing configuration, reported with the file it came from."""

    def __init__(self, message: str, path: Optional[str] = None, key: Optional[str] = None):
        self.path = path
        self.key = key
        location = ''
        if path:
            location = f'{path}'
            if key:
                location += f' [{key}]'
            location += ': '
        super().__init__(f'{location}{message}')


class ConvergenceError(RuntimeError):
    """A numerical solver failed after all of its fallbacks."""

    def __init__(self, message: str, diagnostics: Optional[dict] = None):
        self.diagnostics = diagnostics or {}
        super().__init__(f'{message} {self.diagnostics}' if self.diagnostics else message)


class InfeasibleCorrectionError(ConvergenceError):
    """The requested deformation target cannot be reached."""


class CalibrationError(ConvergenceError):
    """No candidate setting satisfied a calibration criterion."""
