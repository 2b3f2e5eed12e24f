"""Exception types shared across the package."""

from __future__ import annotations


class DomainError(ValueError):
    """An input lies outside the domain where an operation is defined."""


class NumericError(RuntimeError):
    """A numerical procedure failed to reach its tolerance.

    The best estimate obtained before giving up is kept on ``estimate`` so
    callers can decide whether it is usable.
    """

    def __init__(self, message: str, estimate: float | None = None, error: float | None = None):
        super().__init__(message)
        self.estimate = estimate
        self.error = error


class ConfigError(ValueError):
    """A scenario configuration failed validation.

    ``problems`` holds one ``(key_path, message)`` pair per violation.
    """

    def __init__(self, problems: list[tuple[str, str]]):
        self.problems = list(problems)
        lines = [f"{path}: {msg}" for path, msg in self.problems]
        super().__init__("invalid configuration:\n  " + "\n  ".join(lines))
