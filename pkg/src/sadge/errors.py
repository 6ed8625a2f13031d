"""Exception types shared across the engine.

Everything raised on purpose derives from SadgeError so the CLI can map
validation problems to exit code 1 and runtime failures to exit code 2.
"""

from __future__ import annotations


class SadgeError(Exception):
    """Base class for all engine errors."""


class ValidationError(SadgeError):
    """Bad user input: config, manifest, or argument problems."""


class ConfigError(ValidationError):
    """Benchmark config failed to parse or validate."""

    def __init__(self, message: str, *, path: str | None = None, field: str | None = None):
        self.path = path
        self.field = field
        loc = "".join(
            [f" [{path}]" if path else "", f" (field: {field})" if field else ""]
        )
        super().__init__(f"{message}{loc}")


class ManifestError(ValidationError):
    """Embedding/correspondence manifest is malformed."""


class MetricError(SadgeError):
    """A pair metric could not be computed."""


class PairingError(ValidationError):
    """Pairing plan construction failed."""


class DegenerateStatsError(SadgeError):
    """Zero-variance input where a spread is required (normalization, correlation)."""


class FitError(SadgeError):
    """Fusion fitting failed for every start."""
