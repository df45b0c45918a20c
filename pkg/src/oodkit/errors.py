"""Typed error hierarchy.

Argument-level misuse (bad shapes, out-of-range hyperparameters) raises plain
``ValueError``; everything that can fail because of *data* gets its own class
so callers can branch on failure kind.
"""


class OodkitError(Exception):
    """Base class for all data-dependent failures in this package."""


class FormatError(OodkitError):
    """Malformed on-disk array file (bad magic, header, or truncated payload)."""


class UnsupportedDtypeError(FormatError):
    """Array file uses a dtype other than little-endian float32."""


class ManifestError(OodkitError):
    """Bundle manifest does not conform to the documented JSON schema."""


class BundleValidationError(OodkitError):
    """Loaded arrays are mutually inconsistent (dims, label ranges, NaNs)."""


class FitError(OodkitError):
    """A detector or distribution fit cannot proceed on the given data."""


class NumericError(OodkitError):
    """A numeric kernel failed (e.g. Cholesky on a non-SPD matrix)."""


class GeneratorError(OodkitError):
    """A synthetic-bundle generator could not certify its construction."""
