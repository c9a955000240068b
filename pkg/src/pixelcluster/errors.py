"""Exception hierarchy shared across the package.

Every error carries a process exit code so the CLI can map failures onto
its documented contract: 2 config error, 3 data error, 4 numeric fault.
"""


class PixelClusterError(Exception):
    """Base class; `exit_code` drives the CLI exit status."""

    exit_code = 1


class ConfigError(PixelClusterError):
    """Invalid configuration or command-line arguments."""

    exit_code = 2


class DataError(PixelClusterError):
    """Problems with input data or missing upstream artifacts."""

    exit_code = 3


class FormatError(DataError):
    """A file does not match its declared format (bad magic, bad structure)."""


class UnsupportedFeatureError(DataError):
    """The file is valid but uses a feature outside the supported subset."""


class TruncationError(DataError):
    """A file or element ends before its declared length."""


class ShapeError(DataError):
    """Tensor shapes incompatible with an operation; names the offending layer."""

    def __init__(self, message, layer=None):
        if layer is not None:
            message = f"[{layer}] {message}"
        super().__init__(message)
        self.layer = layer


class StateError(PixelClusterError):
    """An operation was invoked before its prerequisites (e.g. backward before forward)."""


class NumericFaultError(PixelClusterError):
    """NaN/Inf detected during a numeric computation."""

    exit_code = 4

    def __init__(self, message, layer=None):
        if layer is not None:
            message = f"{message} (first offending layer: {layer})"
        super().__init__(message)
        self.layer = layer
