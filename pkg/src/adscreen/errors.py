"""Error types shared across the pipeline.

Each error class carries the process exit code the CLI maps it to, so a
stage can raise the right category and the entry point stays a thin shim.
"""


class AdscreenError(Exception):
    exit_code = 1


class ConfigError(AdscreenError):
    """Bad configuration: invalid values, unknown keys, impossible requests."""

    exit_code = 1


class DataError(AdscreenError):
    """Malformed or unusable input data (non-finite features, empty corpus...)."""

    exit_code = 2


class MetricUndefinedError(AdscreenError):
    """A requested metric has no defined value on the given inputs."""

    exit_code = 3


class DegenerateGroupsError(MetricUndefinedError):
    """Calibration grouping produced a group with expected count 0 or n."""
