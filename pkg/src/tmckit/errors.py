"""Exception types shared across the pipeline, mapped to CLI exit codes."""


class TmckitError(Exception):
    """Base class for all tmckit errors."""

    exit_code = 4


class ConfigError(TmckitError):
    """Invalid configuration value or flag combination (exit code 2)."""

    exit_code = 2


class InputError(TmckitError):
    """Unreadable, malformed or semantically unusable input data (exit code 3)."""

    exit_code = 3


class StageError(TmckitError):
    """A pipeline stage failed mid-run (exit code 4)."""

    exit_code = 4

    def __init__(self, stage: str, message: str):
        super().__init__(f"stage '{stage}' failed: {message}")
        self.stage = stage
