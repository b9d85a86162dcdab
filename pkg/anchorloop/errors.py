from __future__ import annotations


class AnchorloopError(Exception):
    """Root of every error raised by the package."""


class PerceptError(AnchorloopError, ValueError):
    pass


class MatcherError(AnchorloopError, ValueError):
    pass


class DatasetError(AnchorloopError):
    def __init__(self, message: str, line: int | None = None) -> None:
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class AnchorStoreError(AnchorloopError):
    pass


class ProgramError(AnchorloopError):
    def __init__(self, message: str, clause: str | None = None) -> None:
        self.clause = clause
        if clause is not None:
            message = f"clause '{clause}': {message}"
        super().__init__(message)


class TrackerError(AnchorloopError):
    pass


class WorldLoopError(AnchorloopError):
    pass


class ScenarioError(AnchorloopError):
    pass
