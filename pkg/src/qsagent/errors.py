class DivergenceError(RuntimeError):
    """A network produced non-finite values (outputs, losses or gradients)."""


class EpisodeFinishedError(RuntimeError):
    """``step`` was called on an environment whose episode already ended."""


class CheckpointError(Exception):
    """Base class for checkpoint read failures."""


class CorruptCheckpointError(CheckpointError):
    pass


class TruncatedCheckpointError(CorruptCheckpointError):
    pass


class VersionMismatchError(CheckpointError):
    pass
