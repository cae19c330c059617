"""Exception types shared across the detection pipeline."""


class PipelineError(Exception):
    """Base class for domain errors (CLI maps these to exit code 2)."""


class MalformedRecord(PipelineError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class EmptyDataset(PipelineError):
    pass


class TooFewSamples(PipelineError):
    pass


class SolverNotConverged(PipelineError):
    pass


class ScalerMismatch(PipelineError):
    pass


class SourceNotFound(PipelineError):
    pass


class EmptyInput(PipelineError):
    pass


class UnsetSeverity(PipelineError):
    pass


class VersionMismatch(PipelineError):
    pass


class ParseError(PipelineError):
    pass


class InvalidSpec(PipelineError):
    pass


class LabelMismatch(PipelineError):
    pass
