"""Exception types shared across the package."""


class PipelineError(Exception):
    """Base class for all errors raised by dynpipe."""


class CodeDoesNotSuppress(PipelineError, ValueError):
    """Logical error rate is >= 1: the code distance gives no protection."""


class InfeasibleProtocol(PipelineError, ValueError):
    """Distillation success probability is not positive."""


class InfeasibleAllocation(PipelineError):
    """No factory fits in the qubit budget."""


class UnreachableThreshold(PipelineError):
    """The budget can never produce the requested number of states."""


class InstanceTooLarge(PipelineError, ValueError):
    """Brute-force oracle called on an instance above its size caps."""


class InfeasibleConfig(PipelineError):
    """A pipeline configuration cannot run (budget or buffer too small)."""


class ProtocolError(PipelineError, RuntimeError):
    """Illegal phase transition in the execution state machine."""


class PipelineTooSlow(PipelineError, ValueError):
    """A pipeline cannot emit a single state within the program runtime."""


class IneffectiveLevelWarning(UserWarning):
    """A distillation level does not improve the magic-state error rate."""
