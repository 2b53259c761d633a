"""Exception hierarchy shared by all modules."""


class TrifieldError(Exception):
    """Base class for library errors."""


class ConfigError(TrifieldError, ValueError):
    def __init__(self, message, problems=None):
        self.problems = list(problems or [message])
        super().__init__(message)


class DomainError(TrifieldError, ValueError):
    """A point lies outside the domain it was evaluated on."""


class MeshError(TrifieldError):
    pass


class InvertedElementError(MeshError):
    """An element has a non-positive Jacobian determinant."""

    def __init__(self, message, elements=None):
        self.elements = list(elements or [])
        super().__init__(message)


class KinematicsError(InvertedElementError):
    """Non-positive J in the solid kinematics (step rejection signal)."""


class MeshMotionError(InvertedElementError):
    """The ALE extension tangled the fluid mesh."""


class AssemblyError(TrifieldError, IndexError):
    pass


class SolverError(TrifieldError):
    def __init__(self, message, report=None):
        self.report = report
        super().__init__(message)


class StepFailure(TrifieldError):
    """A nonlinear time step did not converge; ``report`` holds the trace."""

    def __init__(self, message, report=None):
        self.report = report
        super().__init__(message)


class InterfaceError(TrifieldError):
    pass
