"""Exception types shared across the package."""


class CliktuneError(Exception):
    """Base class for all errors raised by this package."""


class TaskModelMismatch(CliktuneError):
    """A task kind is not supported by the given manipulator model."""


class RankDeficient(CliktuneError):
    """A (possibly augmented) task Jacobian lost row rank.

    Rank loss is a hard error here: the control law relies on exact
    pseudo-inverses and never falls back to damping.
    """

    def __init__(self, message, level=None):
        super().__init__(message)
        self.level = level


class EmptyStack(CliktuneError):
    """A task stack with no tasks was supplied."""


class DimensionMismatch(CliktuneError):
    """Array shapes are inconsistent with the declared dimensions."""


class InvalidParameter(CliktuneError):
    """A scalar parameter is outside its admissible range."""


class ConfigError(CliktuneError):
    """A scenario config failed validation.

    ``path`` is the dotted key path of the offending entry, e.g.
    ``"controller.beta_tilde"``.
    """

    def __init__(self, path, message):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path


class SimulationError(CliktuneError):
    """A closed-loop run had to be aborted.

    Carries the step index at which the failure occurred.
    """

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step
