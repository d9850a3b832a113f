"""Exception hierarchy for the tactile sliding simulator."""


class SlideSimError(Exception):
    """Base class for every error raised by the simulator."""


class InvalidArgumentError(SlideSimError, ValueError):
    pass


class GenerationFailureError(SlideSimError, RuntimeError):
    pass


class DatasetWriteError(SlideSimError, OSError):
    pass


class InvalidDatasetError(SlideSimError, ValueError):
    pass


class NoEdgeDetectedError(SlideSimError, ValueError):
    pass


class InvalidStateError(SlideSimError, ValueError):
    pass


class InvalidTransitionError(SlideSimError, RuntimeError):
    pass


class InvalidModelError(SlideSimError, ValueError):
    pass


class ConfigError(SlideSimError, ValueError):
    """Scenario file problem; the message always names the offending key."""
