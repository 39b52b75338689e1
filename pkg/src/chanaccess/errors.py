class ConfigurationError(ValueError):
    """Invalid modulation identifier, scenario parameter or grid axis."""


class DegenerateFrameError(ValueError):
    """Estimated signal power of a frame is too small to normalize by."""


class InsufficientDataError(RuntimeError):
    """Not enough usable frames survived squelching to classify."""
