"""Exception hierarchy.

Every error raised by the library derives from :class:`EvmError`; most also
derive from ``ValueError`` so generic callers can catch bad-input failures
without importing this module.
"""


class EvmError(Exception):
    """Base class for all evmforge errors."""


# frame I/O
class EmptyInput(EvmError, ValueError):
    pass


class DimensionMismatch(EvmError, ValueError):
    pass


class MalformedFile(EvmError, ValueError):
    pass


class ChannelMismatch(EvmError, ValueError):
    pass


class RoiOutOfBounds(EvmError, ValueError):
    pass


class IoFailure(EvmError, OSError):
    pass


# pyramid
class TooSmall(EvmError, ValueError):
    pass


class BadTargetDims(EvmError, ValueError):
    pass


class DepthTooLarge(EvmError, ValueError):
    pass


class ShapeMismatch(EvmError, ValueError):
    pass


# temporal filtering / magnification
class BandAboveNyquist(EvmError, ValueError):
    pass


class SeriesTooShort(EvmError, ValueError):
    pass


class TooFewFrames(EvmError, ValueError):
    pass


# ssim
class FrameSmallerThanWindow(EvmError, ValueError):
    pass


# pulse
class NoPeak(EvmError, ValueError):
    pass


# classifiers
class SingleClass(EvmError, ValueError):
    pass


class NonFiniteLoss(EvmError, ArithmeticError):
    pass


class EmptyTestSet(EvmError, ValueError):
    pass


# cli
class MalformedManifest(EvmError, ValueError):
    pass
