"""Exception types raised across the package."""


class ResQuNNError(Exception):
    pass


# simulator
class QubitCountOutOfRange(ResQuNNError, ValueError):
    pass


class QubitIndexOutOfRange(ResQuNNError, IndexError):
    pass


class ControlEqualsTarget(ResQuNNError, ValueError):
    pass


class ZeroNormInput(ResQuNNError, ValueError):
    pass


class TooManyFeatures(ResQuNNError, ValueError):
    pass


# differentiation
class CyclicTape(ResQuNNError, ValueError):
    pass


# layers
class DimensionNotDivisible(ResQuNNError, ValueError):
    pass


class ChannelMismatch(ResQuNNError, ValueError):
    pass


class LengthMismatch(ResQuNNError, ValueError):
    pass


# wiring language
class WiringError(ResQuNNError, ValueError):
    pass


class WiringSyntaxError(WiringError):
    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at position {position})")
        self.position = position


class ForwardReference(WiringError):
    pass


class UnknownSignal(WiringError):
    pass


class UnsupportedLayerCount(WiringError):
    pass


# data
class IDXFormatError(ResQuNNError, ValueError):
    pass


class BadMagic(IDXFormatError):
    pass


class TruncatedPayload(IDXFormatError):
    pass


class InsufficientSamples(ResQuNNError, ValueError):
    pass


# training
class BadDistribution(ResQuNNError, ValueError):
    pass


class ConfigMismatch(ResQuNNError, ValueError):
    pass
