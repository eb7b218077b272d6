"""Exception hierarchy shared by every mindloop subsystem."""


class MindloopError(Exception):
    """Base class for all errors raised by this package."""


# -- acquisition ------------------------------------------------------------

class ShortPacket(MindloopError):
    """Wire block is not exactly 33 bytes."""


class BadHeader(MindloopError):
    """First byte of a wire block is not the 0xA0 start marker."""


class BadFooter(MindloopError):
    """Last byte of a wire block is outside the 0xC0-0xCF stop range."""


class ScheduleGap(MindloopError):
    """A requested time has no label in the synthesis schedule."""


class SourceUnavailable(MindloopError):
    """Sample source could not be opened or reached."""


class DesyncDetected(MindloopError):
    """Sequence-number gap too large to treat as a routine drop."""


class Overflow(MindloopError):
    """Consumer fell behind the producer; the bounded FIFO filled up."""


class SourceLost(MindloopError):
    """Acquisition dropout exceeded the session tolerance."""


# -- filtering --------------------------------------------------------------

class InvalidBand(MindloopError):
    """Cutoff ordering violated (must be 0 < hp < lp < Nyquist)."""


class UnstableDesign(MindloopError):
    """A designed filter stage has a pole on or outside the unit circle."""


# -- features / dataset -----------------------------------------------------

class EmptyTrainingSet(MindloopError):
    """Normalization statistics requested for an empty training set."""


class EmptyDataset(MindloopError):
    """Operation requires at least one example."""


class FormatVersionMismatch(MindloopError):
    """File carries an unsupported format version."""


class CorruptFile(MindloopError):
    """Magic or checksum verification failed."""


# -- models -----------------------------------------------------------------

class KTooLarge(MindloopError):
    """k exceeds the number of stored examples."""


class SingularCovariance(MindloopError):
    """Pooled covariance not invertible even after shrinkage."""


class TooFewClasses(MindloopError):
    """Discriminant fitting needs at least two classes."""


class ShapeUnderflow(MindloopError):
    """Network spatial length collapses below the kernel size."""


class ShapeMismatch(MindloopError):
    """Input tensor shape does not match the network architecture."""


class DivergenceDetected(MindloopError):
    """Training loss became non-finite."""


# -- engine -----------------------------------------------------------------

class RatingMissing(MindloopError):
    """Validation session closed without a user rating."""
