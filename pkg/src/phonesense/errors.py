"""Exception types raised across the pipeline."""


class PhonesenseError(Exception):
    """Base class for all errors raised by this package."""


# --- session loading / resampling ---

class MissingChannel(PhonesenseError):
    pass


class MalformedRow(PhonesenseError):
    def __init__(self, path, line_no, message):
        super().__init__(f"{path}:{line_no}: {message}")
        self.path = str(path)
        self.line_no = line_no


class ExcessiveDataLoss(PhonesenseError):
    pass


class InvalidMetadata(PhonesenseError):
    pass


class UnsortedInput(PhonesenseError):
    pass


class NotEnoughEvents(PhonesenseError):
    pass


# --- windowing ---

class OutOfBounds(PhonesenseError):
    pass


class MissingDataInWindow(PhonesenseError):
    pass


# --- feature computation / fusion ---

class TooShort(PhonesenseError):
    pass


class WrongLength(PhonesenseError):
    pass


class UnknownChannel(PhonesenseError):
    pass


class EmptyTrainingSet(PhonesenseError):
    pass


# --- dimensionality reduction / models ---

class SingleClass(PhonesenseError):
    pass


class KOutOfRange(PhonesenseError):
    pass


class DegenerateInput(PhonesenseError):
    pass


class DimensionMismatch(PhonesenseError):
    pass


# --- evaluation ---

class UnbalancedParticipant(PhonesenseError):
    pass


class SingleClassFold(PhonesenseError):
    pass


class LengthMismatch(PhonesenseError):
    pass


class EmptyInput(PhonesenseError):
    pass


# --- CLI / artifacts ---

class SampleMismatch(PhonesenseError):
    pass


class NoResults(PhonesenseError):
    pass


class IoFailure(PhonesenseError):
    pass
