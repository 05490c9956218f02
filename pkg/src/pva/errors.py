"""Exception hierarchy.

The CLI maps these onto exit codes: ``DataError`` subclasses exit 3,
``TrainingError`` exits 4.
"""


class PvaError(Exception):
    pass


class DataError(PvaError):
    """Dataset or model file cannot be used."""


class TrainingError(PvaError):
    pass


class MissingSplit(DataError):
    pass


class EmptyClass(DataError):
    pass


class IoFailure(DataError):
    pass


class EmptyVocabulary(TrainingError):
    pass


class DimensionMismatch(TrainingError):
    pass


class LengthMismatch(PvaError, ValueError):
    pass


class LabelOutOfRange(PvaError, ValueError):
    pass


class EmptyInput(PvaError, ValueError):
    pass


class ModelFormatError(DataError):
    pass


class BadMagic(ModelFormatError):
    pass


class UnsupportedVersion(ModelFormatError):
    pass


class TruncatedPayload(ModelFormatError):
    pass


class CorruptHeader(TruncatedPayload):
    """Header checksum or header/payload consistency check failed."""


class KindMismatch(ModelFormatError):
    pass


class FingerprintMismatch(DataError):
    pass


class ParseFailure(DataError):
    pass


class MissingDefault(ParseFailure):
    pass


class BindFailure(PvaError):
    pass
