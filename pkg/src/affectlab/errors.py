"""Exception hierarchy.

Every error carries an ``exit_code`` so the command line front end can map
failures onto its documented exit statuses (2 config, 3 data, 4 numeric).
"""


class AffectLabError(Exception):
    exit_code = 1


class ConfigInvalid(AffectLabError, ValueError):
    exit_code = 2

    def __init__(self, field, reason):
        self.field = field
        self.reason = reason
        super().__init__(f"{field}: {reason}")


class DataError(AffectLabError):
    exit_code = 3


class NumericFailure(AffectLabError, ArithmeticError):
    exit_code = 4


# audio_io
class MissingFile(DataError, FileNotFoundError):
    pass


class BadMagic(DataError, ValueError):
    pass


class UnsupportedEncoding(DataError, ValueError):
    pass


class TruncatedData(DataError, ValueError):
    pass


# features
class EmptyClip(DataError, ValueError):
    pass


class NegativeChroma(AffectLabError, ValueError):
    pass


# autograd / model
class ShapeMismatch(AffectLabError, ValueError):
    pass


class IndexOutOfRange(AffectLabError, IndexError):
    pass


class NonScalarLoss(AffectLabError, ValueError):
    pass


class DimensionMismatch(ShapeMismatch):
    pass


class EmptyBatch(AffectLabError, ValueError):
    pass


class LabelOutOfRange(AffectLabError, ValueError):
    pass


class EmptyDataset(DataError, ValueError):
    pass


# checkpoints / transfer
class VersionUnsupported(DataError, ValueError):
    def __init__(self, version):
        self.version = version
        super().__init__(f"unsupported checkpoint format version {version}")


class ChecksumMismatch(DataError, ValueError):
    pass


class ShapeTableCorrupt(DataError, ValueError):
    pass


# The two transfer errors come from an incompatible policy/model pairing,
# which the user fixes in configuration.
class GroupShapeMismatch(ShapeMismatch):
    exit_code = 2

    def __init__(self, name, expected, got):
        self.tensor_name = name
        super().__init__(f"tensor {name!r}: target shape {expected} != source shape {got}")


class DecoderClassMismatch(ShapeMismatch):
    exit_code = 2


# corpus
class LayoutNotRecognized(DataError, ValueError):
    pass


class EmptyCorpus(DataError, ValueError):
    pass


class EvaluationFileUnparseable(DataError, ValueError):
    def __init__(self, path, line_no, line):
        self.path = path
        self.line_no = line_no
        super().__init__(f"{path}:{line_no}: cannot parse {line!r}")


class UnknownRawLabel(DataError, ValueError):
    def __init__(self, corpus_id, label):
        self.corpus_id = corpus_id
        self.label = label
        super().__init__(f"corpus {corpus_id!r}: unknown raw label {label!r}")


class TooFewPerClass(DataError, ValueError):
    pass


# evaluation
class ClassSetMismatch(DataError, ValueError):
    pass


class AllClassesEmpty(AffectLabError, ValueError):
    pass
