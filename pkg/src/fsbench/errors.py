"""Exception hierarchy shared by every pipeline stage."""


class FSBenchError(Exception):
    """Base class for all errors raised by fsbench."""


# data
class DataError(FSBenchError):
    pass


class MissingLabelColumn(DataError):
    pass


class EmptyFile(DataError):
    pass


class RaggedRow(DataError):
    pass


class NonBinaryLabel(DataError):
    pass


class AllRowsDropped(DataError):
    pass


class SingleClass(DataError):
    pass


class InvalidDataset(DataError):
    pass


# selection
class SelectionError(FSBenchError):
    pass


class UnknownMethod(SelectionError):
    pass


class SelectorFailure(SelectionError):
    pass


class IndexOutOfRange(SelectionError):
    pass


class KTooLarge(SelectionError):
    pass


class ConstantLabels(SelectorFailure):
    pass


class TooFewSamples(SelectorFailure):
    pass


class NoFeatureSurvives(SelectorFailure):
    pass


class ZeroTotalVariance(SelectorFailure):
    pass


class BudgetTooSmall(SelectorFailure):
    pass


class NoPermissionFeatures(SelectorFailure):
    pass


# models / evaluation
class ModelError(FSBenchError):
    pass


class SingleClassTrainingSet(ModelError):
    pass


class WidthMismatch(ModelError):
    pass


class ClassSmallerThanK(FSBenchError):
    pass


# report
class EmptyStore(FSBenchError):
    pass


class UnknownFormat(FSBenchError):
    pass


# plugins
class PluginError(SelectorFailure):
    pass


class PluginCrashed(PluginError):
    pass


class ProtocolViolation(PluginError):
    pass


class PluginTimeout(PluginError):
    pass


# cli
class InvalidConfig(FSBenchError):
    pass


class UnwritableOutputDir(FSBenchError):
    pass
