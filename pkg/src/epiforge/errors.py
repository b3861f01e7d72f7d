"""Exception hierarchy.

Every error carries the pipeline stage that raised it so the CLI can print a
one-line diagnostic naming module and cause.
"""


class EpiforgeError(Exception):
    module = "epiforge"
    category = "error"

    def __str__(self):
        return f"[{self.module}] {super().__str__()}"


class ConfigError(EpiforgeError):
    module = "config"
    category = "config"


class DataError(EpiforgeError):
    category = "data"


class NumericError(EpiforgeError):
    category = "numeric"


# --- ingest ---------------------------------------------------------------

class IngestError(DataError):
    module = "ingest"


class MissingColumn(IngestError):
    pass


class UnparsableValue(IngestError):
    def __init__(self, row, column, detail=""):
        self.row = row
        self.column = column
        msg = f"row {row}, column {column!r}: unparsable value"
        if detail:
            msg += f" ({detail})"
        super().__init__(msg)


class DuplicateKey(IngestError):
    def __init__(self, row, key):
        self.row = row
        self.key = key
        super().__init__(f"row {row}: duplicate key {key!r}")


class MissingCoverage(IngestError):
    def __init__(self, day, region=None, feed="case"):
        self.day = day
        where = f" for region {region}" if region else ""
        super().__init__(f"no {feed} record on {day}{where}")


class UnknownRegion(IngestError):
    pass


# --- features -------------------------------------------------------------

class FeatureError(DataError):
    module = "features"


class InsufficientAnchors(FeatureError):
    pass


class NegativeDoses(FeatureError):
    pass


class NoFluxData(FeatureError):
    pass


class MissingObservation(FeatureError):
    pass


class EmptySeries(FeatureError):
    pass


class ConstantColumn(FeatureError):
    def __init__(self, name):
        self.name = name
        super().__init__(f"column {name!r} is constant on the fit rows")


class InsufficientHistory(FeatureError):
    pass


# --- population models ----------------------------------------------------

class PopModelError(NumericError):
    module = "popmodels"


class ParamDomain(PopModelError):
    pass


class DegenerateWindow(PopModelError):
    pass


class OptimizerDiverged(PopModelError):
    pass


class WindowLengthError(PopModelError):
    pass


# --- ML models ------------------------------------------------------------

class ModelError(NumericError):
    module = "mlmodels"


class SingularKernel(ModelError):
    pass


class EmptyTrainingSet(ModelError):
    pass


class EmptyGrid(ModelError):
    pass


class WidthMismatch(ModelError):
    pass


class HyperparameterError(ModelError):
    pass


class FoldError(ModelError):
    pass


# --- ensemble -------------------------------------------------------------

class EnsembleError(NumericError):
    module = "ensemble"


class ZeroActual(EnsembleError):
    def __init__(self, step):
        self.step = step
        super().__init__(f"actual value is zero at step {step}")


class LengthMismatch(EnsembleError):
    pass


class ZeroRmse(EnsembleError):
    pass


class EmptySubset(EnsembleError):
    pass


class MissingWeight(EnsembleError):
    def __init__(self, model):
        self.model = model
        super().__init__(f"no weight for model {model!r}")


# --- explain --------------------------------------------------------------

class ExplainError(NumericError):
    module = "explain"


class TooManyFeatures(ExplainError):
    pass


class SchemaMismatch(ExplainError):
    pass


class UnknownFeature(ExplainError):
    pass


# --- fixtures / reports ---------------------------------------------------

class IoFailure(DataError):
    module = "io"
