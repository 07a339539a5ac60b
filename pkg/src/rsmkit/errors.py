"""Exception hierarchy.

Three families map onto CLI exit codes: ``ConfigError`` (2), ``DataError`` (3)
and ``AnalysisError`` (4).
"""


class RsmError(Exception):
    pass


class ConfigError(RsmError):
    pass


class DataError(RsmError):
    pass


class AnalysisError(RsmError):
    pass


# --- profile ingestion -----------------------------------------------------

class MissingColumn(DataError):
    def __init__(self, name):
        super().__init__(f"missing required column {name!r}")
        self.name = name


class NonNumericCell(DataError):
    def __init__(self, row, col, value, reason="not a finite number"):
        super().__init__(f"row {row}, column {col!r}: {value!r} is {reason}")
        self.row = row
        self.col = col
        self.value = value


class UtilizationOutOfRange(DataError):
    def __init__(self, row, value):
        super().__init__(f"row {row}: SM utilization {value!r} outside [0, 1]")
        self.row = row
        self.value = value


class InconsistentEventSet(DataError):
    def __init__(self, kernel, missing=(), extra=()):
        detail = []
        if missing:
            detail.append(f"missing {sorted(missing)}")
        if extra:
            detail.append(f"unexpected {sorted(extra)}")
        super().__init__(f"kernel {kernel!r} has inconsistent event sets: " + ", ".join(detail))
        self.kernel = kernel


class UnknownKernel(DataError):
    def __init__(self, kernel):
        super().__init__(f"unknown kernel {kernel!r}")
        self.kernel = kernel


class EmptySelection(DataError):
    pass


class EmptyIntersection(DataError):
    pass


class DuplicateJoinKey(DataError):
    def __init__(self, side, key):
        super().__init__(f"join key {key!r} occurs more than once in {side}")
        self.side = side
        self.key = key


# --- machine model and rules ------------------------------------------------

class ModelError(ConfigError):
    pass


class DuplicateGroup(ModelError):
    def __init__(self, name):
        super().__init__(f"resource group {name!r} defined more than once")
        self.name = name


class UnknownPromotionTarget(ModelError):
    def __init__(self, pattern, target):
        super().__init__(f"rule {pattern!r} points at undefined group {target!r}")
        self.pattern = pattern
        self.target = target


class AmbiguousRule(ModelError):
    def __init__(self, first, second):
        super().__init__(f"patterns {first!r} and {second!r} can match the same event "
                         "but resolve to different groups")
        self.patterns = (first, second)


class UnknownGroupInRule(ModelError):
    def __init__(self, rule_id, group):
        super().__init__(f"rule {rule_id!r} triggers on unknown group {group!r}")
        self.rule_id = rule_id
        self.group = group


# --- analysis ----------------------------------------------------------------

class AllColumnsConstant(AnalysisError):
    pass


class ZeroMaxTime(AnalysisError):
    pass


class OutOfRange(AnalysisError, ValueError):
    pass


class Misaligned(AnalysisError):
    pass


class DimensionMismatch(AnalysisError):
    pass


class InvalidKappa(AnalysisError, ValueError):
    pass


class EmptyGroupPartition(AnalysisError):
    pass


class AllZeroRsm(AnalysisError):
    pass


class DegenerateDelta(AnalysisError):
    pass


class UnnormalizedReport(AnalysisError):
    pass
