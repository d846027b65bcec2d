class QuantizerError(Exception):
    pass

class ConfigError(QuantizerError):
    pass

class GeometryError(QuantizerError):
    pass

class OutOfRangeError(QuantizerError):
    pass

class DomainError(QuantizerError):
    pass

class MassError(QuantizerError):
    pass

class ComplexityGuardError(QuantizerError):
    pass

class SupportViolationError(QuantizerError):
    pass

class ReflectionPositivityError(QuantizerError):
    pass

class SpanDeficiencyError(QuantizerError):
    pass

class MarginError(QuantizerError):
    pass

class ContinuationError(QuantizerError):
    pass

class UnsupportedRegimeError(QuantizerError):
    pass

class ScheduleInfeasibleError(QuantizerError):
    pass

class OutsideDomainError(QuantizerError):
    pass

class PrerequisiteError(QuantizerError):
    pass
