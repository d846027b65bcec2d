from .config import Config
from .density import DensityReport, Region, density_check, density_sweep, orthogonal_witness, strip_schedule
from .dynamics import (
    DispersionOracle,
    QuantumDynamics,
    SectorOperator,
    build_transfer,
    hamiltonian,
    momentum,
    time_zero_field,
    verify_field_bound,
    verify_local_field_ops,
    verify_spectral_condition,
)
from .exceptions import (
    ComplexityGuardError,
    ConfigError,
    ContinuationError,
    DomainError,
    GeometryError,
    MarginError,
    MassError,
    OutOfRangeError,
    OutsideDomainError,
    PrerequisiteError,
    QuantizerError,
    ReflectionPositivityError,
    ScheduleInfeasibleError,
    SpanDeficiencyError,
    SupportViolationError,
    UnsupportedRegimeError,
)
from .fock import PhysicalSpace
from .gaussian import CharacteristicFunctional, CovarianceOperator, build_covariance, eval_S, verify_C1, verify_C3, wick_moment
from .heatkernel import (
    MultiIndex,
    antitimeordered_vector,
    continue_complex,
    field_derivative,
    regularized_field,
    verify_derivative_bound,
    verify_lemma,
)
from .i18n import Messages, messages, set_language
from .lattice import (
    LatticeGeometry,
    Reflection,
    TestFunction,
    TimeBoundary,
    build_geometry,
    reflect,
    shift,
    sobolev_norm,
    spacetime_norm,
)
from .report import merge_parts, read_part, write_part, write_report
from .rp_quantize import EuclideanVector, QuotientBasis, assemble_gram, check_rp, quantize, quotient
from .runner import CHECKS, COMMANDS, CheckResult, RunReport, SuiteRunner, Verdict, require

__all__ = [
    'Config', 'SuiteRunner', 'RunReport', 'CheckResult', 'Verdict', 'CHECKS', 'COMMANDS', 'require',
    'write_report', 'write_part', 'read_part', 'merge_parts',
    'LatticeGeometry', 'TimeBoundary', 'Reflection', 'TestFunction', 'build_geometry', 'reflect', 'shift',
    'sobolev_norm', 'spacetime_norm',
    'CovarianceOperator', 'CharacteristicFunctional', 'build_covariance', 'eval_S', 'wick_moment',
    'verify_C1', 'verify_C3',
    'EuclideanVector', 'QuotientBasis', 'assemble_gram', 'check_rp', 'quotient', 'quantize',
    'PhysicalSpace',
    'SectorOperator', 'DispersionOracle', 'QuantumDynamics', 'build_transfer', 'hamiltonian', 'momentum',
    'time_zero_field', 'verify_spectral_condition', 'verify_field_bound', 'verify_local_field_ops',
    'MultiIndex', 'regularized_field', 'field_derivative', 'verify_derivative_bound', 'continue_complex',
    'verify_lemma', 'antitimeordered_vector',
    'Region', 'DensityReport', 'strip_schedule', 'density_check', 'orthogonal_witness', 'density_sweep',
    'Messages', 'messages', 'set_language',
    'QuantizerError', 'ConfigError', 'GeometryError', 'OutOfRangeError', 'DomainError', 'MassError',
    'ComplexityGuardError', 'SupportViolationError', 'ReflectionPositivityError', 'SpanDeficiencyError',
    'MarginError', 'ContinuationError', 'UnsupportedRegimeError', 'ScheduleInfeasibleError',
    'OutsideDomainError', 'PrerequisiteError',
]
