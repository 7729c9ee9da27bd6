"""Random fields with spectral representation over infinitely divisible random measures."""

from .field import (
    FieldSpec,
    IntegrabilityReport,
    KernelFamily,
    SignClass,
    SimpleFunction,
    cf_integral,
    cumulant_kernel,
    integrability_check,
    integrate_simple,
    joint_cf,
    kernel_matrix,
    sample_field,
    scale_spec,
    simple_approx,
    supports_disjoint,
)
from .levy import (
    LevyDivergenceError,
    LevySum,
    LevyTriplet,
    NoJumps,
    PointMasses,
    QuadratureError,
    StablePair,
    Tempered,
    cf_id,
    levy_exponent,
    levy_quadrature,
    sample_id,
    tau,
    truncated_second_moment,
)
from .measure import Cell, DomainPartition, LocalCharacteristics, cell_triplet, control_mass, sample_measure
from .stable import (
    Association,
    SpectralMeasureAtoms,
    StableSpec,
    as_field_spec,
    association_classify,
    g_map,
    null_check,
    spectral_measure,
    stable_cf,
)
from .verify import ExperimentReport, MonotoneTestFunction, Statistic, Verdict, empirical_cf, make_monotone_function

__all__ = [name for name in dir() if not name.startswith("_")]
