"""Minimal quantum compression of measurement statistics.

Given a set of effect operators, find the smallest quantum dimension a state
can be compressed to (with a classical register alongside) while every
outcome probability is preserved, build the compression and decompression
channels, and bound the dimension from below through the factorization of
a determinantal curve.
"""
from .algebra import (BlockStructure, GenerationVerdict, ReducedObservableSet,
                      algebra_generation_test, block_diagonalize, reduce_multiplicities,
                      reduced_observable_set)
from .channelsynth import (CompressionScheme, SchemeCheck, TwoProjectionForm,
                           build_max_block_scheme, build_optimal_scheme, identity_scheme,
                           two_projection_form, verify_scheme)
from .curvebound import (DeterminantalCurve, FactorizationResult, GeometricBound,
                         extract_curve, factor_by_monodromy, geometric_lower_bound)
from .dimension import DimensionReport, compression_dimension, dimension_from_reduced
from .matcore import (DimensionError, NotHermitianError, ObservableSet, QuantumChannel,
                      apply_channel, cesaro_mean, choi_matrix, dual_channel, is_cptp)

__version__ = "0.1.0"

__all__ = [
    "BlockStructure", "GenerationVerdict", "ReducedObservableSet",
    "algebra_generation_test", "block_diagonalize", "reduce_multiplicities",
    "reduced_observable_set",
    "CompressionScheme", "SchemeCheck", "TwoProjectionForm", "build_max_block_scheme",
    "build_optimal_scheme", "identity_scheme", "two_projection_form", "verify_scheme",
    "DeterminantalCurve", "FactorizationResult", "GeometricBound", "extract_curve",
    "factor_by_monodromy", "geometric_lower_bound",
    "DimensionReport", "compression_dimension", "dimension_from_reduced",
    "DimensionError", "NotHermitianError", "ObservableSet", "QuantumChannel",
    "apply_channel", "cesaro_mean", "choi_matrix", "dual_channel", "is_cptp",
]
