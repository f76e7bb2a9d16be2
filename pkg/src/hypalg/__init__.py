"""Discrete commutative hypergroups on the nonnegative integers.

Builds convolution tables from polynomial recurrences or symmetric-hypergroup
parameters, computes Haar weights, characters and the Plancherel measure, and
classifies alpha-amenability with explicit unique alpha-means.
"""

__version__ = "0.1.0"

from .amenability import (AMENABLE, IDENTITY_ALWAYS_AMENABLE, INCONCLUSIVE, NOT_AMENABLE,
                          OUTSIDE_DUAL, UNIQUE_MEAN, AlphaMean, AmenabilityReport, ClassFlags,
                          character_norms, classify_family, construct_mean, corollary_check,
                          verdict)
from .builders import PRESETS, build_table, preset
from .core import (FLOAT, RATIONAL, HaarWeights, SequenceMeasure, convolve, haar_from_table,
                   translate, verify_axioms)
from .errors import HypergroupError, NotL2, OutsideDual
from .spectral import dual_measure, estimate_support, plancherel_check, support_for

__all__ = [
    "AMENABLE", "IDENTITY_ALWAYS_AMENABLE", "INCONCLUSIVE", "NOT_AMENABLE", "OUTSIDE_DUAL",
    "UNIQUE_MEAN", "AlphaMean", "AmenabilityReport", "ClassFlags", "character_norms",
    "classify_family", "construct_mean", "corollary_check", "verdict", "PRESETS", "build_table",
    "preset", "FLOAT", "RATIONAL", "HaarWeights", "SequenceMeasure", "convolve",
    "haar_from_table", "translate", "verify_axioms", "HypergroupError", "NotL2", "OutsideDual",
    "dual_measure", "estimate_support", "plancherel_check", "support_for",
]
