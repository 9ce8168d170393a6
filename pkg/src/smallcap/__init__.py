"""Numerical audits of superlevel-set estimates for exponential sums over the parabola.

Submodules
----------
geometry   frequency sets, cap partitions and distribution profiles
engine     grid evaluation, moments, superlevel measures and closed-form bounds
sharp      major arcs, totients, the shift search and model families
highlow    wave-packet pruning, square functions and lemma audits on a torus
bilinear   resonant-quadruple counting, broad sets and bilinear audits
sweep      parameter sweeps and the mixed-norm audit
report     audit records and their file formats
"""

from .engine import Region, SampledField, evaluate, moment, superlevel_measure, theorem_bound
from .estimators import CapNormalizer, ExpSumField, HighLowAnalyzer, SuperlevelProfiler
from .geometry import FrequencySet, build_cap_partition
from .report import AuditReport, SCHEMA_VERSION

__version__ = "0.1.0"

__all__ = [
    "AuditReport",
    "CapNormalizer",
    "ExpSumField",
    "FrequencySet",
    "HighLowAnalyzer",
    "Region",
    "SCHEMA_VERSION",
    "SampledField",
    "SuperlevelProfiler",
    "build_cap_partition",
    "evaluate",
    "moment",
    "superlevel_measure",
    "theorem_bound",
]
