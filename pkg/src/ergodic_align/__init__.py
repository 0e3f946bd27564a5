"""Alignment schemes over finite-field interference channels: simulation,
exact probability oracles, and delay-exponent analysis."""

from ._kernels import BACKEND
from .gfq import (
    FieldElement,
    FieldMismatchError,
    FieldVector,
    PrimeField,
    linear_dependence,
    rank,
)
from .channel import (
    ChannelMatrix,
    MatrixStream,
    NoiseModel,
    child_dof,
    draw_matrix,
    relative_entropy,
    scheme_dof,
)
from .schemes import (
    ChildRun,
    Composition,
    MessageBank,
    RoundRecord,
    SchemeRun,
    SchemeSpec,
    child_run,
    decode,
    jap_run,
    japb_run,
    ngjv_run,
    ngjv_trial,
    recovery_check,
    run_scheme,
    tdma_run,
)
from .analysis import (
    DelayStats,
    ExponentFit,
    Optimum,
    RegimeParams,
    bounds,
    compositions,
    exact_round_probability,
    fit_exponent,
    harmonic_bounds,
    jap_exponent,
    japb_exponent,
    lemma3_failure,
    monte_carlo,
    optimize,
    regime_child,
    regime_parent,
    span_fullness,
)

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "ChannelMatrix",
    "ChildRun",
    "Composition",
    "DelayStats",
    "ExponentFit",
    "FieldElement",
    "FieldMismatchError",
    "FieldVector",
    "MatrixStream",
    "MessageBank",
    "NoiseModel",
    "Optimum",
    "PrimeField",
    "RegimeParams",
    "RoundRecord",
    "SchemeRun",
    "SchemeSpec",
    "bounds",
    "child_dof",
    "child_run",
    "compositions",
    "decode",
    "draw_matrix",
    "exact_round_probability",
    "fit_exponent",
    "harmonic_bounds",
    "jap_exponent",
    "jap_run",
    "japb_exponent",
    "japb_run",
    "lemma3_failure",
    "linear_dependence",
    "monte_carlo",
    "ngjv_run",
    "ngjv_trial",
    "optimize",
    "rank",
    "recovery_check",
    "regime_child",
    "regime_parent",
    "relative_entropy",
    "run_scheme",
    "scheme_dof",
    "span_fullness",
    "tdma_run",
    "__version__",
]
