"""Coherent dynamics of multi-level systems under nonstationary, non-Markovian telegraph noise."""

from .backends import decoherence, to_analytic
from .closed_form import Regime, RegimeBeta, RtnPairParams, classify_regime, memoryless_decoherence
from .errors import (
    BackendMismatchError,
    ConfigError,
    DephasingError,
    DivergenceError,
    NoPointwiseValueError,
    NumericalFailureError,
    ParameterError,
    PoleEvaluationError,
    SamplerValidityError,
)
from .laplace_engine import (
    ComplexRational,
    DecoherenceSeries,
    build_F_laplace,
    build_rational_F,
    contour_invert,
    invert_rational,
)
from .molecule_model import MoleculeSpec, coherence_series, l1_coherence, reduced_density_matrix
from .noise_kernels import (
    Composite,
    Exponential,
    Memoryless,
    MemoryKernel,
    ModulatedCosine,
    kernel_laplace,
    kernel_time,
)
from .rtn_sampler import McConfig, mc_decoherence, sample_initial
from .volterra_sle import PartialAverages, VolterraConfig, decoherence_from_volterra, solve_gsle_rtn

__version__ = "0.1.0"
