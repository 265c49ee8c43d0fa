"""Short-time Fourier transforms, Gabor frames, weighted modulation norms and
Gabor wave front sets for exponential weights."""

from . import acceptance, cli, estimators, frames, grid, modspace, operators, stft, wavefront, weights
from .estimators import GaborFrameTransformer, STFTTransformer, WaveFrontSetEstimator
from .exceptions import (
    AliasingError,
    ConditioningError,
    ConfigError,
    ConvergenceError,
    CostError,
    DomainError,
    GaborWFError,
    GrowthError,
    NotSampleableError,
    NumericGuardError,
    RangeError,
)
from .frames import GaborSystem, Lattice, dual_window, frame_bounds
from .grid import (
    Chirp,
    Const,
    Delta,
    Gaussian,
    GevreyBump,
    PlaneWave,
    SampledSignal,
    UniformGrid,
    fourier,
    inverse_fourier,
    sample,
)
from .stft import AnalyticStft, invert, stft
from .wavefront import ConePartition, wfs_cone, wfs_lattice
from .weights import WeightFunction
from .windows import GaussWindow

__version__ = "0.1.0"
