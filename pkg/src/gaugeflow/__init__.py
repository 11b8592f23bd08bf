"""Lattice gauge-theory toolkit: energies, gradient flows, Coulomb gauge fixing,
covariant Laplacian spectra and empirical gradient-inequality analysis."""
from .errors import (
    ConfigError,
    DimensionMismatch,
    GaugeFlowError,
    InsufficientData,
    LogBranch,
    NoConvergence,
    NotCritical,
    StepUnderflow,
    UnsupportedExponent,
)
from .fields import FieldConfig, Tangent, gauge_apply
from .flow import FlowParams, Trajectory
from .functionals import FunctionalSpec, energy, gradient, hess_vec
from .lattice import LatticeSpec
from .lie import GroupKind

__version__ = "0.1.0"
