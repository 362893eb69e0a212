"""Simulation and numerical analysis of linear, nonlinear and marked Hawkes processes."""
from .core import (
    ConfigError,
    CriticalityError,
    DomainError,
    Empirical,
    EventStream,
    Exponential,
    ExponentialKernel,
    Gamma,
    HawkesError,
    Kernel,
    Linear,
    LogRate,
    MarkModel,
    MarkovState,
    MonteCarloSummary,
    NumericalError,
    OutOfSupportError,
    Point,
    Power,
    PowerLaw,
    RateFn,
    RegimeError,
    ScaledLinear,
    ShiftedPower,
    SubPower,
    SumExp,
    Tabulated,
)

__version__ = "0.1.0"
