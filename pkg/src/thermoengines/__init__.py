"""Numerical laboratory for two-bath thermal resource engines."""
from .core import (
    BETA_INF, COLD, HOT, QUBITS, DimensionMismatch, GibbsContext, InvalidParameter,
    InverseTemperaturePair, LevelSpec, StochasticChannel, apply_channel, gibbs_population,
    population, product_gibbs, qubit_context,
)

__version__ = "0.1.0"
