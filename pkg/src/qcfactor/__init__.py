"""Coding-theory and numerical-optimization toolkit: quasi-cyclic LDPC
construction and analysis, Ising ground-state exponent matrices, Bethe
permanents, Nishimori temperature estimation, and sparse square-matrix
factorization benchmarks."""

__version__ = "0.1.0"

from .errors import (
    ConstructionError,
    DomainError,
    EstimationError,
    ParseError,
    QcFactorError,
)

__all__ = [
    "__version__",
    "QcFactorError",
    "DomainError",
    "ParseError",
    "ConstructionError",
    "EstimationError",
]
