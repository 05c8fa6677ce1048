"""Finite-horizon diagnostics for weak mixing of vector sequences."""

from .integer_sets import FiniteIndexSet, InvalidInput
from .sequence_models import UnsupportedModel, VectorSequence

__all__ = ["FiniteIndexSet", "InvalidInput", "UnsupportedModel", "VectorSequence"]
__version__ = "0.1.0"
