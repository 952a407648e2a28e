"""Multispecies TASEP with long-range swap.

Modules: ``pairalg`` (exact interaction algebra), ``scatter`` (R-matrix,
Yang-Baxter, Bethe amplitudes), ``bethe`` (contour-integral transition
probabilities), ``dynamics`` (simulation and exact series oracle) and
``cli``.
"""

__version__ = "0.1.0"

from .dynamics import Configuration
from .errors import (
    InvalidParameterError,
    LRSwapError,
    NumericalInconsistencyWarning,
    ResourceLimitError,
    SingularityError,
    UnsupportedRuleError,
)
from .rules import RuleType

__all__ = [
    "__version__",
    "Configuration",
    "RuleType",
    "LRSwapError",
    "InvalidParameterError",
    "UnsupportedRuleError",
    "ResourceLimitError",
    "SingularityError",
    "NumericalInconsistencyWarning",
]
