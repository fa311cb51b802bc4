"""rdgen: rate-distortion generalization bounds at desk scale.

Exact information measures and Blahut-Arimoto rate-distortion solves on
finite alphabets, closed-form continuous families, KL-ball suprema, the
analytic example bounds, and a block-covering simulator, all exposed through
one library and the ``rdgen`` CLI.
"""

from .errors import ConvergenceError, FeasibilityError, InputError, RdgenError, SizeError
from .infocore import (
    Channel,
    JointTable,
    ProbVec,
    binary_entropy,
    empirical_type,
    entropy,
    kl_divergence,
    mutual_information,
)

__version__ = "0.1.0"

__all__ = [
    "Channel",
    "ConvergenceError",
    "FeasibilityError",
    "InputError",
    "JointTable",
    "ProbVec",
    "RdgenError",
    "SizeError",
    "binary_entropy",
    "empirical_type",
    "entropy",
    "kl_divergence",
    "mutual_information",
    "__version__",
]
