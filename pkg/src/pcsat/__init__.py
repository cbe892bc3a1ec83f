"""Path-condition satisfiability toolkit.

Canonizes and vectorizes linear integer path conditions, decides them with
an exact branch-and-bound solver, trains per-group feedforward classifiers
on solver-labeled corpora, and runs a toy-language symbolic executor that
uses the classifiers with soundness-preserving solver fallbacks.
"""

__version__ = "0.1.0"

from .pc import (  # noqa: F401
    LinearConstraint,
    NonlinearError,
    Op,
    ParseError,
    PathCondition,
    PcDimension,
    canonize,
    dimension_of,
    format_pc,
    parse_pc,
)
