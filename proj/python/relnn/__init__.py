"""Relational neural networks: training and inference over relational data.

The heavy lifting lives in the compiled ``_relnn`` extension; this package
re-exports its functions.
"""

from ._relnn import (  # noqa: F401
    convert_movielens,
    evaluate,
    gradcheck,
    layer_outputs,
    train,
    validate,
)

__all__ = [
    "convert_movielens",
    "evaluate",
    "gradcheck",
    "layer_outputs",
    "train",
    "validate",
]
