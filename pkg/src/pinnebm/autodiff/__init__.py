from .adam import AdamHyper, AdamState, adam_step
from .jet import Jet, UnsupportedOrderError, forward_jet, mixed_second
from .params import LayoutError, ParamLayout, ParamVector
from .tape import (
    NumericError,
    StructuralError,
    Tape,
    Value,
    backward,
    concat_rows,
    cos,
    exp,
    grad_at,
    log,
    matmul,
    sin,
    sqrt,
    tanh,
)

__all__ = [
    "AdamHyper",
    "AdamState",
    "adam_step",
    "Jet",
    "UnsupportedOrderError",
    "forward_jet",
    "mixed_second",
    "LayoutError",
    "ParamLayout",
    "ParamVector",
    "NumericError",
    "StructuralError",
    "Tape",
    "Value",
    "backward",
    "concat_rows",
    "grad_at",
    "tanh",
    "exp",
    "log",
    "sin",
    "cos",
    "sqrt",
    "matmul",
]
