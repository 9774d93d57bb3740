"""Dense-tensor graphs with reverse-mode differentiation."""
from .gradcheck import GradReport, check_gradients
from .graph import (
    Graph,
    Node,
    backward,
    evaluate,
    get_dtype,
    register_op,
    set_precision,
    value_and_grad,
)
from .optim import Adam
from . import weights

__all__ = [
    "Adam",
    "GradReport",
    "Graph",
    "Node",
    "backward",
    "check_gradients",
    "evaluate",
    "get_dtype",
    "register_op",
    "set_precision",
    "value_and_grad",
    "weights",
]
