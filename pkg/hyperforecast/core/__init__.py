"""Dense tensor engine with reverse-mode automatic differentiation."""

from .tensor import Tensor, as_tensor, build_tensor, constant, parameter, set_debug_checks
from .tape import Tape, backward
from .gradcheck import grad_check
from . import ops

__all__ = [
    "Tensor", "Tape", "as_tensor", "build_tensor", "constant", "parameter",
    "set_debug_checks", "backward", "grad_check", "ops",
]
