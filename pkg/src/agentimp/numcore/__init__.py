"""Dense linear algebra, layers and reverse-mode gradients."""

from agentimp.numcore.gradcheck import numeric_grad, relative_error
from agentimp.numcore.tape import GradTape, Node
from agentimp.numcore.tensor import (
    Tensor2,
    as_tensor2,
    concat,
    l2_norm,
    matmul,
    mlp_forward,
    relu,
    softmax_row,
    softmax_rows,
)

__all__ = [
    "GradTape",
    "Node",
    "Tensor2",
    "as_tensor2",
    "concat",
    "l2_norm",
    "matmul",
    "mlp_forward",
    "numeric_grad",
    "relative_error",
    "relu",
    "softmax_row",
    "softmax_rows",
]
