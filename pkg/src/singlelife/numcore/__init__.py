"""Dense tensors, forward primitives, reverse-mode gradients, grad checking."""

from .gradcheck import GradCheckReport, grad_check
from .ops import (absolute, add, affine, constant, gather_rows, gelu, layer_norm, leaf,
                  matmul, mean_all, mlp_gelu, mse, mul, multi_head_attention, reshape,
                  scale, scatter_rows, softmax, softplus, square, sub, sum_all,
                  transpose)
from .tensor import Tensor, backward, gradients

__all__ = [
    "Tensor", "backward", "gradients", "grad_check", "GradCheckReport",
    "absolute", "add", "affine", "constant", "gather_rows", "gelu", "layer_norm",
    "leaf", "matmul", "mean_all", "mlp_gelu", "mse", "mul", "multi_head_attention",
    "reshape", "scale", "scatter_rows", "softmax", "softplus", "square", "sub",
    "sum_all", "transpose",
]
