"""Minimal reverse-mode autodiff core and the layers built on it."""

from .complex import ComplexTensor, complex_conv2d, complex_dropout, complex_elu
from .functional import (
    conv2d,
    conv_output_size,
    cross_entropy,
    dropout,
    l2_normalize,
    layer_norm,
    linear,
    multi_head_attention,
)
from .gradcheck import grad_check
from .module import Module
from .optim import Adam, adam_step
from .tensor import (
    Parameter,
    Tensor,
    arccos,
    as_tensor,
    clip,
    concat,
    cos,
    elu,
    exp,
    gelu,
    log,
    log_softmax,
    matmul,
    no_grad,
    pad,
    set_check_finite,
    softmax,
    softplus,
    sqrt,
)

__all__ = [
    "Adam",
    "ComplexTensor",
    "Module",
    "Parameter",
    "Tensor",
    "adam_step",
    "arccos",
    "as_tensor",
    "clip",
    "complex_conv2d",
    "complex_dropout",
    "complex_elu",
    "concat",
    "conv2d",
    "conv_output_size",
    "cos",
    "cross_entropy",
    "dropout",
    "elu",
    "exp",
    "gelu",
    "grad_check",
    "l2_normalize",
    "layer_norm",
    "linear",
    "log",
    "log_softmax",
    "matmul",
    "multi_head_attention",
    "no_grad",
    "pad",
    "set_check_finite",
    "softmax",
    "softplus",
    "sqrt",
]
