from .gradcheck import GradCheckReport, grad_check, relative_error
from .layers import (
    activation,
    bigru,
    conv1d,
    dense,
    dropout,
    gru,
    linear,
    mean_pool,
    mlp,
    same_padding,
)
from .optim import Adam, step_lr
from .params import ParamSet
from .tensor import (
    Tensor,
    as_tensor,
    backward,
    concat,
    exp,
    l2_normalize,
    log,
    logsumexp,
    matmul,
    no_grad,
    relu,
    sigmoid,
    softmax,
    square,
    stack,
    tanh,
)

__all__ = [
    "Adam",
    "GradCheckReport",
    "ParamSet",
    "Tensor",
    "activation",
    "as_tensor",
    "backward",
    "bigru",
    "concat",
    "conv1d",
    "dense",
    "dropout",
    "exp",
    "grad_check",
    "gru",
    "l2_normalize",
    "linear",
    "log",
    "logsumexp",
    "matmul",
    "mean_pool",
    "mlp",
    "no_grad",
    "relative_error",
    "relu",
    "same_padding",
    "sigmoid",
    "softmax",
    "square",
    "stack",
    "step_lr",
    "tanh",
]
