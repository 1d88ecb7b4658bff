from .gradcheck import GradReport, check_gradients, numeric_gradient, relative_error
from .nn import (
    RunningStats,
    activate,
    conv1d,
    conv_output_length,
    dense,
    dropout,
    glorot,
    grl,
    init_lstm,
    lstm_cell,
    lstm_sequence,
    maxpool1d,
    normalize,
    same_padding,
)
from .tensor import (
    NonFiniteError,
    Tensor,
    add,
    concat,
    div,
    exp,
    leaky_relu,
    log,
    matmul,
    mean,
    mul,
    relu,
    reshape,
    sigmoid,
    softmax,
    sqrt,
    stack,
    sub,
    tabs,
    tanh,
    transpose,
    tsum,
)
