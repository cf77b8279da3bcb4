"""Numerical engine: tensors, GRU encoders, loss, Adam, and verification."""

from .gradcheck import finite_difference_check
from .gru import (
    GruLayerParams,
    bigru_encode,
    bigru_forward,
    gru_cell,
    gru_cell_batch,
    init_gru_params,
    sequence_tensors,
)
from .optim import Adam, LrSchedule, schedule_epoch
from .serialize import CheckpointError, load_tensors, save_tensors
from .tensor import (
    BCE_EPS,
    EmptySequence,
    LengthMismatch,
    ShapeMismatch,
    Tensor,
    add,
    add_n,
    backward,
    bce_loss,
    clip,
    concat,
    constant,
    gather_rows,
    linear,
    log,
    mask_lerp,
    matmul,
    mul,
    parameter,
    rows,
    scale,
    sigmoid,
    sub,
    sum_all,
    tanh,
    zero_grads,
)

__all__ = [
    "Adam",
    "BCE_EPS",
    "CheckpointError",
    "EmptySequence",
    "GruLayerParams",
    "LengthMismatch",
    "LrSchedule",
    "ShapeMismatch",
    "Tensor",
    "add",
    "add_n",
    "backward",
    "bce_loss",
    "bigru_encode",
    "bigru_forward",
    "clip",
    "concat",
    "constant",
    "finite_difference_check",
    "gather_rows",
    "gru_cell",
    "gru_cell_batch",
    "init_gru_params",
    "linear",
    "load_tensors",
    "log",
    "mask_lerp",
    "matmul",
    "mul",
    "parameter",
    "rows",
    "save_tensors",
    "scale",
    "schedule_epoch",
    "sequence_tensors",
    "sigmoid",
    "sub",
    "sum_all",
    "tanh",
    "zero_grads",
]
