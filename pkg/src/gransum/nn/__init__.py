from .core import (
    Adam,
    AdamConfig,
    ParameterStore,
    ShapeError,
    TrainingError,
    add_bigru_params,
    add_gru_params,
    add_transformer_params,
    bigru_backward,
    bigru_forward,
    cross_entropy_from_probs,
    embed_bag_backward,
    embed_bag_forward,
    gru_backward,
    gru_forward,
    layer_norm_backward,
    layer_norm_forward,
    linear_backward,
    linear_forward,
    masked_softmax,
    sigmoid,
    sigmoid_bce,
    sinusoidal_encoding,
    softmax_backward,
    train_step,
    transformer_backward,
    transformer_forward,
)
from .checkpoint import Checkpoint, CheckpointError, load_checkpoint, save_checkpoint
from .gradcheck import finite_difference_check

__all__ = [
    "Adam",
    "AdamConfig",
    "Checkpoint",
    "CheckpointError",
    "ParameterStore",
    "ShapeError",
    "TrainingError",
    "add_bigru_params",
    "add_gru_params",
    "add_transformer_params",
    "bigru_backward",
    "bigru_forward",
    "cross_entropy_from_probs",
    "embed_bag_backward",
    "embed_bag_forward",
    "finite_difference_check",
    "gru_backward",
    "gru_forward",
    "layer_norm_backward",
    "layer_norm_forward",
    "linear_backward",
    "linear_forward",
    "load_checkpoint",
    "masked_softmax",
    "save_checkpoint",
    "sigmoid",
    "sigmoid_bce",
    "sinusoidal_encoding",
    "softmax_backward",
    "train_step",
    "transformer_backward",
    "transformer_forward",
]
