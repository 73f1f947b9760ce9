"""Regressors compared by this package: closed-form linear, feed-forward, recurrent."""

from .linear import LRParams, lr_fit, lr_parameter_count, lr_predict
from .mlp import MLPParams, mlp_backward, mlp_init, mlp_parameter_count, mlp_predict
from .lstm import LSTMLayer, LSTMParams, lstm_backward, lstm_init, lstm_parameter_count, lstm_predict
from .training import TrainConfig, train_lstm, train_mlp
from .checkpoint import Checkpoint, load_checkpoint, predict_design_matrix, save_checkpoint

__all__ = [
    "LRParams", "lr_fit", "lr_parameter_count", "lr_predict",
    "MLPParams", "mlp_backward", "mlp_init", "mlp_parameter_count", "mlp_predict",
    "LSTMLayer", "LSTMParams", "lstm_backward", "lstm_init", "lstm_parameter_count", "lstm_predict",
    "TrainConfig", "train_lstm", "train_mlp",
    "Checkpoint", "load_checkpoint", "predict_design_matrix", "save_checkpoint",
]
