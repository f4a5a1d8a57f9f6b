"""Minimal sequence-model engine: tape autodiff, LSTM layers driven by
compiled recurrence kernels (with a numpy fallback), MLP heads, and Adam."""

from . import kernels, tensor
from .adam import AdamState
from .checkpoint import load_weights, restore_into, save_weights
from .kernels import BACKEND
from .layers import (
    AccumNet,
    BiLstmStack,
    LstmLayerParams,
    MlpHead,
    accum_net_forward,
    bilstm_forward,
    bilstm_stack_forward,
    gapfiller_stack_forward,
    init_accum_net,
    init_bilstm_stack,
    init_lstm_layer,
    init_mlp_head,
    lstm_layer_forward,
    mlp_forward,
)
from .tensor import Tensor

__all__ = [
    "AccumNet", "AdamState", "BACKEND", "BiLstmStack", "LstmLayerParams",
    "MlpHead", "Tensor", "accum_net_forward", "bilstm_forward",
    "bilstm_stack_forward", "gapfiller_stack_forward", "init_accum_net",
    "init_bilstm_stack", "init_lstm_layer", "init_mlp_head", "kernels",
    "load_weights", "lstm_layer_forward", "mlp_forward", "restore_into",
    "save_weights", "tensor",
]
