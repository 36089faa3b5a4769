"""From-scratch numpy network primitives and the two classifier architectures."""
from .adam import AdamState, adam_step
from .container import load_model, save_model
from .layers import (
    INFER,
    TRAIN,
    BatchNorm,
    DenseLayer,
    batchnorm_backward,
    batchnorm_forward,
    dense_backward,
    dense_forward,
    dropout_forward,
    softmax_cross_entropy,
)
from .lstm import LstmCell, StaleCacheError, lstm_backward, lstm_forward
from .models import Architecture, BaselineClassifier, LstmClassifier, Model, init_model, param_count
