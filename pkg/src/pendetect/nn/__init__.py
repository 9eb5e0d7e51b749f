"""From-scratch numpy neural network: conv, recurrent cells, Adam, gradcheck."""

from .gradcheck import gradient_check
from .layers import CELLS, Conv1d, DenseSigmoid, Recurrent, cell_step, sigmoid
from .losses import bce_logit_grad, bce_loss, bce_loss_grad
from .model import (
    Conv1dSpec,
    ModelSpec,
    RecurrentSpec,
    SequenceClassifier,
    closed_form_parameter_count,
    load_checkpoint,
    spec_hash,
)
from .optim import Adam
from .train import LABEL_TO_Y, TrainConfig, TrainResult, mean_eval_loss, train_model, train_step

__all__ = [
    "CELLS",
    "Conv1d",
    "DenseSigmoid",
    "Recurrent",
    "cell_step",
    "sigmoid",
    "bce_logit_grad",
    "bce_loss",
    "bce_loss_grad",
    "Conv1dSpec",
    "ModelSpec",
    "RecurrentSpec",
    "SequenceClassifier",
    "closed_form_parameter_count",
    "load_checkpoint",
    "spec_hash",
    "Adam",
    "LABEL_TO_Y",
    "TrainConfig",
    "TrainResult",
    "mean_eval_loss",
    "train_model",
    "train_step",
    "gradient_check",
]
