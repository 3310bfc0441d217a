from . import functional, spec
from .layers import Network, init_params, layer_apply
from .losses import loss_eval
from .optim import SGD, Adam, OptimizerState, optimizer_step
from .spec import LayerSpec, count_params_flops
from .tensor import Tensor, concatenate

__all__ = [
    "Adam", "LayerSpec", "Network", "OptimizerState", "SGD", "Tensor", "concatenate",
    "count_params_flops", "functional", "init_params", "layer_apply", "loss_eval",
    "optimizer_step", "spec",
]
