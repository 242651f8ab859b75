"""terraseg: U-Net binary segmentation of satellite imagery, trained from scratch on numpy."""
from .kernels import BACKEND
from .model import UNetConfig, forward, init_params, param_shapes
from .tensor import Node, backward, grad_check, no_grad, precision

__all__ = ["BACKEND", "Node", "UNetConfig", "backward", "forward", "grad_check", "init_params",
           "no_grad", "param_shapes", "precision"]
__version__ = "0.1.0"
