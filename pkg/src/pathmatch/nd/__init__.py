"""Differentiable-compute core: Tensor graphs, MLPs, Adam, gradient checks.

Hot loops run through compiled kernels when the extension is built; set
PATHMATCH_PURE_PY to force the numpy fallback (see pathmatch.nd.kernels).
"""

from .gradcheck import grad_check
from .kernels import COMPILED
from .nn import Mlp, gaussian_init, mlp_forward
from .optim import Adam, AdamState, adam_step
from .tensor import Tensor, softmax, topk_rows, topk_select

__all__ = [
    "COMPILED",
    "Adam",
    "AdamState",
    "Mlp",
    "Tensor",
    "adam_step",
    "gaussian_init",
    "grad_check",
    "mlp_forward",
    "softmax",
    "topk_rows",
    "topk_select",
]
