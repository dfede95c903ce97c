"""
Adam optimizer module.
Full-batch Adam on the flat parameter vector with a stepwise exponential lr decay.
"""

import torch

from config.config import Config
from models.params import ParamVector


class AdamState:
    """
    Adam with StepLR: lr(k) = lr0 * decay ** (k // every) after k steps.

    The optimizer owns a leaf copy of the parameter values.
    """

    def __init__(self, params: ParamVector, lr: float = Config.ADAM_LR,
                 betas=Config.ADAM_BETAS, eps: float = Config.ADAM_EPS,
                 decay: float = Config.LR_DECAY, every: int = Config.LR_DECAY_EVERY):
        self.segments = params.segments
        self.values = params.values.detach().clone().requires_grad_(True)
        self.optimizer = torch.optim.Adam([self.values], lr=lr, betas=tuple(betas), eps=eps)
        self.scheduler = torch.optim.lr_scheduler.StepLR(self.optimizer, step_size=every, gamma=decay)
        self.steps = 0

    @property
    def lr(self) -> float:
        return self.optimizer.param_groups[0]["lr"]

    @property
    def params(self) -> ParamVector:
        return ParamVector(self.values.detach().clone(), self.segments)


def adam_step(state: AdamState, grad: torch.Tensor) -> ParamVector:
    """
    Apply one bias-corrected Adam update with the current scheduled lr.

    Args:
        state: Adam state, updated in place
        grad: Gradient at the current values

    Returns:
        Updated parameter vector
    """
    state.values.grad = grad.detach().clone()
    state.optimizer.step()
    state.scheduler.step()
    state.steps += 1
    return state.params
