"""
Activations module.
Activation kinds with their closed-form first and second derivatives.

Calling a kind applies it through an autograd function whose backward uses the
closed-form derivatives, so input derivatives, parameter gradients and HVPs of a
network all differentiate the activation through d1 and d2.
"""

import math
from enum import Enum

import torch
import torch.nn.functional as F


def _gauss_pdf(x):
    return torch.exp(-0.5 * x ** 2) / math.sqrt(2 * math.pi)


def _gauss_cdf(x):
    return 0.5 * (1 + torch.erf(x / math.sqrt(2)))


class ActivationKind(str, Enum):
    TANH = "tanh"
    SINE = "sine"
    RELU = "relu"
    GELU = "gelu"
    SWISH = "swish"

    def __call__(self, x: torch.Tensor) -> torch.Tensor:
        return _Activation.apply(x, self)

    def d1(self, x: torch.Tensor) -> torch.Tensor:
        return _TABLE[self][1](x)

    def d2(self, x: torch.Tensor) -> torch.Tensor:
        return _TABLE[self][2](x)


class _Activation(torch.autograd.Function):
    @staticmethod
    def forward(ctx, x, kind):
        ctx.save_for_backward(x)
        ctx.kind = kind
        return _TABLE[kind][0](x)

    @staticmethod
    def backward(ctx, grad):
        x, = ctx.saved_tensors
        return grad * _Slope.apply(x, ctx.kind), None


class _Slope(torch.autograd.Function):
    """d1 with d2 as its derivative; higher orders differentiate the d2 expression."""

    @staticmethod
    def forward(ctx, x, kind):
        ctx.save_for_backward(x)
        ctx.kind = kind
        return kind.d1(x)

    @staticmethod
    def backward(ctx, grad):
        x, = ctx.saved_tensors
        return grad * ctx.kind.d2(x), None


def _swish_d1(x):
    s = torch.sigmoid(x)
    return s + x * s * (1 - s)


def _swish_d2(x):
    s = torch.sigmoid(x)
    return s * (1 - s) * (2 + x * (1 - 2 * s))


# kind -> (map, first derivative, second derivative)
_TABLE = {
    ActivationKind.TANH: (torch.tanh,
                          lambda x: 1 - torch.tanh(x) ** 2,
                          lambda x: -2 * torch.tanh(x) * (1 - torch.tanh(x) ** 2)),
    ActivationKind.SINE: (torch.sin, torch.cos, lambda x: -torch.sin(x)),
    ActivationKind.RELU: (F.relu,
                          lambda x: (x > 0).to(x.dtype),
                          torch.zeros_like),
    ActivationKind.GELU: (F.gelu,
                          lambda x: _gauss_cdf(x) + x * _gauss_pdf(x),
                          lambda x: _gauss_pdf(x) * (2 - x ** 2)),
    ActivationKind.SWISH: (F.silu, _swish_d1, _swish_d2),
}
