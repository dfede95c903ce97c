"""
Differentiation engine module.
Input derivatives of u, parameter gradients of a scalar loss, Hessian-vector
products and Jacobians, all exact through torch.autograd.
"""

from typing import Callable, Dict, Iterable, Optional

import torch

from autodiff.bundle import DERIVATIVE_AXES, DERIVATIVE_NAMES, DerivativeBundle
from models.networks import NetworkSpec, get_network
from models.params import ParamVector
from utils.exceptions import NonFiniteLossError, UnsupportedDerivativeError
from utils.logger import get_logger

logger = get_logger(__name__)

LossClosureFn = Callable[[ParamVector], torch.Tensor]


def _grad_or_zeros(output: torch.Tensor, wrt: torch.Tensor, create_graph: bool) -> torch.Tensor:
    if not output.requires_grad:
        return torch.zeros_like(wrt)
    grad = torch.autograd.grad(output, wrt, torch.ones_like(output),
                               create_graph=create_graph, allow_unused=True)[0]
    return torch.zeros_like(wrt) if grad is None else grad


def eval_with_input_derivs(spec: NetworkSpec, params: ParamVector, points: torch.Tensor,
                           needs: Iterable[str], create_graph: bool = True) -> DerivativeBundle:
    """
    Evaluate u and the requested input derivatives at a batch of points.

    Rows are independent through the whole network, so derivatives of the
    summed output with respect to one input column are the per-point derivatives.

    Args:
        spec: Network spec
        params: Parameter vector
        points: Tensor of shape (n, len(axes))
        needs: Derivative names, e.g. {"u", "u_x", "u_xx"}
        create_graph: Keep the graph so parameter gradients can flow through

    Returns:
        DerivativeBundle with the requested entries populated

    Raises:
        UnsupportedDerivativeError: If a name is unknown or its axis is not a network input
    """
    network = get_network(spec)
    needs = set(needs) | {"u"}
    wanted_axes = set()
    for name in needs:
        if name not in DERIVATIVE_NAMES:
            raise UnsupportedDerivativeError(f"Unknown derivative: {name}")
        if name == "u":
            continue
        axis, _ = DERIVATIVE_AXES[name]
        if axis not in network.axes:
            raise UnsupportedDerivativeError(
                f"{name} requested but {network} only takes inputs {network.axes}"
            )
        wanted_axes.add(axis)

    columns = []
    for i, axis in enumerate(network.axes):
        column = points[:, i].detach()
        if axis in wanted_axes:
            column = column.clone().requires_grad_(True)
        columns.append(column)
    u = network.forward(params, torch.stack(columns, dim=1))

    entries: Dict[str, torch.Tensor] = {"u": u}
    for axis in sorted(wanted_axes):
        column = columns[network.axes.index(axis)]
        first = _grad_or_zeros(u, column, create_graph=True)
        if f"u_{axis}" in needs:
            entries[f"u_{axis}"] = first
        if f"u_{axis}{axis}" in needs:
            entries[f"u_{axis}{axis}"] = _grad_or_zeros(first, column, create_graph=create_graph)
    return DerivativeBundle(**entries)


def _leaf(params: ParamVector) -> ParamVector:
    return params.with_values(params.values.detach().clone().requires_grad_(True))


def loss_gradient(closure: LossClosureFn, params: ParamVector):
    """
    Evaluate a scalar loss and its exact gradient.

    Args:
        closure: Maps a ParamVector to a scalar tensor
        params: Point of evaluation

    Returns:
        (loss as float, gradient tensor of shape (len(params),))

    Raises:
        NonFiniteLossError: If the loss or the gradient is NaN or infinite
    """
    leaf = _leaf(params)
    loss = closure(leaf)
    if not torch.isfinite(loss):
        raise NonFiniteLossError(f"Loss is {loss.item()}")
    grad = _grad_or_zeros(loss, leaf.values, create_graph=False)
    if not torch.isfinite(grad).all():
        raise NonFiniteLossError("Gradient has non-finite entries")
    return loss.item(), grad.detach()


class HvpOperator:
    """
    Hessian-vector products at a fixed point.

    The gradient graph is built once and reused for every product.
    """

    def __init__(self, closure: LossClosureFn, params: ParamVector):
        self.params = _leaf(params)
        self.loss = closure(self.params)
        if not torch.isfinite(self.loss):
            raise NonFiniteLossError(f"Loss is {self.loss.item()}")
        self.grad = torch.autograd.grad(self.loss, self.params.values, create_graph=True, allow_unused=True)[0]
        if self.grad is None:
            self.grad = torch.zeros_like(self.params.values)

    @property
    def dim(self) -> int:
        return len(self.params)

    def __call__(self, v: torch.Tensor) -> torch.Tensor:
        if not self.grad.requires_grad:
            return torch.zeros_like(v)
        hv = torch.autograd.grad(self.grad, self.params.values, grad_outputs=v,
                                 retain_graph=True, allow_unused=True)[0]
        if hv is None:
            return torch.zeros_like(v)
        if not torch.isfinite(hv).all():
            raise NonFiniteLossError("Hessian-vector product has non-finite entries")
        return hv.detach()


def hvp(closure: LossClosureFn, params: ParamVector, v: torch.Tensor) -> torch.Tensor:
    """
    Exact H v by double backward.

    Args:
        closure: Maps a ParamVector to a scalar tensor
        params: Point of evaluation
        v: Direction, shape (len(params),)

    Returns:
        Tensor of shape (len(params),)

    Raises:
        NonFiniteLossError: If v, the loss or the product is not finite
    """
    if not torch.isfinite(v).all():
        raise NonFiniteLossError("Direction has non-finite entries")
    return HvpOperator(closure, params)(v)


def dense_hessian(closure: LossClosureFn, params: ParamVector) -> torch.Tensor:
    """Full Hessian assembled column by column from products with basis vectors."""
    op = HvpOperator(closure, params)
    eye = torch.eye(op.dim, dtype=torch.float64)
    columns = [op(eye[i]) for i in range(op.dim)]
    return torch.stack(columns, dim=1)


def param_jacobian(fn: Callable[[ParamVector], torch.Tensor], params: ParamVector,
                   create_graph: bool = False) -> torch.Tensor:
    """
    Jacobian of a vector-valued function of the parameters.

    fn may itself differentiate with respect to its inputs (residuals do).

    Args:
        fn: Maps a ParamVector to a tensor of shape (n,)
        params: Point of evaluation
        create_graph: Keep the graph of the Jacobian

    Returns:
        Tensor of shape (n, len(params))
    """
    return torch.autograd.functional.jacobian(
        lambda values: fn(params.with_values(values)),
        params.values.detach(),
        create_graph=create_graph,
    )


def finite_difference_gradient(closure: LossClosureFn, params: ParamVector,
                               step: float = 1e-6, indices: Optional[Iterable[int]] = None) -> torch.Tensor:
    """
    Central-difference gradient, used to cross-check the exact one.

    Args:
        closure: Maps a ParamVector to a scalar tensor
        params: Point of evaluation
        step: Difference step
        indices: Coordinates to probe (all if not provided)

    Returns:
        Tensor of shape (len(params),), zero outside the probed coordinates
    """
    base = params.values.detach()
    out = torch.zeros_like(base)
    for i in (range(len(params)) if indices is None else indices):
        e = torch.zeros_like(base)
        e[i] = step
        plus = closure(params.with_values(base + e)).detach()
        minus = closure(params.with_values(base - e)).detach()
        out[i] = (plus - minus) / (2 * step)
    return out
