"""
Losses module.
The weighted collocation loss, residual-based attention updates and
tangent-kernel trace weights.
"""

from dataclasses import dataclass, replace
from typing import Dict, Tuple

import torch

from autodiff.engine import eval_with_input_derivs, param_jacobian
from config.config import Config
from models.networks import NetworkSpec
from models.params import ParamVector
from pdes.base_problem import BaseProblem, BcKind, IcOrder, residual_at
from training.collocation import CollocationSet
from utils.exceptions import NonFiniteLossError, ZeroTraceError
from utils.logger import get_logger

logger = get_logger(__name__)


@dataclass(frozen=True)
class LossWeights:
    res: float = Config.LAMBDA_RES
    bc: float = Config.LAMBDA_BC
    ic: float = Config.LAMBDA_IC

    def __post_init__(self):
        if min(self.res, self.bc, self.ic) < 0:
            raise ValueError(f"Loss weights must be >= 0, got {self}")


@dataclass(frozen=True)
class LossTerms:
    total: torch.Tensor
    res: torch.Tensor
    bc: torch.Tensor
    ic: torch.Tensor

    def as_floats(self) -> Dict[str, float]:
        return {"loss": self.total.item(), "L_res": self.res.item(),
                "L_bc": self.bc.item(), "L_ic": self.ic.item()}


def interior_residuals(problem: BaseProblem, spec: NetworkSpec, params: ParamVector,
                       points: torch.Tensor) -> torch.Tensor:
    state = eval_with_input_derivs(spec, params, points, problem.RESIDUAL_NEEDS)
    return residual_at(problem, state, points)


def boundary_residuals(problem: BaseProblem, spec: NetworkSpec, params: ParamVector,
                       colloc: CollocationSet) -> torch.Tensor:
    """
    Concatenated boundary residuals in batch order.

    Dirichlet: u - g. Periodic: u(lo) - u(hi). Robin: u_x + h u - g.
    """
    pieces = []
    for batch in colloc.boundary:
        bc = batch.condition
        state = eval_with_input_derivs(spec, params, batch.points, bc.needs)
        if bc.kind == BcKind.PERIODIC:
            partner = eval_with_input_derivs(spec, params, batch.partner, bc.needs)
            pieces.append(state.u - partner.u)
        elif bc.kind == BcKind.ROBIN:
            pieces.append(state[f"u_{bc.axis}"] + bc.robin_coeff * state.u - bc.target(batch.points))
        else:
            pieces.append(state.u - bc.target(batch.points))
    if not pieces:
        return torch.zeros(0, dtype=torch.float64)
    return torch.cat(pieces)


def initial_residuals(problem: BaseProblem, spec: NetworkSpec, params: ParamVector,
                      colloc: CollocationSet) -> torch.Tensor:
    """Concatenated initial residuals: u - u0, then u_t - v0 for second-order-in-time problems."""
    conditions = problem.initial_conditions()
    if not conditions:
        return torch.zeros(0, dtype=torch.float64)
    needs = set()
    for ic in conditions:
        needs |= ic.needs
    state = eval_with_input_derivs(spec, params, colloc.initial, needs)
    pieces = []
    for ic in conditions:
        value = state.u_t if ic.order == IcOrder.TIME_DERIVATIVE else state.u
        pieces.append(value - ic.target(colloc.initial))
    return torch.cat(pieces)


def _half_mean_square(r: torch.Tensor) -> torch.Tensor:
    if r.numel() == 0:
        return torch.zeros((), dtype=torch.float64)
    return 0.5 * (r ** 2).mean()


def loss_terms(problem: BaseProblem, spec: NetworkSpec, params: ParamVector, colloc: CollocationSet,
               weights: LossWeights = None, rba: bool = False) -> LossTerms:
    """
    Weighted collocation loss with its components.

    Each component is half the mean of its squared residuals. With rba the
    interior residuals are multiplied by the per-point weights before squaring.

    Raises:
        NonFiniteLossError: If the total is NaN or infinite
    """
    weights = weights or LossWeights()
    r = interior_residuals(problem, spec, params, colloc.interior)
    if rba:
        r = colloc.rba_weights * r
    l_res = _half_mean_square(r)
    l_bc = _half_mean_square(boundary_residuals(problem, spec, params, colloc))
    l_ic = _half_mean_square(initial_residuals(problem, spec, params, colloc))
    total = weights.res * l_res + weights.bc * l_bc + weights.ic * l_ic
    if not torch.isfinite(total):
        raise NonFiniteLossError(f"{problem}: loss is {total.item()}")
    return LossTerms(total=total, res=l_res, bc=l_bc, ic=l_ic)


def pinn_loss(problem: BaseProblem, spec: NetworkSpec, params: ParamVector, colloc: CollocationSet,
              weights: LossWeights = None, rba: bool = False) -> torch.Tensor:
    """
    Scalar training loss lambda_res L_res + lambda_bc L_bc + lambda_ic L_ic.

    Args:
        problem: Benchmark problem
        spec: Network spec
        params: Parameter vector
        colloc: Collocation set
        weights: Loss weights (defaults to 1/100/100)
        rba: Apply residual-based attention weights

    Returns:
        Scalar tensor
    """
    return loss_terms(problem, spec, params, colloc, weights, rba).total


def rba_update(rba_weights: torch.Tensor, residuals: torch.Tensor,
               gamma: float = Config.RBA_GAMMA, eta: float = Config.RBA_ETA) -> torch.Tensor:
    """
    One residual-based attention step: lambda <- gamma lambda + eta |r| / max|r|.

    The additive term is skipped when every residual is zero. Results are
    clamped to the fixed-point bound eta / (1 - gamma).

    Args:
        rba_weights: Current per-point weights
        residuals: Interior residuals aligned with the weights
        gamma: Decay
        eta: Step

    Returns:
        Updated weights (detached)
    """
    magnitude = residuals.detach().abs()
    peak = magnitude.max() if magnitude.numel() else torch.zeros(())
    updated = gamma * rba_weights
    if peak > 0:
        updated = updated + eta * magnitude / peak
    return updated.clamp(max=eta / (1 - gamma))


def trace_weights(trace_bc: float, trace_res: float,
                  min_trace: float = Config.WPINN_MIN_TRACE) -> Tuple[float, float]:
    """
    (lambda_b, lambda_r) = (Tr(K) / Tr(K_uu), Tr(K) / Tr(K_rr)) with Tr(K) their sum.

    Raises:
        ZeroTraceError: If either trace is below min_trace
    """
    if trace_bc < min_trace or trace_res < min_trace:
        raise ZeroTraceError(f"Tangent-kernel trace too small: bc={trace_bc:.3e}, res={trace_res:.3e}")
    total = trace_bc + trace_res
    return total / trace_bc, total / trace_res


def kernel_trace(fn, params: ParamVector, full_count: int) -> float:
    """Sum of squared per-point parameter gradients, rescaled from the sample to full_count points."""
    jac = param_jacobian(fn, params)
    if jac.shape[0] == 0:
        return 0.0
    return (jac ** 2).sum().item() * full_count / jac.shape[0]


def wpinn_weights(problem: BaseProblem, spec: NetworkSpec, params: ParamVector, colloc: CollocationSet,
                  n_points: int = Config.WPINN_TRACE_POINTS) -> Tuple[float, float]:
    """
    Tangent-kernel trace weights for boundary/initial and residual terms.

    Traces are computed on an evenly spaced subsample and rescaled to the full
    point counts.

    Args:
        problem: Benchmark problem
        spec: Network spec
        params: Parameter vector
        colloc: Collocation set
        n_points: Subsample size per group

    Returns:
        (lambda_b, lambda_r)

    Raises:
        ZeroTraceError: If a trace is below the threshold
    """
    sample = colloc.subset(n_points)
    n_constraint = colloc.n_boundary + colloc.initial.shape[0] * len(problem.initial_conditions())

    def constraint_fn(p):
        return torch.cat([boundary_residuals(problem, spec, p, sample),
                          initial_residuals(problem, spec, p, sample)])

    def residual_fn(p):
        return interior_residuals(problem, spec, p, sample.interior)

    trace_bc = kernel_trace(constraint_fn, params, n_constraint)
    trace_res = kernel_trace(residual_fn, params, colloc.interior.shape[0])
    lambda_b, lambda_r = trace_weights(trace_bc, trace_res)
    logger.debug(f"W-PINN traces bc={trace_bc:.4e} res={trace_res:.4e} -> "
                 f"lambda_b={lambda_b:.4e} lambda_r={lambda_r:.4e}")
    return lambda_b, lambda_r


class LossClosure:
    """
    Training loss of one run as a function of the parameters.

    Owns the mutable loss state: RBA weights (inside the collocation set) and
    the current loss weights, which W-PINN replaces.
    """

    def __init__(self, problem: BaseProblem, spec: NetworkSpec, colloc: CollocationSet,
                 weights: LossWeights = None, rba: bool = False, wpinn: bool = False):
        self.problem = problem
        self.spec = spec
        self.colloc = colloc
        self.weights = weights or LossWeights()
        self.rba = rba
        self.wpinn = wpinn
        self.last_terms: Dict[str, float] = {}

    def __call__(self, params: ParamVector) -> torch.Tensor:
        terms = loss_terms(self.problem, self.spec, params, self.colloc, self.weights, self.rba)
        self.last_terms = terms.as_floats()
        return terms.total

    def terms(self, params: ParamVector) -> Dict[str, float]:
        return loss_terms(self.problem, self.spec, params, self.colloc, self.weights, self.rba).as_floats()

    def update_rba(self, params: ParamVector):
        r = interior_residuals(self.problem, self.spec, params, self.colloc.interior)
        self.colloc.rba_weights = rba_update(self.colloc.rba_weights, r)

    def update_wpinn(self, params: ParamVector):
        lambda_b, lambda_r = wpinn_weights(self.problem, self.spec, params, self.colloc)
        self.weights = replace(self.weights, res=lambda_r, bc=lambda_b, ic=lambda_b)

    def state_dict(self) -> Dict:
        return {"rba_weights": self.colloc.rba_weights.clone(), "weights": self.weights}

    def load_state_dict(self, state: Dict):
        self.colloc.rba_weights = state["rba_weights"].clone()
        self.weights = state["weights"]
