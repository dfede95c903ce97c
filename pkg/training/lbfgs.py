"""
L-BFGS module.
Two-loop recursion on flat tensors with a strong-Wolfe line search and stall detection.
"""

import warnings
from collections import deque
from dataclasses import dataclass
from typing import Callable, Deque, Dict, Optional, Tuple

import numpy as np
import torch
from scipy.optimize import line_search

from config.config import Config
from utils.exceptions import NonFiniteLossError
from utils.logger import get_logger

logger = get_logger(__name__)

# values -> (loss, gradient)
ValueAndGrad = Callable[[torch.Tensor], Tuple[float, torch.Tensor]]

ZERO_GRADIENT = "zero_gradient"
LINE_SEARCH_FAILED = "line_search_failed"
ZERO_STEP = "zero_step"
NO_PROGRESS = "no_progress"
NON_FINITE = "non_finite"


class _LineSearchAbort(Exception):
    pass


class LbfgsState:
    """Curvature pairs, the cached loss/gradient at the current point and the stall window."""

    def __init__(self, memory: int = Config.LBFGS_MEMORY, c1: float = Config.LBFGS_C1,
                 c2: float = Config.LBFGS_C2, tol: float = Config.LBFGS_TOL,
                 max_linesearch: int = Config.LBFGS_MAX_LINESEARCH,
                 stall_window: int = Config.STALL_WINDOW, stall_rtol: float = Config.STALL_RTOL):
        self.memory = memory
        self.c1 = c1
        self.c2 = c2
        self.tol = tol
        self.max_linesearch = max_linesearch
        self.stall_window = stall_window
        self.stall_rtol = stall_rtol
        self.pairs: Deque[Tuple[torch.Tensor, torch.Tensor, float]] = deque(maxlen=memory)
        self.history: Deque[float] = deque(maxlen=stall_window + 1)
        self.loss: Optional[float] = None
        self.grad: Optional[torch.Tensor] = None
        self.iterations = 0

    def invalidate(self):
        """Drop the cached loss/gradient after the loss function itself changed."""
        self.loss = None
        self.grad = None

    def ensure(self, fun: "ValueAndGrad", values: torch.Tensor) -> Tuple[float, torch.Tensor]:
        """Loss and gradient at the current point, evaluated once."""
        if self.loss is None:
            self.loss, self.grad = fun(values)
            if not self.history:
                self.history.append(self.loss)
        return self.loss, self.grad


@dataclass
class LbfgsResult:
    values: torch.Tensor
    loss: float
    grad: torch.Tensor
    step_size: float = 0.0
    stall: Optional[str] = None


def two_loop_direction(grad: torch.Tensor, pairs) -> torch.Tensor:
    """
    Search direction -H g from the stored pairs, H0 = s'y / y'y of the newest pair.

    Without pairs: -g scaled to unit l1 norm when larger.
    """
    if not pairs:
        return -grad * min(1.0, 1.0 / grad.abs().sum().item())
    q = grad.clone()
    alphas = []
    for s, y, rho in reversed(pairs):
        a = rho * torch.dot(s, q)
        alphas.append(a)
        q = q - a * y
    s, y, _ = pairs[-1]
    r = q * (torch.dot(s, y) / torch.dot(y, y))
    for (s, y, rho), a in zip(pairs, reversed(alphas)):
        b = rho * torch.dot(y, r)
        r = r + s * (a - b)
    return -r


def lbfgs_step(state: LbfgsState, fun: ValueAndGrad, values: torch.Tensor) -> LbfgsResult:
    """
    One L-BFGS iteration.

    Line-search failures and non-finite trial points end the step with a stall
    reason instead of raising.

    Args:
        state: L-BFGS state, updated in place
        fun: Loss and gradient at a value vector
        values: Current point

    Returns:
        LbfgsResult; stall is None when the step was accepted and progress continues
    """
    f0, g0 = state.ensure(fun, values)

    if g0.abs().max().item() <= state.tol:
        return LbfgsResult(values, f0, g0, stall=ZERO_GRADIENT)

    direction = two_loop_direction(g0, state.pairs)
    if torch.dot(direction, g0).item() >= 0:
        logger.debug("L-BFGS direction not descending, dropping curvature pairs")
        state.pairs.clear()
        direction = two_loop_direction(g0, state.pairs)

    cache: Dict[bytes, Tuple[float, np.ndarray]] = {}

    def evaluate(x: np.ndarray) -> Tuple[float, np.ndarray]:
        key = x.tobytes()
        if key not in cache:
            try:
                f, g = fun(torch.from_numpy(x.copy()))
            except NonFiniteLossError as e:
                raise _LineSearchAbort(str(e)) from e
            cache[key] = (f, g.numpy())
        return cache[key]

    x0 = values.detach().numpy()
    d = direction.numpy()
    g0_np = g0.numpy()
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            alpha, _, _, f_new, _, _ = line_search(
                lambda x: evaluate(x)[0], lambda x: evaluate(x)[1], x0, d,
                gfk=g0_np, old_fval=f0, c1=state.c1, c2=state.c2, maxiter=state.max_linesearch,
            )
    except _LineSearchAbort as e:
        logger.warning(f"L-BFGS line search hit a non-finite loss: {e}")
        return LbfgsResult(values, f0, g0, stall=NON_FINITE)

    if alpha is None:
        return LbfgsResult(values, f0, g0, stall=LINE_SEARCH_FAILED)

    x_new = x0 + alpha * d
    f_new, g_new_np = evaluate(x_new)
    slope0 = float(np.dot(g0_np, d))
    armijo = f_new <= f0 + state.c1 * alpha * slope0
    curvature = abs(float(np.dot(g_new_np, d))) <= state.c2 * abs(slope0)
    if not (armijo and curvature):
        return LbfgsResult(values, f0, g0, stall=LINE_SEARCH_FAILED)

    new_values = torch.from_numpy(x_new.copy())
    g_new = torch.from_numpy(g_new_np.copy())
    s = new_values - values.detach()
    if s.abs().max().item() == 0.0:
        return LbfgsResult(values, f0, g0, stall=ZERO_STEP)

    y = g_new - g0
    sy = torch.dot(s, y).item()
    if sy > 0:
        state.pairs.append((s, y, 1.0 / sy))

    state.loss, state.grad = f_new, g_new
    state.iterations += 1
    state.history.append(f_new)

    stall = None
    if len(state.history) > state.stall_window:
        oldest = state.history[0]
        if oldest - f_new <= state.stall_rtol * abs(oldest):
            stall = NO_PROGRESS
    return LbfgsResult(new_values, f_new, g_new, step_size=float(alpha), stall=stall)
