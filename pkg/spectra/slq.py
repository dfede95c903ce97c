"""
Stochastic Lanczos quadrature module.
Spectral density of the loss Hessian from Hessian-vector products.
"""

from dataclasses import dataclass, field
from typing import Callable, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
import torch
from scipy.linalg import eigh_tridiagonal

from autodiff.engine import HvpOperator, LossClosureFn
from config.config import Config
from models.params import ParamVector
from utils.helpers import SeedHelper
from utils.logger import get_logger

logger = get_logger(__name__)

MatVec = Callable[[torch.Tensor], torch.Tensor]


@dataclass(frozen=True)
class SlqConfig:
    n_probes: int = Config.SLQ_PROBES
    steps: int = Config.SLQ_STEPS
    seed: int = 0
    bandwidth_fraction: float = Config.SLQ_BANDWIDTH_FRACTION
    breakdown_tol: float = Config.SLQ_BREAKDOWN_TOL


@dataclass
class SpectralDensity:
    """Ritz nodes and weights per probe; each probe's weights sum to 1."""

    probes: List[Tuple[np.ndarray, np.ndarray]] = field(default_factory=list)
    bandwidth_fraction: float = Config.SLQ_BANDWIDTH_FRACTION

    @property
    def lambda_max(self) -> float:
        return max(float(nodes.max()) for nodes, _ in self.probes)

    @property
    def lambda_min(self) -> float:
        return min(float(nodes.min()) for nodes, _ in self.probes)

    def mass_above(self, threshold: float) -> float:
        """Fraction of the spectrum above a threshold, averaged over probes."""
        return float(np.mean([weights[nodes > threshold].sum() for nodes, weights in self.probes]))

    def to_frame(self) -> pd.DataFrame:
        rows = [{"node": node, "weight": weight, "probe": j}
                for j, (nodes, weights) in enumerate(self.probes)
                for node, weight in zip(nodes, weights)]
        return pd.DataFrame(rows, columns=["node", "weight", "probe"])

    def smoothed(self, n_grid: int = 512, bandwidth: Optional[float] = None) -> pd.DataFrame:
        """
        Gaussian-smoothed density on a regular grid, for plotting only.

        The default bandwidth is a fraction of the observed spectral range.
        """
        lo, hi = self.lambda_min, self.lambda_max
        span = max(hi - lo, 1e-12)
        sigma = bandwidth or self.bandwidth_fraction * span
        grid = np.linspace(lo - 3 * sigma, hi + 3 * sigma, n_grid)
        density = np.zeros_like(grid)
        for nodes, weights in self.probes:
            kernel = np.exp(-0.5 * ((grid[:, None] - nodes[None, :]) / sigma) ** 2)
            density += kernel @ weights / (sigma * np.sqrt(2 * np.pi))
        return pd.DataFrame({"lambda": grid, "rho": density / len(self.probes)})


def lanczos(matvec: MatVec, v0: torch.Tensor, steps: int,
            breakdown_tol: float = Config.SLQ_BREAKDOWN_TOL) -> Tuple[np.ndarray, np.ndarray]:
    """
    Lanczos tridiagonalization with full reorthogonalization.

    Stops early when the next off-diagonal falls below breakdown_tol.

    Args:
        matvec: Symmetric operator
        v0: Start vector (normalized here)
        steps: Maximum Krylov dimension
        breakdown_tol: Breakdown threshold on the off-diagonal

    Returns:
        (diagonal, off-diagonal) of the tridiagonal matrix
    """
    v = v0 / torch.linalg.vector_norm(v0)
    basis = [v]
    alphas, betas = [], []
    w = matvec(v)
    alpha = torch.dot(v, w)
    w = w - alpha * v
    alphas.append(alpha.item())
    for _ in range(1, steps):
        V = torch.stack(basis, dim=1)
        for _ in range(2):
            w = w - V @ (V.T @ w)
        beta = torch.linalg.vector_norm(w)
        if beta.item() < breakdown_tol:
            break
        v_prev, v = v, w / beta
        basis.append(v)
        betas.append(beta.item())
        w = matvec(v) - beta * v_prev
        alpha = torch.dot(v, w)
        w = w - alpha * v
        alphas.append(alpha.item())
    return np.asarray(alphas), np.asarray(betas)


def ritz_quadrature(alphas: np.ndarray, betas: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Gauss quadrature nodes (Ritz values) and weights (squared first eigenvector entries)."""
    if len(alphas) == 1:
        return alphas.copy(), np.ones(1)
    nodes, vectors = eigh_tridiagonal(alphas, betas)
    return nodes, vectors[0, :] ** 2


def slq_from_operator(matvec: MatVec, dim: int, cfg: SlqConfig = None) -> SpectralDensity:
    cfg = cfg or SlqConfig()
    gen = SeedHelper.generator(cfg.seed)
    steps = min(cfg.steps, dim)
    density = SpectralDensity(bandwidth_fraction=cfg.bandwidth_fraction)
    for j in range(cfg.n_probes):
        probe = torch.randn(dim, generator=gen, dtype=torch.float64)
        alphas, betas = lanczos(matvec, probe, steps, cfg.breakdown_tol)
        if len(alphas) < steps:
            logger.debug(f"Lanczos breakdown on probe {j} after {len(alphas)} steps")
        density.probes.append(ritz_quadrature(alphas, betas))
    return density


def slq_density(closure: LossClosureFn, params: ParamVector, cfg: SlqConfig = None) -> SpectralDensity:
    """
    Spectral density of the Hessian of a loss at fixed parameters.

    Args:
        closure: Maps a ParamVector to a scalar loss
        params: Point of evaluation
        cfg: Probe count, Lanczos steps (clamped to the parameter count), seed

    Returns:
        SpectralDensity
    """
    operator = HvpOperator(closure, params)
    density = slq_from_operator(operator, operator.dim, cfg)
    logger.info(f"SLQ over {operator.dim} parameters: lambda_max={density.lambda_max:.4e}")
    return density


def checkpoint_densities(closure: LossClosureFn, checkpoints: Mapping[int, ParamVector], cfg: SlqConfig = None,
                         closure_states: Optional[Mapping[int, Dict]] = None) -> Dict[int, SpectralDensity]:
    """
    SLQ density at every checkpoint.

    Args:
        closure: Loss the checkpoints were trained on
        checkpoints: Iteration to parameters
        cfg: SLQ settings
        closure_states: Iteration to closure.state_dict() at that iteration; the closure
            is moved to each state for its checkpoint and restored afterwards

    Returns:
        Iteration to density, in iteration order
    """
    current = closure.state_dict() if closure_states else None
    densities = {}
    try:
        for it in sorted(checkpoints):
            if closure_states and it in closure_states:
                closure.load_state_dict(closure_states[it])
            densities[it] = slq_density(closure, checkpoints[it], cfg)
    finally:
        if current is not None:
            closure.load_state_dict(current)
    return densities


def density_frame(densities: Mapping[int, SpectralDensity],
                  thresholds: Sequence[float] = tuple(Config.DENSITY_THRESHOLDS)) -> pd.DataFrame:
    """One row per checkpoint: lambda_max and spectral mass above each threshold."""
    rows = []
    for it in sorted(densities):
        density = densities[it]
        row = {"iter": it, "lambda_max": density.lambda_max}
        for threshold in thresholds:
            row[f"mass_above_{threshold:g}"] = density.mass_above(threshold)
        rows.append(row)
    return pd.DataFrame(rows)


def eig_trajectory(closure: LossClosureFn, checkpoints: Mapping[int, ParamVector], cfg: SlqConfig = None,
                   thresholds: Sequence[float] = tuple(Config.DENSITY_THRESHOLDS),
                   closure_states: Optional[Mapping[int, Dict]] = None) -> pd.DataFrame:
    """
    SLQ summary per checkpoint: lambda_max and spectral mass above each threshold.

    Args:
        closure: Loss the checkpoints were trained on
        checkpoints: Iteration to parameters
        cfg: SLQ settings
        thresholds: Eigenvalue thresholds
        closure_states: Per-checkpoint loss weights, see checkpoint_densities

    Returns:
        One row per checkpoint, sorted by iteration
    """
    return density_frame(checkpoint_densities(closure, checkpoints, cfg, closure_states), thresholds)
