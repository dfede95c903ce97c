"""
Gram conditioning module.
Eigenvalues and condition numbers of feature Gram matrices and of the
parameter tangent kernel.
"""

import math
from dataclasses import dataclass
from typing import Mapping

import numpy as np
import torch

from autodiff.engine import param_jacobian
from features.fourier import FeatureBank, bank_features
from models.networks import NetworkSpec, get_network
from models.params import ParamVector
from utils.logger import get_logger

logger = get_logger(__name__)

SINGULAR_RTOL = 1e-12


@dataclass
class GramReport:
    eigenvalues: np.ndarray
    condition: float
    nonzero_ratio: float
    n_points: int
    n_features: int

    def to_dict(self) -> dict:
        return {
            "condition": self.condition,
            "nonzero_ratio": self.nonzero_ratio,
            "lambda_min": float(self.eigenvalues[0]),
            "lambda_max": float(self.eigenvalues[-1]),
            "n_points": self.n_points,
            "n_features": self.n_features,
        }


def gram_from_matrix(gram: torch.Tensor, n_points: int) -> GramReport:
    """
    Spectrum of a symmetric PSD matrix.

    condition is inf when the smallest eigenvalue is below SINGULAR_RTOL times
    the largest; nonzero_ratio only uses eigenvalues above that level.
    """
    gram = 0.5 * (gram + gram.T)
    eig = torch.linalg.eigvalsh(gram).numpy()
    top = eig[-1]
    floor = SINGULAR_RTOL * max(top, 0.0)
    nonzero = eig[eig > floor]
    condition = math.inf if top <= 0 or eig[0] <= floor else float(top / eig[0])
    ratio = float(nonzero[-1] / nonzero[0]) if nonzero.size else math.inf
    return GramReport(eigenvalues=eig, condition=condition, nonzero_ratio=ratio,
                      n_points=n_points, n_features=gram.shape[0])


def gram_from_features(phi: torch.Tensor) -> GramReport:
    """Report for G = Phi^T Phi / n."""
    phi = phi.detach()
    return gram_from_matrix(phi.T @ phi / phi.shape[0], phi.shape[0])


def gram_conditioning(bank: FeatureBank, segments: Mapping[str, torch.Tensor],
                      points: torch.Tensor) -> GramReport:
    """
    Gram matrix of a feature bank averaged over a grid.

    Args:
        bank: Feature bank layout
        segments: Frequencies and coefficients
        points: Grid points, shape (n, input_dim)

    Returns:
        GramReport
    """
    report = gram_from_features(bank_features(bank, segments, points))
    logger.info(f"Feature Gram over {report.n_points} points: condition={report.condition:.6e}")
    return report


def network_feature_gram(spec: NetworkSpec, params: ParamVector, points: torch.Tensor) -> GramReport:
    """Gram matrix of the first-layer input of a network."""
    return gram_from_features(get_network(spec).features(params, points))


def tangent_kernel_report(spec: NetworkSpec, params: ParamVector, points: torch.Tensor) -> GramReport:
    """
    Tangent kernel Theta = J J^T / n of u over a grid, J the parameter Jacobian.

    Args:
        spec: Network spec
        params: Parameter vector
        points: Grid points

    Returns:
        GramReport of the n x n kernel
    """
    network = get_network(spec)
    jac = param_jacobian(lambda p: network.forward(p, points), params)
    report = gram_from_matrix(jac @ jac.T / points.shape[0], points.shape[0])
    logger.info(f"Tangent kernel over {report.n_points} points: lambda_max={report.eigenvalues[-1]:.4e}")
    return report
