"""
Baseline feature maps module.
Frozen random Fourier features, normalized Gaussian RBF features with an optional
polynomial block, and the periodic 1-D embedding used by the residual-attention baseline.
"""

import math
from dataclasses import dataclass
from itertools import combinations_with_replacement
from typing import Optional, Sequence

import torch

from config.config import Config
from utils.helpers import SeedHelper

PI = math.pi


@dataclass(frozen=True, eq=False)
class RffMap:
    """Frozen Gaussian projection B (m x d) and per-axis input scales."""

    B: torch.Tensor
    scales: torch.Tensor

    @classmethod
    def create(cls, input_axes: Sequence[str], seed: int, m: int = Config.RFF_M,
               sigma_spatial: float = Config.RFF_SIGMA_SPATIAL,
               sigma_temporal: float = Config.RFF_SIGMA_TEMPORAL) -> "RffMap":
        gen = SeedHelper.generator(seed)
        B = torch.randn(m, len(input_axes), generator=gen, dtype=torch.float64)
        scales = torch.tensor([sigma_temporal if a == "t" else sigma_spatial for a in input_axes],
                              dtype=torch.float64)
        return cls(B=B, scales=scales)

    @property
    def m(self) -> int:
        return self.B.shape[0]

    @property
    def width(self) -> int:
        return 2 * self.m


def rff_map(rff: RffMap, points: torch.Tensor) -> torch.Tensor:
    """
    Random Fourier features [cos(2 pi B (s * v)), sin(2 pi B (s * v))].

    Args:
        rff: Frozen map
        points: Tensor of shape (n, d)

    Returns:
        Tensor of shape (n, 2m)
    """
    projection = 2 * PI * (points * rff.scales) @ rff.B.T
    return torch.cat([torch.cos(projection), torch.sin(projection)], dim=-1)


def poly_block(points: torch.Tensor, order: int) -> torch.Tensor:
    """
    Monomials up to a total degree, graded then lexicographic: 1, x, t, x^2, xt, t^2, ...

    Args:
        points: Tensor of shape (n, d)
        order: Maximum total degree

    Returns:
        Tensor of shape (n, C(d + order, order))
    """
    columns = [torch.ones(points.shape[0], dtype=points.dtype)]
    for degree in range(1, order + 1):
        for combo in combinations_with_replacement(range(points.shape[1]), degree):
            term = points[:, combo[0]]
            for axis in combo[1:]:
                term = term * points[:, axis]
            columns.append(term)
    return torch.stack(columns, dim=1)


@dataclass(frozen=True, eq=False)
class RbfMap:
    """Frozen RBF centers and kernel width; poly_order 0 is plain RBF, k > 0 is RBF-P."""

    centers: torch.Tensor
    sigma: float = Config.RBF_SIGMA
    poly_order: int = 0

    @classmethod
    def create(cls, input_dim: int, seed: int, m: int = Config.RBF_CENTERS,
               sigma: float = Config.RBF_SIGMA, poly_order: int = 0) -> "RbfMap":
        gen = SeedHelper.generator(seed)
        centers = torch.randn(m, input_dim, generator=gen, dtype=torch.float64)
        return cls(centers=centers, sigma=sigma, poly_order=poly_order)

    @property
    def m(self) -> int:
        return self.centers.shape[0]

    @property
    def poly_width(self) -> int:
        if self.poly_order == 0:
            return 0
        d = self.centers.shape[1]
        return math.comb(d + self.poly_order, self.poly_order)


def rbf_basis(rbf: RbfMap, points: torch.Tensor) -> torch.Tensor:
    """
    Normalized Gaussian kernels phi_i / sum_j phi_j, phi_i = exp(-|v - c_i|^2 / (2 sigma^2)).

    Computed as a softmax so far-away points do not underflow the denominator.

    Args:
        rbf: Frozen map
        points: Tensor of shape (n, d)

    Returns:
        Tensor of shape (n, m), rows summing to 1
    """
    sq_dist = ((points[:, None, :] - rbf.centers[None, :, :]) ** 2).sum(dim=-1)
    return torch.softmax(-sq_dist / (2 * rbf.sigma ** 2), dim=-1)


def rbf_map(rbf: RbfMap, points: torch.Tensor, weights: torch.Tensor,
            poly_weights: Optional[torch.Tensor] = None) -> torch.Tensor:
    """
    Weighted normalized kernel sum, plus the polynomial head for RBF-P.

    Args:
        rbf: Frozen map
        points: Tensor of shape (n, d)
        weights: Kernel weights, shape (rows, m)
        poly_weights: Polynomial weights, shape (rows, P), RBF-P only

    Returns:
        Tensor of shape (n, rows)
    """
    out = rbf_basis(rbf, points) @ weights.T
    if rbf.poly_order > 0 and poly_weights is not None:
        out = out + poly_block(points, rbf.poly_order) @ poly_weights.T
    return out


def periodic_embedding(x: torch.Tensor, period: float, modes: int = Config.RBA_EMBEDDING_MODES) -> torch.Tensor:
    """
    [1, cos(w x), sin(w x), ..., cos(m w x), sin(m w x)] with w = 2 pi / period.

    Args:
        x: Coordinates, shape (n,)
        period: Spatial period
        modes: Number of harmonics m

    Returns:
        Tensor of shape (n, 2m + 1)
    """
    omega = 2 * PI / period
    columns = [torch.ones_like(x)]
    for j in range(1, modes + 1):
        columns.append(torch.cos(j * omega * x))
        columns.append(torch.sin(j * omega * x))
    return torch.stack(columns, dim=1)
