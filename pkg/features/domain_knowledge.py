"""
Domain knowledge features module.
Fixed features read off each benchmark's initial and boundary conditions.
"""

import math
from enum import Enum
from typing import Dict, Tuple, Union

import torch

from pdes.base_problem import ProblemId

PI = math.pi


class DomainFeature(str, Enum):
    """Registered domain-knowledge features."""

    WAVE_SIN_PIX = "wave_sin_pix"
    WAVE_SIN_4PIX = "wave_sin_4pix"
    REACTION_GAUSSIAN = "reaction_gaussian"
    CONVECTION_SIN_X = "convection_sin_x"
    HEAT_SIN_20PIX = "heat_sin_20pix"
    HEAT_SIN_PIY = "heat_sin_piy"
    HEAT_PRODUCT_MODE = "heat_product_mode"
    BURGERS_NEG_SIN_PIX = "burgers_neg_sin_pix"
    DIFFUSION_SIN_PIX = "diffusion_sin_pix"
    ALLEN_CAHN_X2 = "allen_cahn_x2"
    ALLEN_CAHN_COS_PIX = "allen_cahn_cos_pix"
    ALLEN_CAHN_PRODUCT = "allen_cahn_product"
    NONHOMOG_SIN_2PIX = "nonhomog_sin_2pix"
    NONHOMOG_LINEAR_X = "nonhomog_linear_x"

    def evaluate(self, points: torch.Tensor) -> torch.Tensor:
        """
        Evaluate the feature at a batch of points.

        Args:
            points: Tensor of shape (n, input_dim), spatial columns first

        Returns:
            Tensor of shape (n,)
        """
        return _EVALUATORS[self](points)


_EVALUATORS = {
    DomainFeature.WAVE_SIN_PIX: lambda p: torch.sin(PI * p[:, 0]),
    DomainFeature.WAVE_SIN_4PIX: lambda p: torch.sin(4 * PI * p[:, 0]),
    DomainFeature.REACTION_GAUSSIAN: lambda p: torch.exp(-(p[:, 0] - PI) ** 2 / (2 * (PI / 4) ** 2)),
    DomainFeature.CONVECTION_SIN_X: lambda p: torch.sin(p[:, 0]),
    DomainFeature.HEAT_SIN_20PIX: lambda p: torch.sin(20 * PI * p[:, 0]),
    DomainFeature.HEAT_SIN_PIY: lambda p: torch.sin(PI * p[:, 1]),
    DomainFeature.HEAT_PRODUCT_MODE: lambda p: torch.sin(20 * PI * p[:, 0]) * torch.sin(PI * p[:, 1]),
    DomainFeature.BURGERS_NEG_SIN_PIX: lambda p: -torch.sin(PI * p[:, 0]),
    DomainFeature.DIFFUSION_SIN_PIX: lambda p: torch.sin(PI * p[:, 0]),
    DomainFeature.ALLEN_CAHN_X2: lambda p: p[:, 0] ** 2,
    DomainFeature.ALLEN_CAHN_COS_PIX: lambda p: torch.cos(PI * p[:, 0]),
    DomainFeature.ALLEN_CAHN_PRODUCT: lambda p: p[:, 0] ** 2 * torch.cos(PI * p[:, 0]),
    DomainFeature.NONHOMOG_SIN_2PIX: lambda p: torch.sin(2 * PI * p[:, 0]),
    DomainFeature.NONHOMOG_LINEAR_X: lambda p: p[:, 0],
}

DKF_TABLE: Dict[ProblemId, Tuple[DomainFeature, ...]] = {
    ProblemId.WAVE: (DomainFeature.WAVE_SIN_PIX, DomainFeature.WAVE_SIN_4PIX),
    ProblemId.REACTION: (DomainFeature.REACTION_GAUSSIAN,),
    ProblemId.CONVECTION: (DomainFeature.CONVECTION_SIN_X,),
    ProblemId.HEAT2D: (DomainFeature.HEAT_SIN_20PIX, DomainFeature.HEAT_SIN_PIY,
                       DomainFeature.HEAT_PRODUCT_MODE),
    ProblemId.BURGERS: (DomainFeature.BURGERS_NEG_SIN_PIX,),
    ProblemId.DIFFUSION: (DomainFeature.DIFFUSION_SIN_PIX,),
    ProblemId.ALLEN_CAHN: (DomainFeature.ALLEN_CAHN_X2, DomainFeature.ALLEN_CAHN_COS_PIX,
                           DomainFeature.ALLEN_CAHN_PRODUCT),
    ProblemId.NONHOMOG_HEAT: (DomainFeature.NONHOMOG_SIN_2PIX, DomainFeature.NONHOMOG_LINEAR_X),
}


def dkf_features(problem_id: Union[str, ProblemId], points: torch.Tensor) -> torch.Tensor:
    """
    Evaluate the registered domain-knowledge features of a problem.

    Args:
        problem_id: Problem identifier
        points: Tensor of shape (n, input_dim)

    Returns:
        Tensor of shape (n, M); M may be 0
    """
    features = DKF_TABLE.get(ProblemId(problem_id), ())
    if not features:
        return points.new_zeros((points.shape[0], 0))
    return torch.stack([f.evaluate(points) for f in features], dim=1)
