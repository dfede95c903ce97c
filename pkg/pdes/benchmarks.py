"""
Benchmarks module.
Contains one problem class per benchmark PDE and the problem registry.
"""

import math
from functools import lru_cache
from typing import Dict, List, Type, Union

import torch

from autodiff.bundle import DerivativeBundle
from pdes import oracles
from pdes.base_problem import (
    BaseProblem,
    BcKind,
    BoundaryCondition,
    DomainBox,
    IcOrder,
    InitialCondition,
    ProblemId,
    ReferenceSolution,
)
from utils.logger import get_logger

logger = get_logger(__name__)

PI = math.pi


def _zeros(points: torch.Tensor) -> torch.Tensor:
    return torch.zeros(points.shape[0], dtype=points.dtype)


def _dirichlet_zero(axis: str) -> List[BoundaryCondition]:
    return [
        BoundaryCondition(axis=axis, kind=BcKind.DIRICHLET, side="lo", target=_zeros),
        BoundaryCondition(axis=axis, kind=BcKind.DIRICHLET, side="hi", target=_zeros),
    ]


class WaveProblem(BaseProblem):
    """u_tt - 4 u_xx = 0 on (0,1) x (0,1), fixed ends, released from rest."""

    PROBLEM_ID = ProblemId.WAVE
    DOMAIN = DomainBox(spatial_dims=1, x_lo=(0.0,), x_hi=(1.0,), t_lo=0.0, t_hi=1.0)
    PARAMS = {"beta": 4.0, "c_squared": 4.0}
    RESIDUAL_NEEDS = frozenset({"u_tt", "u_xx"})

    def residual(self, d, points):
        return d["u_tt"] - self.PARAMS["c_squared"] * d["u_xx"]

    def boundary_conditions(self):
        return _dirichlet_zero("x")

    def initial_conditions(self):
        beta = self.PARAMS["beta"]
        return [
            InitialCondition(IcOrder.VALUE,
                             lambda p: torch.sin(PI * p[:, 0]) + 0.5 * torch.sin(beta * PI * p[:, 0])),
            InitialCondition(IcOrder.TIME_DERIVATIVE, _zeros),
        ]

    def exact_solution(self, points):
        x, t = points[:, 0], points[:, 1]
        return torch.sin(PI * x) * torch.cos(2 * PI * t) + 0.5 * torch.sin(4 * PI * x) * torch.cos(8 * PI * t)

    def exact_derivatives(self, points):
        x, t = points[:, 0], points[:, 1]
        a = torch.sin(PI * x) * torch.cos(2 * PI * t)
        b = torch.sin(4 * PI * x) * torch.cos(8 * PI * t)
        return DerivativeBundle(
            u=a + 0.5 * b,
            u_x=PI * torch.cos(PI * x) * torch.cos(2 * PI * t)
            + 2 * PI * torch.cos(4 * PI * x) * torch.cos(8 * PI * t),
            u_xx=-PI ** 2 * a - 8 * PI ** 2 * b,
            u_t=-2 * PI * torch.sin(PI * x) * torch.sin(2 * PI * t)
            - 4 * PI * torch.sin(4 * PI * x) * torch.sin(8 * PI * t),
            u_tt=-4 * PI ** 2 * a - 32 * PI ** 2 * b,
        )


class ReactionProblem(BaseProblem):
    """Logistic reaction u_t - rho u (1 - u) = 0 on (0, 2pi) x (0, 1), periodic in x."""

    PROBLEM_ID = ProblemId.REACTION
    DOMAIN = DomainBox(spatial_dims=1, x_lo=(0.0,), x_hi=(2 * PI,), t_lo=0.0, t_hi=1.0)
    PARAMS = {"rho": 5.0, "width": PI / 4}
    RESIDUAL_NEEDS = frozenset({"u", "u_t"})

    def h(self, x: torch.Tensor) -> torch.Tensor:
        """Gaussian initial profile centred at pi."""
        return torch.exp(-(x - PI) ** 2 / (2 * self.PARAMS["width"] ** 2))

    def residual(self, d, points):
        u = d["u"]
        return d["u_t"] - self.PARAMS["rho"] * u * (1 - u)

    def boundary_conditions(self):
        return [BoundaryCondition(axis="x", kind=BcKind.PERIODIC)]

    def initial_conditions(self):
        return [InitialCondition(IcOrder.VALUE, lambda p: self.h(p[:, 0]))]

    def exact_solution(self, points):
        h = self.h(points[:, 0])
        growth = torch.exp(self.PARAMS["rho"] * points[:, 1])
        return h * growth / (h * growth + 1 - h)

    def exact_derivatives(self, points):
        x, t = points[:, 0], points[:, 1]
        rho = self.PARAMS["rho"]
        h = self.h(x)
        h_x = -(x - PI) / self.PARAMS["width"] ** 2 * h
        growth = torch.exp(rho * t)
        denom = h * growth + 1 - h
        return DerivativeBundle(
            u=h * growth / denom,
            u_t=rho * h * growth * (1 - h) / denom ** 2,
            u_x=h_x * growth / denom ** 2,
        )


class ConvectionProblem(BaseProblem):
    """u_t + beta u_x = 0 on (0, 2pi) x (0, 1), periodic in x."""

    PROBLEM_ID = ProblemId.CONVECTION
    DOMAIN = DomainBox(spatial_dims=1, x_lo=(0.0,), x_hi=(2 * PI,), t_lo=0.0, t_hi=1.0)
    PARAMS = {"beta": 0.1}
    RESIDUAL_NEEDS = frozenset({"u_t", "u_x"})

    def residual(self, d, points):
        return d["u_t"] + self.PARAMS["beta"] * d["u_x"]

    def boundary_conditions(self):
        return [BoundaryCondition(axis="x", kind=BcKind.PERIODIC)]

    def initial_conditions(self):
        return [InitialCondition(IcOrder.VALUE, lambda p: torch.sin(p[:, 0]))]

    def exact_solution(self, points):
        return torch.sin(points[:, 0] - self.PARAMS["beta"] * points[:, 1])

    def exact_derivatives(self, points):
        beta = self.PARAMS["beta"]
        phase = points[:, 0] - beta * points[:, 1]
        return DerivativeBundle(
            u=torch.sin(phase),
            u_t=-beta * torch.cos(phase),
            u_x=torch.cos(phase),
            u_xx=-torch.sin(phase),
        )


class DiffusionProblem(BaseProblem):
    """
    u_t - u_xx - f = 0 on [-1, 1] x [0, 1] with a decaying sine solution.

    The forcing f = exp(-t) (pi^2 - 1) sin(pi x) is the one that makes
    u = exp(-t) sin(pi x) exact.
    """

    PROBLEM_ID = ProblemId.DIFFUSION
    DOMAIN = DomainBox(spatial_dims=1, x_lo=(-1.0,), x_hi=(1.0,), t_lo=0.0, t_hi=1.0)
    PARAMS = {}
    RESIDUAL_NEEDS = frozenset({"u_t", "u_xx"})

    def forcing(self, points: torch.Tensor) -> torch.Tensor:
        x, t = points[:, 0], points[:, 1]
        return torch.exp(-t) * (PI ** 2 - 1) * torch.sin(PI * x)

    def residual(self, d, points):
        return d["u_t"] - d["u_xx"] - self.forcing(points)

    def boundary_conditions(self):
        return _dirichlet_zero("x")

    def initial_conditions(self):
        return [InitialCondition(IcOrder.VALUE, lambda p: torch.sin(PI * p[:, 0]))]

    def exact_solution(self, points):
        return torch.exp(-points[:, 1]) * torch.sin(PI * points[:, 0])

    def exact_derivatives(self, points):
        x, t = points[:, 0], points[:, 1]
        decay = torch.exp(-t)
        u = decay * torch.sin(PI * x)
        return DerivativeBundle(u=u, u_t=-u, u_x=PI * decay * torch.cos(PI * x), u_xx=-PI ** 2 * u)


class Heat2DProblem(BaseProblem):
    """Anisotropic heat equation on [0,1]^2 x [0,5] with zero walls."""

    PROBLEM_ID = ProblemId.HEAT2D
    DOMAIN = DomainBox(spatial_dims=2, x_lo=(0.0, 0.0), x_hi=(1.0, 1.0), t_lo=0.0, t_hi=5.0)
    PARAMS = {
        "kx": 1.0 / (500 * PI) ** 2,
        "ky": 1.0 / PI ** 2,
        "kappa": (20 * PI) ** 2 / (500 * PI) ** 2 + 1.0,
    }
    RESIDUAL_NEEDS = frozenset({"u_t", "u_xx", "u_yy"})

    def residual(self, d, points):
        return d["u_t"] - self.PARAMS["kx"] * d["u_xx"] - self.PARAMS["ky"] * d["u_yy"]

    def boundary_conditions(self):
        return _dirichlet_zero("x") + _dirichlet_zero("y")

    def initial_conditions(self):
        return [InitialCondition(IcOrder.VALUE,
                                 lambda p: torch.sin(20 * PI * p[:, 0]) * torch.sin(PI * p[:, 1]))]

    def exact_solution(self, points):
        x, y, t = points[:, 0], points[:, 1], points[:, 2]
        return torch.sin(20 * PI * x) * torch.sin(PI * y) * torch.exp(-self.PARAMS["kappa"] * t)

    def exact_derivatives(self, points):
        x, y, t = points[:, 0], points[:, 1], points[:, 2]
        decay = torch.exp(-self.PARAMS["kappa"] * t)
        u = torch.sin(20 * PI * x) * torch.sin(PI * y) * decay
        return DerivativeBundle(
            u=u,
            u_t=-self.PARAMS["kappa"] * u,
            u_x=20 * PI * torch.cos(20 * PI * x) * torch.sin(PI * y) * decay,
            u_xx=-(20 * PI) ** 2 * u,
            u_y=PI * torch.sin(20 * PI * x) * torch.cos(PI * y) * decay,
            u_yy=-PI ** 2 * u,
        )


class BurgersProblem(BaseProblem):
    """Viscous Burgers u_t + u u_x - (nu/pi) u_xx = 0 on [-1,1] x [0,1]."""

    PROBLEM_ID = ProblemId.BURGERS
    DOMAIN = DomainBox(spatial_dims=1, x_lo=(-1.0,), x_hi=(1.0,), t_lo=0.0, t_hi=1.0)
    PARAMS = {"nu": 0.01, "viscosity": 0.01 / PI}
    RESIDUAL_NEEDS = frozenset({"u", "u_t", "u_x", "u_xx"})

    def residual(self, d, points):
        return d["u_t"] + d["u"] * d["u_x"] - self.PARAMS["viscosity"] * d["u_xx"]

    def boundary_conditions(self):
        return _dirichlet_zero("x")

    def initial_conditions(self):
        return [InitialCondition(IcOrder.VALUE, lambda p: -torch.sin(PI * p[:, 0]))]

    def build_reference(self) -> ReferenceSolution:
        return oracles.load_or_build(self)


class AllenCahnProblem(BaseProblem):
    """u_t - 1e-4 u_xx + 5u^3 - 5u = 0 on [-1,1] x [0,1], periodic in x."""

    PROBLEM_ID = ProblemId.ALLEN_CAHN
    DOMAIN = DomainBox(spatial_dims=1, x_lo=(-1.0,), x_hi=(1.0,), t_lo=0.0, t_hi=1.0)
    PARAMS = {"diffusivity": 1e-4, "gamma": 5.0}
    RESIDUAL_NEEDS = frozenset({"u", "u_t", "u_xx"})

    def residual(self, d, points):
        u = d["u"]
        gamma = self.PARAMS["gamma"]
        return d["u_t"] - self.PARAMS["diffusivity"] * d["u_xx"] + gamma * u ** 3 - gamma * u

    def boundary_conditions(self):
        return [BoundaryCondition(axis="x", kind=BcKind.PERIODIC)]

    def initial_conditions(self):
        return [InitialCondition(IcOrder.VALUE, lambda p: p[:, 0] ** 2 * torch.cos(PI * p[:, 0]))]

    def build_reference(self) -> ReferenceSolution:
        return oracles.load_or_build(self)


class NonHomogHeatProblem(BaseProblem):
    """
    Forced heat equation on [0,1] x [0,1] with u(0,t) = 1 and a Robin
    condition u_x(1,t) + h u(1,t) = g(t) on the right face.
    """

    PROBLEM_ID = ProblemId.NONHOMOG_HEAT
    DOMAIN = DomainBox(spatial_dims=1, x_lo=(0.0,), x_hi=(1.0,), t_lo=0.0, t_hi=1.0)
    PARAMS = {"h": 4.0}
    RESIDUAL_NEEDS = frozenset({"u_t", "u_xx"})

    def forcing(self, points: torch.Tensor) -> torch.Tensor:
        x, t = points[:, 0], points[:, 1]
        return (4 * PI ** 2 * torch.sin(2 * PI * x) * torch.cos(PI * t)
                - PI * torch.sin(2 * PI * x) * torch.sin(PI * t)
                + 0.6 * (6.3 * PI) ** 2 * torch.sin(6.3 * PI * x) * torch.sin(3 * PI * t)
                + 0.6 * 3 * PI * torch.sin(6.3 * PI * x) * torch.cos(3 * PI * t))

    def robin_data(self, points: torch.Tensor) -> torch.Tensor:
        t = points[:, 1]
        return (2 * PI * torch.cos(PI * t)
                + 3.78 * PI * math.cos(6.3 * PI) * torch.sin(3 * PI * t)
                + 2.4 * math.sin(6.3 * PI) * torch.sin(3 * PI * t)
                + 6.5)

    def residual(self, d, points):
        return d["u_t"] - d["u_xx"] - self.forcing(points)

    def boundary_conditions(self):
        return [
            BoundaryCondition(axis="x", kind=BcKind.DIRICHLET, side="lo",
                              target=lambda p: torch.ones(p.shape[0], dtype=p.dtype)),
            BoundaryCondition(axis="x", kind=BcKind.ROBIN, side="hi",
                              target=self.robin_data, robin_coeff=self.PARAMS["h"]),
        ]

    def initial_conditions(self):
        return [InitialCondition(IcOrder.VALUE,
                                 lambda p: torch.sin(2 * PI * p[:, 0]) + 0.5 * p[:, 0] + 1)]

    def exact_solution(self, points):
        x, t = points[:, 0], points[:, 1]
        return (torch.sin(2 * PI * x) * torch.cos(PI * t)
                + 0.6 * torch.sin(6.3 * PI * x) * torch.sin(3 * PI * t)
                + 0.5 * x + 1)

    def exact_derivatives(self, points):
        x, t = points[:, 0], points[:, 1]
        return DerivativeBundle(
            u=self.exact_solution(points),
            u_t=-PI * torch.sin(2 * PI * x) * torch.sin(PI * t)
            + 0.6 * 3 * PI * torch.sin(6.3 * PI * x) * torch.cos(3 * PI * t),
            u_x=2 * PI * torch.cos(2 * PI * x) * torch.cos(PI * t)
            + 0.6 * 6.3 * PI * torch.cos(6.3 * PI * x) * torch.sin(3 * PI * t) + 0.5,
            u_xx=-4 * PI ** 2 * torch.sin(2 * PI * x) * torch.cos(PI * t)
            - 0.6 * (6.3 * PI) ** 2 * torch.sin(6.3 * PI * x) * torch.sin(3 * PI * t),
        )


PROBLEM_CLASSES: Dict[ProblemId, Type[BaseProblem]] = {
    cls.PROBLEM_ID: cls
    for cls in (WaveProblem, ReactionProblem, ConvectionProblem, DiffusionProblem,
                Heat2DProblem, BurgersProblem, AllenCahnProblem, NonHomogHeatProblem)
}


def get_problem(problem_id: Union[str, ProblemId]) -> BaseProblem:
    """
    Get the shared instance of a benchmark problem.

    Args:
        problem_id: Problem identifier or its string value

    Returns:
        Problem instance
    """
    return _shared_instance(ProblemId(problem_id))


@lru_cache(maxsize=None)
def _shared_instance(problem_id: ProblemId) -> BaseProblem:
    return PROBLEM_CLASSES[problem_id]()
