"""
Base Problem module.
Contains the domain types and the BaseProblem class shared by all benchmark PDEs.
"""

from dataclasses import dataclass
from enum import Enum
from typing import Callable, Dict, FrozenSet, List, Optional, Sequence, Tuple

import numpy as np
import torch
from scipy.interpolate import RegularGridInterpolator

from autodiff.bundle import DerivativeBundle
from utils.exceptions import OutOfDomainError
from utils.logger import get_logger

logger = get_logger(__name__)

PointFunction = Callable[[torch.Tensor], torch.Tensor]


class ProblemId(str, Enum):
    """Benchmark identifiers."""

    WAVE = "wave"
    REACTION = "reaction"
    CONVECTION = "convection"
    DIFFUSION = "diffusion"
    HEAT2D = "heat2d"
    BURGERS = "burgers"
    ALLEN_CAHN = "allen_cahn"
    NONHOMOG_HEAT = "nonhomog_heat"


class BcKind(str, Enum):
    DIRICHLET = "dirichlet"
    PERIODIC = "periodic"
    ROBIN = "robin"


class IcOrder(str, Enum):
    VALUE = "value"
    TIME_DERIVATIVE = "time_derivative"


class ReferenceKind(str, Enum):
    CLOSED_FORM = "closed_form"
    ORACLE_GRID = "oracle_grid"


@dataclass(frozen=True)
class DomainBox:
    """
    Axis-aligned space-time box.

    Points are stored as rows with spatial columns first and t last.
    """

    spatial_dims: int
    x_lo: Tuple[float, ...]
    x_hi: Tuple[float, ...]
    t_lo: Optional[float] = None
    t_hi: Optional[float] = None

    def __post_init__(self):
        if self.spatial_dims not in (1, 2):
            raise ValueError(f"spatial_dims must be 1 or 2, got {self.spatial_dims}")
        if len(self.x_lo) != self.spatial_dims or len(self.x_hi) != self.spatial_dims:
            raise ValueError("x_lo/x_hi must have one bound per spatial axis")
        for lo, hi in zip(self.x_lo, self.x_hi):
            if not lo < hi:
                raise ValueError(f"Empty spatial interval [{lo}, {hi}]")
        if (self.t_lo is None) != (self.t_hi is None):
            raise ValueError("t_lo and t_hi must both be set or both be absent")
        if self.time_dependent and not self.t_lo < self.t_hi:
            raise ValueError(f"Empty time interval [{self.t_lo}, {self.t_hi}]")

    @property
    def time_dependent(self) -> bool:
        return self.t_lo is not None

    @property
    def axes(self) -> Tuple[str, ...]:
        spatial = ("x", "y")[:self.spatial_dims]
        return spatial + (("t",) if self.time_dependent else ())

    @property
    def lower(self) -> Tuple[float, ...]:
        return tuple(self.x_lo) + ((self.t_lo,) if self.time_dependent else ())

    @property
    def upper(self) -> Tuple[float, ...]:
        return tuple(self.x_hi) + ((self.t_hi,) if self.time_dependent else ())

    @property
    def input_dim(self) -> int:
        return len(self.axes)

    def axis_index(self, axis: str) -> int:
        return self.axes.index(axis)

    def length(self, axis: str) -> float:
        i = self.axis_index(axis)
        return self.upper[i] - self.lower[i]

    def contains(self, points: torch.Tensor, atol: float = 1e-12) -> torch.Tensor:
        """
        Check which points lie in the closed box.

        Args:
            points: Tensor of shape (n, input_dim)
            atol: Absolute slack on every bound

        Returns:
            Boolean tensor of shape (n,)
        """
        lo = torch.tensor(self.lower, dtype=points.dtype)
        hi = torch.tensor(self.upper, dtype=points.dtype)
        return ((points >= lo - atol) & (points <= hi + atol)).all(dim=1)


@dataclass(frozen=True)
class BoundaryCondition:
    """
    One boundary constraint.

    Dirichlet and Robin conditions sit on a single face (axis, side). A periodic
    condition pairs the lo and hi faces of its axis and has no target.
    """

    axis: str
    kind: BcKind
    side: Optional[str] = None
    target: Optional[PointFunction] = None
    robin_coeff: float = 0.0

    @property
    def needs(self) -> FrozenSet[str]:
        if self.kind == BcKind.ROBIN:
            return frozenset({"u", f"u_{self.axis}"})
        return frozenset({"u"})


@dataclass(frozen=True)
class InitialCondition:
    order: IcOrder
    target: PointFunction

    @property
    def needs(self) -> FrozenSet[str]:
        return frozenset({"u_t"}) if self.order == IcOrder.TIME_DERIVATIVE else frozenset({"u"})


class ReferenceSolution:
    """Reference solution: a closed form or an interpolated oracle grid."""

    def __init__(self, kind: ReferenceKind, fn: Optional[PointFunction] = None,
                 grids: Optional[Sequence[np.ndarray]] = None,
                 values: Optional[np.ndarray] = None,
                 metadata: Optional[Dict] = None):
        self.kind = kind
        self.fn = fn
        self.grids = tuple(np.asarray(g, dtype=np.float64) for g in grids) if grids is not None else None
        self.values = np.asarray(values, dtype=np.float64) if values is not None else None
        self.metadata = dict(metadata or {})
        self._interpolator = None
        if kind == ReferenceKind.ORACLE_GRID:
            self._interpolator = RegularGridInterpolator(
                self.grids, self.values, method="linear", bounds_error=True
            )

    @classmethod
    def closed_form(cls, fn: PointFunction) -> "ReferenceSolution":
        return cls(ReferenceKind.CLOSED_FORM, fn=fn)

    @classmethod
    def oracle_grid(cls, grids: Sequence[np.ndarray], values: np.ndarray,
                    metadata: Dict) -> "ReferenceSolution":
        return cls(ReferenceKind.ORACLE_GRID, grids=grids, values=values, metadata=metadata)

    def __call__(self, points: torch.Tensor) -> torch.Tensor:
        if self.kind == ReferenceKind.CLOSED_FORM:
            return self.fn(points)
        query = points.detach().cpu().numpy()
        return torch.as_tensor(self._interpolator(query), dtype=points.dtype)


class BaseProblem:
    """
    Base class for all benchmark problems.

    Subclasses define the class constants and the residual; closed-form problems
    also provide exact_solution and exact_derivatives.
    """

    PROBLEM_ID: ProblemId = None
    DOMAIN: DomainBox = None
    PARAMS: Dict[str, float] = {}
    RESIDUAL_NEEDS: FrozenSet[str] = frozenset()

    def __init__(self):
        self._reference = None

    def __repr__(self) -> str:
        return f"{type(self).__name__}({self.PROBLEM_ID.value})"

    def residual(self, d: DerivativeBundle, points: torch.Tensor) -> torch.Tensor:
        raise NotImplementedError

    def boundary_conditions(self) -> List[BoundaryCondition]:
        raise NotImplementedError

    def initial_conditions(self) -> List[InitialCondition]:
        raise NotImplementedError

    def exact_solution(self, points: torch.Tensor) -> torch.Tensor:
        raise NotImplementedError(f"{self} has no closed-form solution")

    def exact_derivatives(self, points: torch.Tensor) -> DerivativeBundle:
        raise NotImplementedError(f"{self} has no closed-form solution")

    def build_reference(self) -> ReferenceSolution:
        return ReferenceSolution.closed_form(self.exact_solution)

    @property
    def reference(self) -> ReferenceSolution:
        if self._reference is None:
            self._reference = self.build_reference()
        return self._reference

    @property
    def has_closed_form(self) -> bool:
        return type(self).exact_solution is not BaseProblem.exact_solution

    @property
    def is_periodic(self) -> bool:
        return any(bc.kind == BcKind.PERIODIC for bc in self.boundary_conditions())

    @property
    def derivative_needs(self) -> FrozenSet[str]:
        """Every derivative the residual, boundary and initial terms read."""
        needs = set(self.RESIDUAL_NEEDS) | {"u"}
        for bc in self.boundary_conditions():
            needs |= bc.needs
        for ic in self.initial_conditions():
            needs |= ic.needs
        return frozenset(needs)

    def harmonic_scale(self, axis: str) -> float:
        """
        Divisor k of the harmonic frequency init l*pi/k along an axis.

        The axis length for homogeneous Dirichlet conditions on both faces, else 1.
        """
        if axis == "t":
            axis = "x"
        faces = [bc for bc in self.boundary_conditions()
                 if bc.axis == axis and bc.kind == BcKind.DIRICHLET]
        if len(faces) < 2:
            return 1.0
        for bc in faces:
            probe = self.face_points(bc, 16)
            if not torch.allclose(bc.target(probe), torch.zeros(16, dtype=probe.dtype), atol=1e-12):
                return 1.0
        return self.DOMAIN.length(axis)

    def face_points(self, bc: BoundaryCondition, n: int, side: str = None) -> torch.Tensor:
        """Evenly spaced points on a boundary face, used for probing targets."""
        side = side or bc.side or "lo"
        lower, upper = self.DOMAIN.lower, self.DOMAIN.upper
        columns = [torch.linspace(lo, hi, n, dtype=torch.float64) for lo, hi in zip(lower, upper)]
        i = self.DOMAIN.axis_index(bc.axis)
        columns[i] = torch.full((n,), lower[i] if side == "lo" else upper[i], dtype=torch.float64)
        return torch.stack(columns, dim=1)


def residual_at(problem: BaseProblem, state: DerivativeBundle, points: torch.Tensor) -> torch.Tensor:
    """
    Evaluate the PDE residual at a batch of points.

    Args:
        problem: Benchmark problem
        state: Derivatives of u at the points
        points: Tensor of shape (n, input_dim)

    Returns:
        Residual values, shape (n,)

    Raises:
        MissingDerivativeError: If the bundle lacks an entry the residual reads
    """
    return problem.residual(state, points)


def reference_eval(problem: BaseProblem, points: torch.Tensor) -> torch.Tensor:
    """
    Evaluate the reference solution at points inside the domain.

    Args:
        problem: Benchmark problem
        points: Tensor of shape (n, input_dim)

    Returns:
        Reference values, shape (n,)

    Raises:
        OutOfDomainError: If any point lies outside the domain box
    """
    inside = problem.DOMAIN.contains(points)
    if not bool(inside.all()):
        bad = points[~inside][0].tolist()
        raise OutOfDomainError(f"{problem}: point {bad} outside {problem.DOMAIN}")
    return problem.reference(points)
