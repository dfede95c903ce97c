"""
Collocation module.
Seeded sampling of interior, boundary and initial points for a problem.
"""

from dataclasses import dataclass, field, replace
from typing import List, Optional

import torch

from pdes.base_problem import BaseProblem, BcKind, BoundaryCondition
from utils.helpers import SeedHelper
from utils.logger import get_logger

logger = get_logger(__name__)


@dataclass(frozen=True)
class CollocationSizes:
    """Point counts: interior, per boundary face, initial slice."""

    n_res: int = 20000
    n_bc: int = 2000
    n_ic: int = 2000

    def __post_init__(self):
        if min(self.n_res, self.n_bc, self.n_ic) < 1:
            raise ValueError(f"Collocation sizes must be positive, got {self}")


@dataclass
class BoundaryBatch:
    """
    Points of one boundary condition.

    For a periodic condition `points` lie on the lo face and `partner` holds the
    matching points on the hi face.
    """

    condition: BoundaryCondition
    points: torch.Tensor
    partner: Optional[torch.Tensor] = None


@dataclass
class CollocationSet:
    interior: torch.Tensor
    boundary: List[BoundaryBatch]
    initial: torch.Tensor
    rba_weights: torch.Tensor = field(default=None)

    def __post_init__(self):
        if self.rba_weights is None:
            self.rba_weights = torch.zeros(self.interior.shape[0], dtype=torch.float64)

    @property
    def n_boundary(self) -> int:
        return sum(batch.points.shape[0] for batch in self.boundary)

    def subset(self, k: int) -> "CollocationSet":
        """
        Evenly spaced subsample with at most k interior, k boundary and k initial points.

        Boundary points are split evenly across the batches.
        """
        per_batch = max(1, k // max(1, len(self.boundary)))
        return CollocationSet(
            interior=_evenly(self.interior, k),
            boundary=[replace(b, points=_evenly(b.points, per_batch),
                              partner=None if b.partner is None else _evenly(b.partner, per_batch))
                      for b in self.boundary],
            initial=_evenly(self.initial, k),
            rba_weights=_evenly(self.rba_weights, k),
        )


def _evenly(tensor: torch.Tensor, k: int) -> torch.Tensor:
    n = tensor.shape[0]
    if n <= k:
        return tensor
    index = torch.linspace(0, n - 1, k, dtype=torch.float64).round().long()
    return tensor[index]


def _uniform(gen: torch.Generator, n: int, lower, upper) -> torch.Tensor:
    lo = torch.tensor(lower, dtype=torch.float64)
    hi = torch.tensor(upper, dtype=torch.float64)
    return lo + (hi - lo) * torch.rand(n, len(lower), generator=gen, dtype=torch.float64)


def sample_collocation(problem: BaseProblem, seed: int, sizes: CollocationSizes = None) -> CollocationSet:
    """
    Draw a collocation set.

    Interior points are uniform in the box. Each boundary face gets n_bc uniform
    points; periodic axes get n_bc matched lo/hi pairs. Initial points are uniform
    on the t = t_lo slice.

    Args:
        problem: Benchmark problem
        seed: Sampling seed
        sizes: Point counts (defaults to CollocationSizes())

    Returns:
        CollocationSet with zero RBA weights
    """
    sizes = sizes or CollocationSizes()
    gen = SeedHelper.generator(seed)
    domain = problem.DOMAIN
    lower, upper = domain.lower, domain.upper

    interior = _uniform(gen, sizes.n_res, lower, upper)

    boundary = []
    for bc in problem.boundary_conditions():
        i = domain.axis_index(bc.axis)
        points = _uniform(gen, sizes.n_bc, lower, upper)
        if bc.kind == BcKind.PERIODIC:
            lo, hi = points.clone(), points.clone()
            lo[:, i] = lower[i]
            hi[:, i] = upper[i]
            boundary.append(BoundaryBatch(bc, lo, hi))
        else:
            points[:, i] = lower[i] if bc.side == "lo" else upper[i]
            boundary.append(BoundaryBatch(bc, points))

    initial = _uniform(gen, sizes.n_ic, lower, upper)
    if domain.time_dependent:
        initial[:, domain.axis_index("t")] = domain.t_lo

    logger.debug(f"Sampled collocation for {problem} (seed={seed}): "
                 f"{sizes.n_res} interior, {len(boundary)} boundary batches, {sizes.n_ic} initial")
    return CollocationSet(interior=interior, boundary=boundary, initial=initial)
