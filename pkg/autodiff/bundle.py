"""
Derivative bundle module.
Carries the network value and its input derivatives at a batch of points.
"""

from dataclasses import dataclass, fields
from typing import FrozenSet, Optional

import torch

from utils.exceptions import MissingDerivativeError, UnsupportedDerivativeError

DERIVATIVE_NAMES = ("u", "u_t", "u_x", "u_xx", "u_tt", "u_y", "u_yy")

# derivative name -> (axis, order)
DERIVATIVE_AXES = {
    "u_x": ("x", 1),
    "u_xx": ("x", 2),
    "u_y": ("y", 1),
    "u_yy": ("y", 2),
    "u_t": ("t", 1),
    "u_tt": ("t", 2),
}


@dataclass(frozen=True)
class DerivativeBundle:
    """Value and input derivatives of u, one entry per point. Absent entries are None."""

    u: Optional[torch.Tensor] = None
    u_t: Optional[torch.Tensor] = None
    u_x: Optional[torch.Tensor] = None
    u_xx: Optional[torch.Tensor] = None
    u_tt: Optional[torch.Tensor] = None
    u_y: Optional[torch.Tensor] = None
    u_yy: Optional[torch.Tensor] = None

    def __getitem__(self, name: str) -> torch.Tensor:
        if name not in DERIVATIVE_NAMES:
            raise UnsupportedDerivativeError(f"Unknown derivative: {name}")
        value = getattr(self, name)
        if value is None:
            raise MissingDerivativeError(name)
        return value

    @property
    def available(self) -> FrozenSet[str]:
        """Names of the populated entries."""
        return frozenset(f.name for f in fields(self) if getattr(self, f.name) is not None)
