"""
Fourier features module.
Trainable Fourier cross features, per-point centered-L2 normalization and the
feature bank that combines them with domain-knowledge features.
"""

import math
from dataclasses import dataclass
from enum import Enum
from itertools import product
from typing import Dict, List, Mapping, Tuple

import torch

from config.config import Config
from features.domain_knowledge import DomainFeature

PI = math.pi


class FreqInit(str, Enum):
    HARMONIC = "harmonic"
    GAUSSIAN = "gaussian"
    UNIFORM = "uniform"


class CoeffInit(str, Enum):
    UNIT = "unit"
    GAUSSIAN = "gaussian"
    UNIFORM = "uniform"
    XAVIER = "xavier"


@dataclass(frozen=True)
class FeatureBank:
    """
    Layout of the Fourier feature stage.

    One set l has frequencies omega_x[l] (and omega_y[l] in 2-D), lambda_t[l] and
    one amplitude per product. Products within a set are ordered with the x factor
    varying fastest, then y, then t, cos before sin:
    1-D: cos.cos, sin.cos, cos.sin, sin.sin.
    """

    n_sets: int
    spatial_dims: int = 1
    dkf: Tuple[DomainFeature, ...] = ()
    normalize: bool = True
    eps: float = Config.NORMALIZE_EPS

    def __post_init__(self):
        if self.n_sets < 1:
            raise ValueError(f"n_sets must be >= 1, got {self.n_sets}")
        if self.eps <= 0:
            raise ValueError(f"eps must be > 0, got {self.eps}")

    @classmethod
    def from_feature_count(cls, n_features: int, spatial_dims: int = 1, **kwargs) -> "FeatureBank":
        """Bank whose Fourier block has (at most) n_features entries."""
        return cls(n_sets=max(1, n_features // 2 ** (spatial_dims + 1)), spatial_dims=spatial_dims, **kwargs)

    @property
    def products_per_set(self) -> int:
        return 2 ** (self.spatial_dims + 1)

    @property
    def fourier_width(self) -> int:
        return self.products_per_set * self.n_sets

    @property
    def width(self) -> int:
        return self.fourier_width + len(self.dkf)

    @property
    def frequency_names(self) -> List[str]:
        return ["omega_x", "omega_y", "lambda_t"] if self.spatial_dims == 2 else ["omega_x", "lambda_t"]

    def segment_shapes(self) -> List[Tuple[str, Tuple[int, ...]]]:
        shapes = [(name, (self.n_sets,)) for name in self.frequency_names]
        shapes.append(("coeffs", (self.n_sets, self.products_per_set)))
        return shapes

    def init_segments(self, generator: torch.Generator, freq_init: FreqInit, coeff_init: CoeffInit,
                      scales: Mapping[str, float], input_dim: int) -> Dict[str, torch.Tensor]:
        """
        Draw initial frequencies and amplitudes.

        Args:
            generator: Seeded torch generator
            freq_init: Frequency strategy
            coeff_init: Amplitude strategy
            scales: Harmonic divisor k per axis name ("x", "y", "t")
            input_dim: Network input dimension, used by the Xavier bound

        Returns:
            Dictionary of segment name to tensor
        """
        n = self.n_sets
        ell = torch.arange(1, n + 1, dtype=torch.float64)
        out = {}
        for name in self.frequency_names:
            axis = name.split("_")[1]
            if freq_init == FreqInit.HARMONIC:
                out[name] = ell * PI / scales[axis]
            elif freq_init == FreqInit.GAUSSIAN:
                out[name] = PI * torch.randn(n, generator=generator, dtype=torch.float64)
            else:
                out[name] = 2 * PI * torch.rand(n, generator=generator, dtype=torch.float64)

        shape = (n, self.products_per_set)
        if coeff_init == CoeffInit.UNIT:
            out["coeffs"] = torch.ones(shape, dtype=torch.float64)
        elif coeff_init == CoeffInit.GAUSSIAN:
            out["coeffs"] = torch.randn(shape, generator=generator, dtype=torch.float64)
        elif coeff_init == CoeffInit.UNIFORM:
            out["coeffs"] = torch.rand(shape, generator=generator, dtype=torch.float64)
        else:
            bound = math.sqrt(6.0 / input_dim)
            out["coeffs"] = torch.empty(shape, dtype=torch.float64).uniform_(-bound, bound, generator=generator)
        return out


def fourier_features(bank: FeatureBank, segments: Mapping[str, torch.Tensor],
                     points: torch.Tensor) -> torch.Tensor:
    """
    Evaluate the trainable Fourier cross features.

    Args:
        bank: Feature bank layout
        segments: Frequencies and coefficients by segment name
        points: Tensor of shape (n, spatial_dims + 1), t last

    Returns:
        Tensor of shape (n, bank.fourier_width), set blocks contiguous
    """
    factors = []
    for i, name in enumerate(bank.frequency_names):
        column = points[:, -1:] if name == "lambda_t" else points[:, i:i + 1]
        phase = column * segments[name]
        factors.append((torch.cos(phase), torch.sin(phase)))

    products = []
    # x fastest: iterate (t, [y,] x) with itertools.product, last index fastest
    for bits in product((0, 1), repeat=len(factors)):
        term = None
        for axis, bit in zip(reversed(range(len(factors))), bits):
            value = factors[axis][bit]
            term = value if term is None else term * value
        products.append(term)
    stacked = torch.stack(products, dim=2) * segments["coeffs"]
    return stacked.reshape(points.shape[0], bank.fourier_width)


def normalize(v: torch.Tensor, eps: float = Config.NORMALIZE_EPS) -> torch.Tensor:
    """
    Centered L2 normalization along the last dimension.

    Args:
        v: Feature vectors, shape (..., F)
        eps: Guard added to the norm

    Returns:
        (v - mean(v)) / (||v - mean(v)||_2 + eps)
    """
    centered = v - v.mean(dim=-1, keepdim=True)
    return centered / (torch.linalg.vector_norm(centered, dim=-1, keepdim=True) + eps)


def bank_features(bank: FeatureBank, segments: Mapping[str, torch.Tensor],
                  points: torch.Tensor) -> torch.Tensor:
    """
    Full feature stage: Fourier block, then DKF, then optional normalization.

    Args:
        bank: Feature bank layout
        segments: Frequencies and coefficients by segment name
        points: Tensor of shape (n, input_dim)

    Returns:
        Tensor of shape (n, bank.width)
    """
    features = fourier_features(bank, segments, points)
    if bank.dkf:
        dkf = torch.stack([f.evaluate(points) for f in bank.dkf], dim=1)
        features = torch.cat([features, dkf], dim=1)
    if bank.normalize:
        features = normalize(features, bank.eps)
    return features
