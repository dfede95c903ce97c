"""
Networks module.
Architecture specs and the functional networks built from them: a feature stage
followed by a tanh/sine dense stack with a scalar output.
"""

import hashlib
import json
from dataclasses import asdict, dataclass
from enum import Enum
from functools import lru_cache
from typing import Any, Dict, List, Optional, Tuple

import torch
from torch import nn

from config.config import Config
from features.baselines import RbfMap, RffMap, periodic_embedding, poly_block, rbf_basis, rbf_map, rff_map
from features.domain_knowledge import DKF_TABLE, dkf_features
from features.fourier import CoeffInit, FeatureBank, FreqInit, bank_features
from models.activations import ActivationKind
from models.params import ParamVector, SegmentLayout
from pdes.base_problem import ProblemId
from pdes.benchmarks import get_problem
from utils.exceptions import SegmentMismatchError
from utils.helpers import SeedHelper
from utils.logger import get_logger

logger = get_logger(__name__)


class Arch(str, Enum):
    SAFENET = "safenet"
    MLP_4X50 = "mlp_4x50"
    FLS_4X50 = "fls_4x50"
    MLP_6X50 = "mlp_6x50"


class FeatureMapKind(str, Enum):
    NONE = "none"
    FOURIER = "fourier"
    RFF = "rff"
    RBF = "rbf"
    RBFP = "rbfp"
    PERIODIC = "periodic"


DEFAULT_DEPTH = {
    Arch.SAFENET: 1,
    Arch.MLP_4X50: 4,
    Arch.FLS_4X50: 4,
    Arch.MLP_6X50: 6,
}


@dataclass(frozen=True)
class NetworkSpec:
    """
    Everything needed to rebuild a network and its segment layout.

    n_features is the Fourier block width for FOURIER, 2m for RFF and the
    number of centers for RBF/RBFP. map_seed draws the frozen RFF/RBF maps.
    input_axes restricts a plain MLP to a subset of the domain axes.
    """

    arch: Arch
    problem_id: ProblemId
    feature_map: FeatureMapKind = FeatureMapKind.NONE
    hidden_width: int = Config.HIDDEN_WIDTH
    depth: Optional[int] = None
    activation: ActivationKind = ActivationKind.TANH
    n_features: int = 128
    dkf: bool = False
    normalize: bool = False
    eps: float = Config.NORMALIZE_EPS
    map_seed: int = 0
    input_axes: Optional[Tuple[str, ...]] = None

    def __post_init__(self):
        object.__setattr__(self, "arch", Arch(self.arch))
        object.__setattr__(self, "problem_id", ProblemId(self.problem_id))
        object.__setattr__(self, "feature_map", FeatureMapKind(self.feature_map))
        object.__setattr__(self, "activation", ActivationKind(self.activation))
        if self.depth is None:
            object.__setattr__(self, "depth", DEFAULT_DEPTH[self.arch])
        if self.input_axes is not None:
            object.__setattr__(self, "input_axes", tuple(self.input_axes))
            if self.feature_map != FeatureMapKind.NONE:
                raise ValueError("input_axes can only restrict a network without a feature map")
        if not 1 <= self.depth <= 8:
            raise ValueError(f"depth must be in [1, 8], got {self.depth}")
        if self.hidden_width < 1 or self.n_features < 1:
            raise ValueError("hidden_width and n_features must be positive")

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        for key, value in data.items():
            if isinstance(value, Enum):
                data[key] = value.value
            elif isinstance(value, tuple):
                data[key] = list(value)
        return data

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "NetworkSpec":
        data = dict(data)
        if data.get("input_axes") is not None:
            data["input_axes"] = tuple(data["input_axes"])
        return cls(**data)

    @property
    def spec_hash(self) -> str:
        payload = json.dumps(self.to_dict(), sort_keys=True)
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()


class Network:
    """Functional network: parameters live in a ParamVector, never on the object."""

    def __init__(self, spec: NetworkSpec):
        self.spec = spec
        self.problem = get_problem(spec.problem_id)
        domain = self.problem.DOMAIN
        self.axes = spec.input_axes or domain.axes
        for axis in self.axes:
            if axis not in domain.axes:
                raise ValueError(f"Axis '{axis}' is not an axis of {self.problem}")
        self.dkf = DKF_TABLE.get(spec.problem_id, ()) if spec.dkf else ()

        self.bank = self.rff = self.rbf = None
        kind = spec.feature_map
        if kind == FeatureMapKind.FOURIER:
            self.bank = FeatureBank.from_feature_count(
                spec.n_features, domain.spatial_dims, dkf=tuple(self.dkf),
                normalize=spec.normalize, eps=spec.eps,
            )
            self.input_width = self.bank.width
        elif kind == FeatureMapKind.RFF:
            self.rff = RffMap.create(self.axes, spec.map_seed, m=spec.n_features // 2)
            self.input_width = self.rff.width
        elif kind in (FeatureMapKind.RBF, FeatureMapKind.RBFP):
            order = Config.RBFP_ORDER if kind == FeatureMapKind.RBFP else 0
            self.rbf = RbfMap.create(len(self.axes), spec.map_seed, m=spec.n_features, poly_order=order)
            self.input_width = self.rbf.m + self.rbf.poly_width
        elif kind == FeatureMapKind.PERIODIC:
            self.period = domain.length("x")
            self.input_width = 2 * Config.RBA_EMBEDDING_MODES + 1 + len(self.axes) - 1
        else:
            self.input_width = len(self.axes) + len(self.dkf)

        self.layout = SegmentLayout.from_shapes(self._segment_shapes())
        logger.debug(f"Built {spec.arch.value}/{kind.value} for {spec.problem_id.value}: "
                     f"{self.param_count} parameters")

    def __repr__(self) -> str:
        return f"Network({self.spec.arch.value}, {self.spec.feature_map.value}, params={self.param_count})"

    @property
    def param_count(self) -> int:
        return self.layout.total

    def _segment_shapes(self) -> List[Tuple[str, Tuple[int, ...]]]:
        H, L = self.spec.hidden_width, self.spec.depth
        shapes = list(self.bank.segment_shapes()) if self.bank else []
        if self.rbf is not None:
            shapes.append(("rbf_weights", (H, self.rbf.m)))
            if self.rbf.poly_order > 0:
                shapes.append(("poly_weights", (H, self.rbf.poly_width)))
        else:
            shapes.append(("W1", (H, self.input_width)))
        shapes.append(("b1", (H,)))
        for k in range(2, L + 1):
            shapes.append((f"W{k}", (H, H)))
            shapes.append((f"b{k}", (H,)))
        shapes.append((f"w{L + 1}", (1, H)))
        shapes.append((f"b{L + 1}", (1,)))
        return shapes

    def check(self, params: ParamVector):
        if params.segments != self.layout:
            raise SegmentMismatchError(
                f"{self}: parameter segments {params.segments.names} do not match {self.layout.names}"
            )

    def features(self, params: ParamVector, points: torch.Tensor) -> torch.Tensor:
        """
        Input of the first dense layer (for RBF maps: kernel basis and monomial block).

        Args:
            params: Parameter vector
            points: Tensor of shape (n, len(axes))

        Returns:
            Tensor of shape (n, input_width)
        """
        kind = self.spec.feature_map
        if kind == FeatureMapKind.FOURIER:
            return bank_features(self.bank, params.unpack(), points)
        if kind == FeatureMapKind.RFF:
            return rff_map(self.rff, points)
        if kind in (FeatureMapKind.RBF, FeatureMapKind.RBFP):
            blocks = [rbf_basis(self.rbf, points)]
            if self.rbf.poly_order > 0:
                blocks.append(poly_block(points, self.rbf.poly_order))
            return torch.cat(blocks, dim=1)
        if kind == FeatureMapKind.PERIODIC:
            embedded = periodic_embedding(points[:, 0], self.period)
            return torch.cat([embedded, points[:, 1:]], dim=1)
        if self.dkf:
            return torch.cat([points, dkf_features(self.spec.problem_id, points)], dim=1)
        return points

    def forward(self, params: ParamVector, points: torch.Tensor) -> torch.Tensor:
        """
        Evaluate u at a batch of points.

        Args:
            params: Parameter vector matching self.layout
            points: Tensor of shape (n, len(axes))

        Returns:
            Tensor of shape (n,)

        Raises:
            SegmentMismatchError: If params does not match the layout
        """
        self.check(params)
        seg = params.unpack()
        L = self.spec.depth
        act = self.spec.activation
        first_act = ActivationKind.SINE if self.spec.arch == Arch.FLS_4X50 else act

        if self.rbf is not None:
            pre = rbf_map(self.rbf, points, seg["rbf_weights"], seg.get("poly_weights")) + seg["b1"]
        else:
            pre = self.features(params, points) @ seg["W1"].T + seg["b1"]
        h = first_act(pre)
        for k in range(2, L + 1):
            h = act(h @ seg[f"W{k}"].T + seg[f"b{k}"])
        return (h @ seg[f"w{L + 1}"].T + seg[f"b{L + 1}"]).squeeze(-1)

    def init_params(self, seed: int, freq_init: FreqInit = FreqInit.HARMONIC,
                    coeff_init: CoeffInit = CoeffInit.UNIT) -> ParamVector:
        """
        Draw an initial parameter vector.

        Feature segments first, then the dense layers in order. Dense weights are
        Xavier-uniform and biases zero, except the sine first layer of FLS which
        draws both from U(-1/d_in, 1/d_in).

        Args:
            seed: Seed of the dedicated generator
            freq_init: Frequency strategy for Fourier features
            coeff_init: Amplitude strategy for Fourier features

        Returns:
            ParamVector
        """
        gen = SeedHelper.generator(seed)
        tensors = {}
        if self.bank is not None:
            scales = {axis: self.problem.harmonic_scale(axis) for axis in self.axes}
            tensors.update(self.bank.init_segments(
                gen, FreqInit(freq_init), CoeffInit(coeff_init), scales, len(self.axes)
            ))

        for name, seg in self.layout.items():
            if name in tensors or name == "poly_weights":
                continue
            shape = seg.shape
            if name == "rbf_weights":
                width = shape[1] + self.rbf.poly_width
                combined = torch.empty(shape[0], width, dtype=torch.float64)
                nn.init.xavier_uniform_(combined, generator=gen)
                tensors["rbf_weights"] = combined[:, :shape[1]].clone()
                if self.rbf.poly_order > 0:
                    tensors["poly_weights"] = combined[:, shape[1]:].clone()
            elif self.spec.arch == Arch.FLS_4X50 and name in ("W1", "b1"):
                bound = 1.0 / self.input_width
                tensors[name] = torch.empty(shape, dtype=torch.float64).uniform_(-bound, bound, generator=gen)
            elif name.startswith("b"):
                tensors[name] = torch.zeros(shape, dtype=torch.float64)
            else:
                weight = torch.empty(shape, dtype=torch.float64)
                nn.init.xavier_uniform_(weight, generator=gen)
                tensors[name] = weight

        ordered = {name: tensors[name] for name in self.layout}
        return ParamVector.pack(ordered, self.layout)


@lru_cache(maxsize=None)
def get_network(spec: NetworkSpec) -> Network:
    """Shared network for a spec; the frozen RFF/RBF maps depend only on the spec."""
    return Network(spec)


def init_params(spec: NetworkSpec, seed: int, freq_init: FreqInit = FreqInit.HARMONIC,
                coeff_init: CoeffInit = CoeffInit.UNIT) -> ParamVector:
    return get_network(spec).init_params(seed, freq_init, coeff_init)


def forward(spec: NetworkSpec, params: ParamVector, points: torch.Tensor) -> torch.Tensor:
    return get_network(spec).forward(params, points)


def param_count(spec: NetworkSpec) -> int:
    return get_network(spec).param_count
