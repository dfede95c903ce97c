"""
Experiment module.
Experiment configs, the method-to-network mapping and the L2RE metric.
"""

import hashlib
import json
from dataclasses import asdict, dataclass, field
from enum import Enum
from itertools import product
from typing import Any, Dict, List, Optional, Tuple

import torch

from config.config import Config
from features.fourier import CoeffInit, FreqInit
from models.activations import ActivationKind
from models.networks import Arch, FeatureMapKind, NetworkSpec, forward
from models.params import ParamVector
from pdes.base_problem import BaseProblem, ProblemId, reference_eval
from pdes.benchmarks import get_problem
from training.collocation import CollocationSizes
from training.schedules import ScheduleKind
from utils.exceptions import ConfigError, ZeroNormError
from utils.helpers import DataHelper, GridHelper


class Method(str, Enum):
    PINN = "PINN"
    FLS = "FLS"
    WPINN = "WPINN"
    RBA = "RBA"
    RFF = "RFF"
    RBF = "RBF"
    RBFP = "RBFP"
    SAFENET = "SAFENET"

    @property
    def has_feature_map(self) -> bool:
        """Whether a config's feature count sizes this method's input map."""
        return self in (Method.SAFENET, Method.RFF, Method.RBF, Method.RBFP)


def cell_key(problem: str, method: str, schedule: str, features: Optional[int] = None) -> str:
    """Summary key "problem/method/schedule", with "/f<count>" for an explicit feature count."""
    key = f"{problem}/{method}/{schedule}"
    return key if features is None else f"{key}/f{features}"


@dataclass(frozen=True)
class ExperimentConfig:
    """
    One (problem, method, schedule) cell of the benchmark, repeated over seeds.

    Optional fields fall back to the method's defaults and the preset.
    """

    problem: ProblemId
    method: Method
    schedule: ScheduleKind = ScheduleKind.S1
    seeds: Tuple[int, ...] = ()
    preset: str = Config.PRESET
    features: Optional[int] = None
    activation: ActivationKind = ActivationKind.TANH
    depth: Optional[int] = None
    normalize: Optional[bool] = None
    dkf: Optional[bool] = None
    freq_init: FreqInit = FreqInit.HARMONIC
    coeff_init: CoeffInit = CoeffInit.UNIT

    def __post_init__(self):
        try:
            object.__setattr__(self, "problem", ProblemId(self.problem))
            object.__setattr__(self, "method", Method(self.method))
            object.__setattr__(self, "schedule", ScheduleKind(self.schedule))
            object.__setattr__(self, "activation", ActivationKind(self.activation))
            object.__setattr__(self, "freq_init", FreqInit(self.freq_init))
            object.__setattr__(self, "coeff_init", CoeffInit(self.coeff_init))
        except ValueError as e:
            raise ConfigError(str(e)) from e
        preset = DataHelper.get_preset(self.preset)
        if not self.seeds:
            object.__setattr__(self, "seeds", tuple(preset["seeds"]))
        object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))
        if len(set(self.seeds)) != len(self.seeds):
            raise ConfigError(f"Duplicate seeds in {self.seeds}")

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        for key, value in data.items():
            if isinstance(value, Enum):
                data[key] = value.value
            elif isinstance(value, tuple):
                data[key] = list(value)
        return data

    @property
    def config_hash(self) -> str:
        """Hash of everything but the seeds."""
        data = self.to_dict()
        data.pop("seeds")
        return hashlib.sha256(json.dumps(data, sort_keys=True).encode("utf-8")).hexdigest()[:16]

    @property
    def key(self) -> str:
        return cell_key(self.problem.value, self.method.value, self.schedule.value,
                        self.features if self.method.has_feature_map else None)

    def run_id(self, seed: int) -> str:
        return f"{self.problem.value}_{self.method.value}_{self.schedule.value}_{self.config_hash[:8]}_s{seed}"

    @property
    def collocation_sizes(self) -> CollocationSizes:
        return CollocationSizes(**DataHelper.get_preset(self.preset)["collocation"])

    @property
    def feature_count(self) -> int:
        return self.features or DataHelper.get_preset(self.preset)["features"]

    @property
    def uses_rba(self) -> bool:
        return self.method == Method.RBA

    @property
    def uses_wpinn(self) -> bool:
        return self.method == Method.WPINN

    def network_spec(self, seed: int) -> NetworkSpec:
        """
        Network of this method for one seed.

        The seed also draws the frozen RFF projection and RBF centers. An explicit
        feature count sizes the SAFE-NET block, the RFF width (2m) and the RBF centers.
        """
        problem = get_problem(self.problem)
        common = dict(problem_id=self.problem, activation=self.activation, map_seed=seed)
        if self.depth is not None:
            common["depth"] = self.depth
        method = self.method
        if method == Method.SAFENET:
            return NetworkSpec(
                arch=Arch.SAFENET, feature_map=FeatureMapKind.FOURIER, n_features=self.feature_count,
                dkf=True if self.dkf is None else self.dkf,
                normalize=True if self.normalize is None else self.normalize, **common,
            )
        if method == Method.FLS:
            return NetworkSpec(arch=Arch.FLS_4X50, **common)
        if method == Method.RBA:
            kind = FeatureMapKind.PERIODIC if problem.is_periodic else FeatureMapKind.NONE
            return NetworkSpec(arch=Arch.MLP_6X50, feature_map=kind, **common)
        if method == Method.RFF:
            return NetworkSpec(arch=Arch.MLP_4X50, feature_map=FeatureMapKind.RFF,
                               n_features=self.features or 2 * Config.RFF_M, **common)
        if method in (Method.RBF, Method.RBFP):
            kind = FeatureMapKind.RBFP if method == Method.RBFP else FeatureMapKind.RBF
            return NetworkSpec(arch=Arch.MLP_4X50, feature_map=kind,
                               n_features=self.features or Config.RBF_CENTERS, **common)
        return NetworkSpec(arch=Arch.MLP_4X50, dkf=bool(self.dkf), **common)


def expand_document(document: Dict[str, Any], preset: str = None,
                    seeds: Optional[List[int]] = None) -> List[ExperimentConfig]:
    """
    Validate an experiment document and expand it into configs.

    The document holds an "experiments" list and/or a "matrix" whose list-valued
    entries (problems, methods, schedules, features) are crossed. Feature counts
    cross only the methods with a feature map.

    Args:
        document: Parsed JSON document
        preset: Preset override
        seeds: Seed override

    Returns:
        Configs in document order, matrix cells after explicit experiments

    Raises:
        ConfigError: If the document violates the schema or names unknown values
    """
    DataHelper.validate_experiment(document)
    preset = preset or document.get("preset", Config.PRESET)
    base = {k: v for k, v in document.get("defaults", {}).items()}
    entries = [dict(base, **e) for e in document.get("experiments", [])]

    matrix = document.get("matrix")
    if matrix:
        features = matrix.get("features", [None])
        for problem, method, schedule in product(
                matrix["problems"], matrix["methods"], matrix.get("schedules", ["S1"])):
            for count in (features if Method(method).has_feature_map else [None]):
                entry = dict(base, problem=problem, method=method, schedule=schedule)
                if count is not None:
                    entry["features"] = count
                entries.append(entry)

    configs = []
    for entry in entries:
        entry["preset"] = preset
        if seeds:
            entry["seeds"] = seeds
        configs.append(ExperimentConfig(**entry))
    return configs


def l2re(pred: torch.Tensor, truth: torch.Tensor) -> float:
    """
    Relative L2 error ||pred - truth|| / ||truth||.

    Raises:
        ZeroNormError: If truth is all zeros
        ValueError: If the lengths differ
    """
    if pred.shape != truth.shape:
        raise ValueError(f"Shape mismatch: {tuple(pred.shape)} vs {tuple(truth.shape)}")
    norm = torch.linalg.vector_norm(truth)
    if norm.item() == 0.0:
        raise ZeroNormError("Reference has zero norm")
    return (torch.linalg.vector_norm(pred - truth) / norm).item()


def evaluate_l2re(problem: BaseProblem, spec: NetworkSpec, params: ParamVector, refine: int = 1) -> float:
    """L2RE on the fixed evaluation grid of the problem (refined r-fold per axis)."""
    points = GridHelper.evaluation_grid(problem.DOMAIN, refine)
    with torch.no_grad():
        pred = forward(spec, params.detach(), points)
    return l2re(pred, reference_eval(problem, points))
