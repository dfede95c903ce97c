"""
Helper utilities module.
Provides seeding, grid construction, preset/config loading and file output helpers.
"""

import json
import random
from functools import lru_cache
from pathlib import Path
from typing import Any, Dict, Sequence

import numpy as np
import pandas as pd
import torch
from jsonschema import Draft202012Validator

from config.config import Config
from utils.exceptions import ConfigError
from utils.logger import get_logger

logger = get_logger(__name__)


class SeedHelper:
    """Helper class for seeding and torch runtime setup."""

    _configured = False

    @staticmethod
    def configure_torch(threads: int = None):
        """
        Put torch in deterministic float64 CPU mode.

        Args:
            threads: Intra-op thread count (uses Config.TORCH_THREADS if not provided)
        """
        threads = threads or Config.TORCH_THREADS
        torch.set_default_dtype(torch.float64)
        torch.use_deterministic_algorithms(True)
        if torch.get_num_threads() != threads:
            torch.set_num_threads(threads)
        if not SeedHelper._configured:
            logger.debug(f"Torch configured: float64, deterministic, {threads} thread(s)")
            SeedHelper._configured = True

    @staticmethod
    def seed_everything(seed: int):
        """
        Seed python, numpy and torch global generators.

        Args:
            seed: Seed value
        """
        random.seed(seed)
        np.random.seed(seed % 2 ** 32)
        torch.manual_seed(seed)

    @staticmethod
    def generator(seed: int) -> torch.Generator:
        """
        Create a dedicated torch generator.

        Args:
            seed: Seed value

        Returns:
            Seeded torch.Generator
        """
        gen = torch.Generator()
        gen.manual_seed(seed)
        return gen


class GridHelper:
    """Helper class for tensor-product point grids."""

    @staticmethod
    def uniform_grid(lower: Sequence[float], upper: Sequence[float],
                     counts: Sequence[int], endpoint: bool = True) -> torch.Tensor:
        """
        Build a tensor-product grid, first axis varying slowest.

        Args:
            lower: Lower bound per axis
            upper: Upper bound per axis
            counts: Number of nodes per axis
            endpoint: Include the upper bound (False gives a periodic grid)

        Returns:
            Tensor of shape (prod(counts), len(counts))
        """
        axes = []
        for lo, hi, n in zip(lower, upper, counts):
            if endpoint:
                axes.append(torch.linspace(lo, hi, n, dtype=torch.float64))
            else:
                axes.append(lo + (hi - lo) * torch.arange(n, dtype=torch.float64) / n)
        mesh = torch.meshgrid(*axes, indexing="ij")
        return torch.stack([m.reshape(-1) for m in mesh], dim=1)

    @staticmethod
    def evaluation_grid(domain, refine: int = 1) -> torch.Tensor:
        """
        Fixed L2RE evaluation grid of a domain.

        101 x 101 for one spatial dimension, 64 x 64 x 11 for two. A refinement
        factor r uses r*(n-1)+1 nodes per axis so the base grid stays nested.

        Args:
            domain: DomainBox
            refine: Refinement factor

        Returns:
            Tensor of grid points
        """
        base = Config.EVAL_GRID_1D if domain.spatial_dims == 1 else Config.EVAL_GRID_2D
        counts = [refine * (n - 1) + 1 for n in base]
        return GridHelper.uniform_grid(domain.lower, domain.upper, counts)


class DataHelper:
    """Helper class for presets and experiment documents."""

    @staticmethod
    @lru_cache(maxsize=None)
    def load_presets() -> Dict[str, Any]:
        """
        Load scale presets from JSON file.

        Returns:
            Dictionary of presets keyed by name
        """
        with open(Config.PRESETS_FILE, 'r', encoding='utf-8') as f:
            data = json.load(f)
        logger.debug(f"Presets loaded from {Config.PRESETS_FILE}")
        return data

    @staticmethod
    def get_preset(name: str = None) -> Dict[str, Any]:
        """
        Get one preset.

        Args:
            name: Preset name (uses Config.PRESET if not provided)

        Returns:
            Preset dictionary

        Raises:
            ConfigError: If the preset does not exist
        """
        name = name or Config.PRESET
        presets = DataHelper.load_presets()
        if name not in presets:
            raise ConfigError(f"Unknown preset '{name}', expected one of {sorted(presets)}")
        return presets[name]

    @staticmethod
    def load_json(path: Path) -> Any:
        """
        Load a JSON document.

        Args:
            path: File path

        Returns:
            Parsed document

        Raises:
            ConfigError: If the file is missing or not valid JSON
        """
        try:
            with open(path, 'r', encoding='utf-8') as f:
                return json.load(f)
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigError(f"Cannot read config {path}: {e}") from e

    @staticmethod
    def validate_experiment(document: Dict[str, Any]):
        """
        Validate an experiment document against the JSON schema.

        Args:
            document: Parsed experiment document

        Raises:
            ConfigError: Listing every schema violation
        """
        with open(Config.SCHEMA_FILE, 'r', encoding='utf-8') as f:
            schema = json.load(f)
        errors = sorted(Draft202012Validator(schema).iter_errors(document), key=lambda e: list(e.path))
        if errors:
            messages = "; ".join(
                f"{'/'.join(str(p) for p in e.path) or '<root>'}: {e.message}" for e in errors
            )
            raise ConfigError(f"Invalid experiment config: {messages}")


class FileHelper:
    """Helper class for file operations."""

    @staticmethod
    def ensure_directory_exists(directory: Path) -> Path:
        """
        Ensure directory exists.

        Args:
            directory: Directory path

        Returns:
            The directory path
        """
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        return directory

    @staticmethod
    def write_json(data: Any, path: Path) -> Path:
        """
        Write JSON with sorted keys so reruns produce identical bytes.

        Args:
            data: JSON-serialisable object
            path: Target file

        Returns:
            Path of the written file
        """
        path = Path(path)
        FileHelper.ensure_directory_exists(path.parent)
        with open(path, 'w', encoding='utf-8') as f:
            json.dump(data, f, indent=2, sort_keys=True, allow_nan=True)
            f.write("\n")
        logger.info(f"Written: {path}")
        return path

    @staticmethod
    def write_frame(frame: pd.DataFrame, path: Path) -> Path:
        """
        Write a DataFrame as CSV with round-trip float formatting.

        Args:
            frame: Table to write
            path: Target file

        Returns:
            Path of the written file
        """
        path = Path(path)
        FileHelper.ensure_directory_exists(path.parent)
        frame.to_csv(path, index=False, float_format="%.17g", lineterminator="\n")
        logger.info(f"Written: {path}")
        return path
