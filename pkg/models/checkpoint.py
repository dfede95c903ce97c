"""
Checkpoint module.
One JSON header line (arch, spec hash, seed, spec, segments) followed by the flat
parameter array as little-endian float64 bytes.
"""

import json
from pathlib import Path
from typing import Tuple

import numpy as np
import torch

from models.networks import NetworkSpec, get_network
from models.params import ParamVector, SegmentLayout
from utils.decorators import retry
from utils.exceptions import SegmentMismatchError
from utils.helpers import FileHelper
from utils.logger import get_logger
from config.config import Config

logger = get_logger(__name__)


@retry(max_attempts=Config.MAX_RETRIES, delay=Config.RETRY_DELAY, exceptions=(OSError,))
def save_checkpoint(path: Path, spec: NetworkSpec, params: ParamVector, seed: int) -> Path:
    """
    Write a checkpoint.

    Args:
        path: Target file
        spec: Network spec the parameters belong to
        params: Parameter vector
        seed: Seed of the run that produced it

    Returns:
        Path of the written file
    """
    path = Path(path)
    FileHelper.ensure_directory_exists(path.parent)
    header = {
        "arch": spec.arch.value,
        "spec_hash": spec.spec_hash,
        "seed": seed,
        "spec": spec.to_dict(),
        "segments": params.segments.to_dict(),
    }
    payload = params.values.detach().cpu().numpy().astype("<f8").tobytes()
    with open(path, "wb") as f:
        f.write(json.dumps(header, sort_keys=True).encode("utf-8") + b"\n")
        f.write(payload)
    logger.debug(f"Checkpoint written: {path} ({len(params)} parameters)")
    return path


@retry(max_attempts=Config.MAX_RETRIES, delay=Config.RETRY_DELAY, exceptions=(OSError,))
def load_checkpoint(path: Path) -> Tuple[NetworkSpec, ParamVector, int]:
    """
    Read a checkpoint.

    Args:
        path: Checkpoint file

    Returns:
        (spec, params, seed)

    Raises:
        SegmentMismatchError: If the stored segments disagree with the rebuilt network
    """
    with open(path, "rb") as f:
        header = json.loads(f.readline().decode("utf-8"))
        payload = f.read()
    spec = NetworkSpec.from_dict(header["spec"])
    if spec.spec_hash != header["spec_hash"]:
        raise SegmentMismatchError(f"{path}: spec hash mismatch")
    layout = SegmentLayout.from_dict(header["segments"])
    network = get_network(spec)
    if layout != network.layout:
        raise SegmentMismatchError(f"{path}: stored segments do not match {network}")
    values = torch.from_numpy(np.frombuffer(payload, dtype="<f8").astype(np.float64))
    return spec, ParamVector(values, layout), header["seed"]
