"""
Configuration module for the benchmark suite.
Manages all configuration settings including paths, numerical defaults, logging, etc.
"""

import os
from pathlib import Path

from dotenv import load_dotenv

load_dotenv()


class Config:
    """Central configuration class for the suite."""

    # Preset used when a run does not name one
    PRESET = os.getenv("SAFENET_PRESET", "desk").lower()  # desk, full

    # Paths
    PROJECT_ROOT = Path(__file__).parent.parent
    REPORTS_DIR = Path(os.getenv("SAFENET_REPORTS_DIR", PROJECT_ROOT / "reports"))
    LOGS_DIR = PROJECT_ROOT / "logs"
    ORACLE_DIR = Path(os.getenv("SAFENET_ORACLE_DIR", PROJECT_ROOT / "oracles"))
    CHECKPOINT_DIR = REPORTS_DIR / "checkpoints"
    PRESETS_FILE = PROJECT_ROOT / "config" / "presets.json"
    SCHEMA_FILE = PROJECT_ROOT / "config" / "experiment_schema.json"

    # Ensure directories exist
    REPORTS_DIR.mkdir(parents=True, exist_ok=True)
    LOGS_DIR.mkdir(exist_ok=True)

    # Torch runtime
    TORCH_THREADS = int(os.getenv("SAFENET_TORCH_THREADS", "1"))
    JOBS = int(os.getenv("SAFENET_JOBS", "1"))

    # Loss weights
    LAMBDA_RES = 1.0
    LAMBDA_BC = 100.0
    LAMBDA_IC = 100.0

    # Residual-based attention
    RBA_GAMMA = 0.999
    RBA_ETA = 0.01
    RBA_EMBEDDING_MODES = 5

    # W-PINN trace weights
    WPINN_EVERY = 1000
    WPINN_TRACE_POINTS = 128
    WPINN_MIN_TRACE = 1e-12

    # Adam
    ADAM_LR = 1e-3
    ADAM_BETAS = (0.9, 0.999)
    ADAM_EPS = 1e-8
    LR_DECAY = 0.9
    LR_DECAY_EVERY = 2000

    # L-BFGS
    LBFGS_MEMORY = 50
    LBFGS_C1 = 1e-4
    LBFGS_C2 = 0.9
    LBFGS_TOL = 1e-10
    LBFGS_MAX_LINESEARCH = 25
    STALL_WINDOW = 200
    STALL_RTOL = 1e-12

    # Schedule S2 Adam(1) learning-rate grids
    S2_LR_GRID_DESK = [1e-2, 1e-3]
    S2_LR_GRID_FULL = [1e-1, 1e-2, 1e-3, 1e-4, 1e-5]

    # Feature maps
    NORMALIZE_EPS = 1e-3
    RFF_SIGMA_SPATIAL = 200.0
    RFF_SIGMA_TEMPORAL = 10.0
    RFF_M = 64
    RBF_SIGMA = 1.0
    RBF_CENTERS = 128
    RBFP_ORDER = 2
    HIDDEN_WIDTH = 50

    # Spectral diagnostics
    SLQ_PROBES = 100
    SLQ_STEPS = 200
    SLQ_BANDWIDTH_FRACTION = 0.01
    SLQ_BREAKDOWN_TOL = 1e-10
    DENSITY_THRESHOLDS = [1.0, 1e2, 1e4]

    # Evaluation grids for L2RE
    EVAL_GRID_1D = (101, 101)
    EVAL_GRID_2D = (64, 64, 11)
    EVAL_EVERY = 100

    # Oracles
    BURGERS_QUAD_NODES = 1024
    BURGERS_WINDOW = 12.0
    ALLEN_CAHN_MODES = 2048
    ALLEN_CAHN_DT = 2.5e-5
    ORACLE_GRID = (257, 101)
    ORACLE_TOL = 1e-6

    # Retry settings (oracle file I/O)
    MAX_RETRIES = 3
    RETRY_DELAY = 1  # seconds

    # Logging settings
    LOG_LEVEL = os.getenv("LOG_LEVEL", "INFO")
    LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"
    LOG_DATE_FORMAT = "%Y-%m-%d %H:%M:%S"

    @classmethod
    def get_run_dir(cls, out_dir: str = None) -> Path:
        """
        Resolve the output directory of a run and make sure it exists.

        Args:
            out_dir: Explicit output directory (uses REPORTS_DIR if not provided)

        Returns:
            Path object for the output directory
        """
        path = Path(out_dir) if out_dir else cls.REPORTS_DIR
        path.mkdir(parents=True, exist_ok=True)
        return path

    @classmethod
    def get_oracle_path(cls, problem_id: str) -> Path:
        """
        Generate oracle grid path for a problem.

        Args:
            problem_id: Problem identifier (e.g. "burgers")

        Returns:
            Path object for the oracle CSV file
        """
        return cls.ORACLE_DIR / f"{problem_id}_oracle.csv"

    @classmethod
    def get_log_path(cls, log_name: str = "safenet") -> Path:
        """
        Generate log file path.

        Args:
            log_name: Name of the log file

        Returns:
            Path object for log file
        """
        from datetime import datetime
        timestamp = datetime.now().strftime("%Y%m%d")
        filename = f"{log_name}_{timestamp}.log"
        return cls.LOGS_DIR / filename

    @classmethod
    def s2_lr_grid(cls, preset: str = None) -> list:
        """
        Adam(1) learning-rate grid searched by schedule S2.

        Args:
            preset: Preset name (desk, full)

        Returns:
            List of learning rates
        """
        preset = preset or cls.PRESET
        grid = cls.S2_LR_GRID_FULL if preset == "full" else cls.S2_LR_GRID_DESK
        return list(grid)
