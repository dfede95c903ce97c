"""
Pytest configuration and fixtures.
Contains torch setup, shared problems, tiny networks, quadratic losses and a tiny preset.
"""

import copy
import json
import platform
from datetime import datetime

import allure
import pytest
import torch

from config.config import Config
from models.networks import Arch, FeatureMapKind, NetworkSpec, init_params
from models.params import ParamVector, SegmentLayout
from pdes.benchmarks import get_problem
from utils.helpers import DataHelper, SeedHelper
from utils.logger import Logger, get_logger

logger = get_logger(__name__)

TINY_PHASES = {
    "S1": [{"name": "adam", "optimizer": "adam", "end_at": 20},
           {"name": "lbfgs", "optimizer": "lbfgs", "end_at": 30}],
    "S2": [{"name": "adam1", "optimizer": "adam", "end_at": 6, "lr_search": True},
           {"name": "lbfgs1", "optimizer": "lbfgs", "end_at": 16},
           {"name": "adam2", "optimizer": "adam", "end_at": 22, "lr_scale": 0.5},
           {"name": "lbfgs2", "optimizer": "lbfgs", "end_at": 30}],
    "S3a": [{"name": "adam", "optimizer": "adam", "end_at": 15},
            {"name": "lbfgs", "optimizer": "lbfgs", "end_at": 30}],
    "S3b": [{"name": "adam", "optimizer": "adam", "end_at": 8},
            {"name": "lbfgs", "optimizer": "lbfgs", "end_at": 30}],
    "S3c": [{"name": "adam", "optimizer": "adam", "end_at": 4},
            {"name": "lbfgs", "optimizer": "lbfgs", "end_at": 30}],
    "S3d": [{"name": "adam1", "optimizer": "adam", "end_at": 12},
            {"name": "lbfgs", "optimizer": "lbfgs", "end_at": 20},
            {"name": "adam2", "optimizer": "adam", "end_at": 30}],
    "S3e": [{"name": "adam", "optimizer": "adam", "end_at": 30, "plateau_patience": 5},
            {"name": "lbfgs", "optimizer": "lbfgs", "end_at": 30}],
    "S4": [{"name": "adam", "optimizer": "adam", "end_at": 10}],
}

TINY_PRESET = {
    "collocation": {"n_res": 64, "n_bc": 16, "n_ic": 16},
    "features": 16,
    "seeds": [0, 1],
    "budget": 30,
    "s2_lr_grid": [1e-2, 1e-3],
    "slq": {"probes": 2, "steps": 8},
    "spectral_checkpoints": [5],
    "feature_ablation": [8, 16],
    "schedules": TINY_PHASES,
}


def pytest_addoption(parser):
    """Add custom command line options."""
    parser.addoption(
        "--runslow",
        action="store_true",
        default=False,
        help="Run desk-scale acceptance tests marked slow"
    )


def pytest_collection_modifyitems(config, items):
    """Skip slow tests unless --runslow is given."""
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.hookimpl(optionalhook=True)
def pytest_html_report_title(report):
    """Title of the pytest-html report."""
    report.title = f"SAFE-NET Benchmark Suite ({Config.PRESET} preset)"


@pytest.fixture(scope="session", autouse=True)
def torch_setup():
    """float64, deterministic, single-threaded torch for the whole session."""
    SeedHelper.configure_torch(threads=1)
    yield


@pytest.fixture(scope="session", autouse=True)
def configure_allure_environment():
    """Configure Allure environment properties."""
    try:
        import numpy
        import scipy

        environment_properties = {
            "Platform": platform.system(),
            "Python Version": platform.python_version(),
            "Torch Version": torch.__version__,
            "NumPy Version": numpy.__version__,
            "SciPy Version": scipy.__version__,
            "Preset": Config.PRESET,
            "Torch Threads": str(torch.get_num_threads()),
        }

        allure_results_dir = Config.REPORTS_DIR / "allure-results"
        allure_results_dir.mkdir(exist_ok=True)

        env_file = allure_results_dir / "environment.properties"
        with open(env_file, 'w') as f:
            for key, value in environment_properties.items():
                f.write(f"{key}={value}\n")

        logger.info("Allure environment configured")
    except Exception as e:
        logger.warning(f"Failed to configure Allure environment: {e}")


@pytest.fixture(scope="session", autouse=True)
def test_session_setup():
    """Session-level setup."""
    logger.info("=" * 80)
    logger.info("TEST SESSION STARTED")
    logger.info(f"Timestamp: {datetime.now().strftime('%Y-%m-%d %H:%M:%S')}")
    logger.info(f"Torch: {torch.__version__}, default dtype {torch.get_default_dtype()}")
    logger.info("=" * 80)

    yield

    logger.info("=" * 80)
    logger.info("TEST SESSION COMPLETED")
    logger.info("=" * 80)


@pytest.fixture(autouse=True)
def log_test(request):
    Logger.log_run_start(request.node.name)
    yield
    Logger.log_run_end(request.node.name, "DONE")


@pytest.fixture
def wave():
    return get_problem("wave")


@pytest.fixture
def diffusion():
    return get_problem("diffusion")


@pytest.fixture
def convection():
    return get_problem("convection")


@pytest.fixture
def make_spec():
    """
    Factory for small networks.

    Returns:
        Callable(problem_id, arch=MLP_4X50, **overrides) -> NetworkSpec with width 6, depth 2
    """
    def factory(problem_id="wave", arch=Arch.MLP_4X50, **overrides):
        options = {"hidden_width": 6, "depth": 2}
        options.update(overrides)
        return NetworkSpec(arch=arch, problem_id=problem_id, **options)

    return factory


@pytest.fixture
def tiny_safenet(make_spec):
    """Single-hidden-layer SAFE-NET on Wave with 16 Fourier features, DKF and normalization."""
    spec = make_spec("wave", Arch.SAFENET, feature_map=FeatureMapKind.FOURIER, n_features=16,
                     dkf=True, normalize=True, depth=1)
    return spec, init_params(spec, seed=0)


@pytest.fixture
def quadratic():
    """
    Factory for quadratic losses 0.5 p^T A p - b^T p on a single-segment vector.

    Returns:
        Callable(A, b=None, start=None) -> (closure, ParamVector)
    """
    def factory(A, b=None, start=None):
        A = torch.as_tensor(A, dtype=torch.float64)
        n = A.shape[0]
        b = torch.zeros(n, dtype=torch.float64) if b is None else torch.as_tensor(b, dtype=torch.float64)
        layout = SegmentLayout.from_shapes([("p", (n,))])
        values = torch.ones(n, dtype=torch.float64) if start is None else torch.as_tensor(start, dtype=torch.float64)

        def closure(params):
            p = params.values
            return 0.5 * p @ (A @ p) - b @ p

        return closure, ParamVector(values.clone(), layout)

    return factory


@pytest.fixture
def tiny_preset(tmp_path, monkeypatch):
    """
    Replace the "desk" preset by a tiny one for fast end-to-end runs.

    The real presets file is read once and rewritten to a temporary location.
    """
    with open(Config.PRESETS_FILE, 'r', encoding='utf-8') as f:
        presets = json.load(f)
    presets["desk"] = copy.deepcopy(TINY_PRESET)
    path = tmp_path / "presets.json"
    path.write_text(json.dumps(presets), encoding="utf-8")

    monkeypatch.setattr(Config, "PRESETS_FILE", path)
    monkeypatch.setattr(Config, "PRESET", "desk")
    DataHelper.load_presets.cache_clear()
    allure.attach(json.dumps(TINY_PRESET, indent=2), name="Tiny preset",
                  attachment_type=allure.attachment_type.JSON)
    yield presets["desk"]
    DataHelper.load_presets.cache_clear()


@pytest.fixture
def out_dir(tmp_path):
    path = tmp_path / "out"
    path.mkdir()
    return path
