"""
Oracles module.
Builds, stores and loads numerical reference grids for problems without a closed form.

Burgers: Cole-Hopf integral evaluated with a truncated trapezoid rule.
Allen-Cahn: dealiased Fourier pseudo-spectral method of lines, IMEX SBDF2 in time.

Grid files are CSV: one '#'-prefixed JSON header line (method, nx, nt, bounds,
resolution, step) followed by an nx x nt matrix, row i holding u(x_i, t_0..t_nt-1).
"""

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Tuple

import numpy as np
from scipy.special import softmax

from config.config import Config
from pdes.base_problem import BaseProblem, ProblemId, ReferenceSolution
from utils.decorators import measure_time, retry
from utils.exceptions import OracleConvergenceError
from utils.logger import get_logger

logger = get_logger(__name__)


@dataclass(frozen=True)
class OracleResolution:
    """
    Oracle grid and solver resolution.

    nx - 1 must divide `modes` for spectral oracles so output nodes are collocation nodes.
    """

    nx: int = Config.ORACLE_GRID[0]
    nt: int = Config.ORACLE_GRID[1]
    modes: int = Config.BURGERS_QUAD_NODES
    dt: float = Config.ALLEN_CAHN_DT

    def refined(self) -> "OracleResolution":
        return OracleResolution(nx=self.nx, nt=self.nt, modes=2 * self.modes, dt=self.dt / 2)


def burgers_cole_hopf(x: np.ndarray, t: np.ndarray, viscosity: float, n_nodes: int,
                      window: float = Config.BURGERS_WINDOW) -> np.ndarray:
    """
    Cole-Hopf solution of u_t + u u_x = viscosity u_xx with u(x, 0) = -sin(pi x).

    With eta = sqrt(4 viscosity t) z the heat kernel becomes exp(-z^2); the integrals
    are taken by the trapezoid rule on z in [-window, window]. The cos term adds at
    most 1 / (2 pi viscosity) to the log integrand, so the cut tails are below
    exp(-(window^2 - 1 / (pi viscosity))) relative to the bulk.

    Args:
        x: Spatial nodes
        t: Time nodes
        viscosity: Diffusion coefficient
        n_nodes: Number of trapezoid nodes
        window: Half-width of the truncated z interval

    Returns:
        Array of shape (len(x), len(t))
    """
    z = np.linspace(-window, window, n_nodes)
    log_w = -z ** 2

    u = np.empty((x.size, t.size))
    for j, tj in enumerate(t):
        if tj == 0.0:
            u[:, j] = -np.sin(np.pi * x)
            continue
        c = math.sqrt(4.0 * viscosity * tj)
        y = x[:, None] - c * z[None, :]
        # exp(-cos/(2 pi nu)) spans e^{+-50}; normalise in log space
        probs = softmax(log_w[None, :] - np.cos(np.pi * y) / (2.0 * np.pi * viscosity), axis=1)
        u[:, j] = -(probs * np.sin(np.pi * y)).sum(axis=1)
    return u


def allen_cahn_initial_coefficients(modes: int) -> np.ndarray:
    """
    rfft-scaled Fourier coefficients of x^2 cos(pi x) on the periodic interval [-1, 1].

    The profile has a slope jump at x = +-1, so sampled coefficients carry an O(modes^-2)
    aliasing error; these are the exact projections, with the Nyquist entry dropped.

    Args:
        modes: Number of collocation nodes

    Returns:
        Complex array of length modes // 2 + 1
    """
    m = np.arange(modes // 2 + 1)

    def cosine_moment(n):
        # int_{-1}^{1} x^2 cos(pi n x) dx
        n = np.abs(n)
        safe = np.where(n == 0, 1, n)
        return np.where(n == 0, 2.0 / 3.0, 4.0 * (-1.0) ** n / (np.pi * safe) ** 2)

    c = (cosine_moment(m + 1) + cosine_moment(m - 1)) / 4.0
    u_hat = (modes * (-1.0) ** m * c).astype(complex)
    u_hat[-1] = 0.0
    return u_hat


def allen_cahn_spectral(nx: int, t: np.ndarray, modes: int, dt: float,
                        diffusivity: float, gamma: float) -> np.ndarray:
    """
    Periodic Allen-Cahn u_t = d u_xx + gamma (u - u^3) on [-1, 1], u0 = x^2 cos(pi x).

    Linear term implicit, reaction explicit; SBDF2 after one IMEX-Euler step. The cubic
    is evaluated on a grid padded to 2 * modes, which removes its aliasing.

    Args:
        nx: Number of output nodes including both ends
        t: Uniformly spaced output times starting at 0
        modes: Number of Fourier collocation nodes
        dt: Requested time step (shrunk so it divides the output spacing)
        diffusivity: Coefficient d
        gamma: Reaction coefficient

    Returns:
        Array of shape (nx, len(t))
    """
    if modes % (nx - 1):
        raise ValueError(f"nx - 1 = {nx - 1} must divide modes = {modes}")
    stride = modes // (nx - 1)
    padded = 2 * modes
    half = modes // 2
    k = np.pi * np.fft.rfftfreq(modes, d=1.0 / modes)
    lin = -diffusivity * k ** 2

    def reaction_hat(u_hat):
        wide = np.zeros(padded // 2 + 1, dtype=complex)
        wide[:half] = u_hat[:half]
        u = np.fft.irfft(wide, n=padded) * (padded / modes)
        r_hat = np.fft.rfft(gamma * (u - u ** 3))[:half + 1] * (modes / padded)
        r_hat[-1] = 0.0
        return r_hat

    out_index = np.arange(nx) * stride % modes
    x_out = np.linspace(-1.0, 1.0, nx)
    values = np.empty((nx, t.size))
    values[:, 0] = x_out ** 2 * np.cos(np.pi * x_out)

    spacing = t[1] - t[0] if t.size > 1 else 0.0
    steps = max(1, int(round(spacing / dt))) if spacing else 0
    h = spacing / steps if steps else dt

    u_hat = allen_cahn_initial_coefficients(modes)
    prev_hat, prev_n = None, None
    for j in range(1, t.size):
        for _ in range(steps):
            n_hat = reaction_hat(u_hat)
            if prev_hat is None:
                new_hat = (u_hat + h * n_hat) / (1.0 - h * lin)
            else:
                new_hat = (4.0 * u_hat - prev_hat + 2.0 * h * (2.0 * n_hat - prev_n)) / (3.0 - 2.0 * h * lin)
            prev_hat, prev_n = u_hat, n_hat
            u_hat = new_hat
        values[:, j] = np.fft.irfft(u_hat, n=modes)[out_index]
    return values


def _solve(problem: BaseProblem, res: OracleResolution) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    (x_lo,), (x_hi,) = problem.DOMAIN.x_lo, problem.DOMAIN.x_hi
    x = np.linspace(x_lo, x_hi, res.nx)
    t = np.linspace(problem.DOMAIN.t_lo, problem.DOMAIN.t_hi, res.nt)
    if problem.PROBLEM_ID == ProblemId.BURGERS:
        u = burgers_cole_hopf(x, t, problem.PARAMS["viscosity"], res.modes)
    else:
        u = allen_cahn_spectral(res.nx, t, res.modes, res.dt,
                                problem.PARAMS["diffusivity"], problem.PARAMS["gamma"])
    return x, t, u


@measure_time
def build_oracle(problem: BaseProblem, resolution: OracleResolution = None,
                 check_convergence: bool = True, tol: float = None) -> ReferenceSolution:
    """
    Build a reference grid with an independent numerical method.

    Args:
        problem: Burgers or Allen-Cahn problem
        resolution: Grid and solver resolution (defaults per problem)
        check_convergence: Compare against a doubled resolution
        tol: Maximum allowed max-norm disagreement (uses Config.ORACLE_TOL if not provided)

    Returns:
        OracleGrid reference solution

    Raises:
        OracleConvergenceError: If the two resolutions disagree by more than tol
    """
    if problem.PROBLEM_ID not in (ProblemId.BURGERS, ProblemId.ALLEN_CAHN):
        raise ValueError(f"{problem} has a closed-form reference")
    if resolution is None:
        modes = Config.BURGERS_QUAD_NODES if problem.PROBLEM_ID == ProblemId.BURGERS else Config.ALLEN_CAHN_MODES
        resolution = OracleResolution(modes=modes)
    tol = Config.ORACLE_TOL if tol is None else tol
    method = "cole_hopf_trapezoid" if problem.PROBLEM_ID == ProblemId.BURGERS else "fourier_imex_sbdf2"
    logger.info(f"Building {method} oracle for {problem} at {resolution}")

    x, t, u = _solve(problem, resolution)
    gap = None
    if check_convergence:
        _, _, u_fine = _solve(problem, resolution.refined())
        gap = float(np.max(np.abs(u - u_fine)))
        logger.info(f"Oracle self-convergence gap for {problem}: {gap:.3e}")
        if gap > tol:
            raise OracleConvergenceError(
                f"{problem}: resolutions {resolution.modes} and {2 * resolution.modes} "
                f"disagree by {gap:.3e} > {tol:.1e}"
            )
        u = u_fine

    metadata = {
        "problem": problem.PROBLEM_ID.value,
        "method": method,
        "nx": resolution.nx,
        "nt": resolution.nt,
        "bounds": [x[0], x[-1], t[0], t[-1]],
        "resolution": resolution.modes * (2 if check_convergence else 1),
        "step": resolution.dt / (2 if check_convergence else 1)
        if problem.PROBLEM_ID == ProblemId.ALLEN_CAHN else None,
        "convergence_gap": gap,
    }
    return ReferenceSolution.oracle_grid((x, t), u, metadata)


@retry(max_attempts=Config.MAX_RETRIES, delay=Config.RETRY_DELAY, exceptions=(OSError,))
def save_oracle(reference: ReferenceSolution, path: Path) -> Path:
    """
    Write an oracle grid to CSV.

    Args:
        reference: OracleGrid reference
        path: Target file

    Returns:
        Path of the written file
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    np.savetxt(path, reference.values, fmt="%.17g", delimiter=",",
               header=json.dumps(reference.metadata, sort_keys=True))
    logger.info(f"Oracle saved: {path}")
    return path


@retry(max_attempts=Config.MAX_RETRIES, delay=Config.RETRY_DELAY, exceptions=(OSError,))
def load_oracle(path: Path) -> ReferenceSolution:
    """
    Read an oracle grid written by save_oracle.

    Args:
        path: Source file

    Returns:
        OracleGrid reference
    """
    path = Path(path)
    with open(path, "r", encoding="utf-8") as f:
        metadata = json.loads(f.readline().lstrip("#").strip())
    values = np.loadtxt(path, delimiter=",", ndmin=2)
    x_lo, x_hi, t_lo, t_hi = metadata["bounds"]
    grids = (np.linspace(x_lo, x_hi, metadata["nx"]), np.linspace(t_lo, t_hi, metadata["nt"]))
    logger.info(f"Oracle loaded: {path}")
    return ReferenceSolution.oracle_grid(grids, values, metadata)


def load_or_build(problem: BaseProblem, oracle_dir: Optional[Path] = None) -> ReferenceSolution:
    """
    Load the cached oracle of a problem, building and caching it when missing.

    Args:
        problem: Burgers or Allen-Cahn problem
        oracle_dir: Cache directory (uses Config.ORACLE_DIR if not provided)

    Returns:
        OracleGrid reference
    """
    path = (Path(oracle_dir) / f"{problem.PROBLEM_ID.value}_oracle.csv" if oracle_dir
            else Config.get_oracle_path(problem.PROBLEM_ID.value))
    if path.exists():
        return load_oracle(path)
    reference = build_oracle(problem)
    save_oracle(reference, path)
    return reference
