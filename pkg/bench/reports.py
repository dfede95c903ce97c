"""
Reports module.
Writes result tables, trajectories, spectral series and the JSON summary.
"""

import logging
from pathlib import Path
from typing import Dict, Sequence

import pandas as pd

from bench.experiment import evaluate_l2re
from bench.runner import RunOutcome, results_frame, summarize
from models.networks import NetworkSpec
from models.params import ParamVector
from pdes.base_problem import BaseProblem
from spectra.slq import SpectralDensity
from utils.decorators import log_action
from utils.helpers import FileHelper
from utils.logger import get_logger

logger = get_logger(__name__)


def write_density(density: SpectralDensity, directory: Path, stem: str) -> Dict[str, Path]:
    """
    Write Ritz nodes/weights and the smoothed (lambda, rho) series of one density.

    Returns:
        Paths keyed "nodes" and "smoothed"
    """
    directory = FileHelper.ensure_directory_exists(directory)
    return {
        "nodes": FileHelper.write_frame(density.to_frame(), directory / f"{stem}_nodes.csv"),
        "smoothed": FileHelper.write_frame(density.smoothed(), directory / f"{stem}_density.csv"),
    }


def grid_sensitivity(problem: BaseProblem, spec: NetworkSpec, params: ParamVector,
                     refine: int = 2) -> Dict[str, float]:
    """L2RE on the default evaluation grid and on a refined one."""
    default = evaluate_l2re(problem, spec, params)
    refined = evaluate_l2re(problem, spec, params, refine=refine)
    logger.info(f"Grid sensitivity for {problem}: default {default:.6e}, refine x{refine} {refined:.6e}")
    return {"l2re_default": default, f"l2re_refine{refine}": refined,
            "relative_change": abs(refined - default) / default if default else None}


def l2re_curves(outcomes: Sequence[RunOutcome]) -> pd.DataFrame:
    """(iter, L2RE) series of every run, evaluated rows only."""
    frames = []
    for outcome in outcomes:
        traj = outcome.trajectory[["iter", "L2RE"]].dropna()
        frames.append(traj.assign(run_id=outcome.row.run_id)[["run_id", "iter", "L2RE"]])
    if not frames:
        return pd.DataFrame(columns=["run_id", "iter", "L2RE"])
    return pd.concat(frames, ignore_index=True)


def param_count_table(outcomes: Sequence[RunOutcome]) -> pd.DataFrame:
    """Parameter count per problem, method and explicit feature count."""
    rows = {(o.row.problem, o.row.method, o.row.features): o.row.param_count for o in outcomes}
    ordered = sorted(rows.items(), key=lambda item: (item[0][0], item[0][1], item[0][2] or 0))
    frame = pd.DataFrame([{"problem": p, "method": m, "features": f, "param_count": n} for (p, m, f), n in ordered],
                         columns=["problem", "method", "features", "param_count"])
    frame["features"] = frame["features"].astype("Int64")
    return frame


@log_action(level=logging.DEBUG)
def emit_reports(outcomes: Sequence[RunOutcome], out_dir: Path) -> Dict[str, Path]:
    """
    Write every artifact of a matrix run.

    results.csv and the trajectories hold no wall-clock values, so reruns with
    the same seeds reproduce them byte for byte; runtimes go to timings.csv.

    Args:
        outcomes: Run outcomes
        out_dir: Output directory

    Returns:
        Written paths keyed by artifact name
    """
    out_dir = FileHelper.ensure_directory_exists(out_dir)
    table = results_frame(outcomes)
    paths = {
        "results": FileHelper.write_frame(table.drop(columns=["runtime"]), out_dir / "results.csv"),
        "timings": FileHelper.write_frame(table[["run_id", "runtime"]], out_dir / "timings.csv"),
        "summary": FileHelper.write_json(summarize(outcomes), out_dir / "summary.json"),
        "param_counts": FileHelper.write_frame(param_count_table(outcomes), out_dir / "param_counts.csv"),
        "l2re_curves": FileHelper.write_frame(l2re_curves(outcomes), out_dir / "l2re_curves.csv"),
    }
    for outcome in outcomes:
        FileHelper.write_frame(outcome.trajectory, out_dir / "trajectories" / f"{outcome.row.run_id}.csv")
        for it, density in outcome.densities.items():
            write_density(density, out_dir / "spectra", f"{outcome.row.run_id}_it{it}")

    eig = [o.eig for o in outcomes if o.eig is not None]
    if eig:
        paths["eig_trajectory"] = FileHelper.write_frame(pd.concat(eig, ignore_index=True),
                                                         out_dir / "eig_trajectory.csv")
    logger.info(f"Reports for {len(outcomes)} run(s) written to {out_dir}")
    return paths
