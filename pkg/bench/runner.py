"""
Runner module.
Executes (config, seed) runs, alone or in a worker pool, and aggregates the results.
"""

import math
import multiprocessing
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from itertools import combinations
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import pandas as pd

from bench.experiment import ExperimentConfig, cell_key, evaluate_l2re
from config.config import Config
from models.checkpoint import save_checkpoint
from models.networks import get_network, init_params
from pdes.benchmarks import get_problem
from spectra.slq import SlqConfig, SpectralDensity, checkpoint_densities, density_frame
from training.collocation import sample_collocation
from training.losses import LossClosure
from training.schedules import ScheduleSpec, TrainReport, run_schedule
from utils.decorators import allure_step, measure_time
from utils.helpers import DataHelper, SeedHelper
from utils.logger import Logger, get_logger

logger = get_logger(__name__)


@dataclass
class ResultRow:
    """One line of the result table; l2re is None for a diverged run."""

    config_hash: str
    run_id: str
    problem: str
    method: str
    schedule: str
    seed: int
    l2re: Optional[float]
    divergence: bool
    iterations: int
    param_count: int
    chosen_lr: Optional[float]
    phase_losses: Dict[str, float] = field(default_factory=dict)
    runtime: float = 0.0
    features: Optional[int] = None

    @property
    def key(self) -> str:
        return cell_key(self.problem, self.method, self.schedule, self.features)

    def to_record(self) -> Dict:
        """Flat record with one loss_<phase> column per phase."""
        record = asdict(self)
        for phase, loss in record.pop("phase_losses").items():
            record[f"loss_{phase}"] = loss
        return record


@dataclass
class RunOutcome:
    row: ResultRow
    trajectory: pd.DataFrame
    eig: Optional[pd.DataFrame] = None
    densities: Dict[int, SpectralDensity] = field(default_factory=dict)


def slq_config(preset: str = None, seed: int = 0) -> SlqConfig:
    data = DataHelper.get_preset(preset)["slq"]
    return SlqConfig(n_probes=data["probes"], steps=data["steps"], seed=seed)


@measure_time
def _train(schedule: ScheduleSpec, closure: LossClosure, params, evaluator, checkpoints) -> TrainReport:
    return run_schedule(schedule, closure, params, evaluator=evaluator, checkpoints=checkpoints)


def run_single(cfg: ExperimentConfig, seed: int, out_dir: Path = None,
               spectral: bool = False, save_params: bool = False) -> RunOutcome:
    """
    Train one seed of one config.

    Args:
        cfg: Experiment config
        seed: Seed for initialization, collocation sampling and frozen maps
        out_dir: Output directory for parameter checkpoints
        spectral: Run SLQ at every spectral checkpoint
        save_params: Write the final parameters as a checkpoint file

    Returns:
        RunOutcome; a diverged run carries divergence=True and no L2RE
    """
    SeedHelper.configure_torch()
    SeedHelper.seed_everything(seed)
    run_id = cfg.run_id(seed)
    Logger.log_run_start(run_id)

    problem = get_problem(cfg.problem)
    spec = cfg.network_spec(seed)
    params = init_params(spec, seed, cfg.freq_init, cfg.coeff_init)
    colloc = sample_collocation(problem, seed, cfg.collocation_sizes)
    closure = LossClosure(problem, spec, colloc, rba=cfg.uses_rba, wpinn=cfg.uses_wpinn)
    schedule = ScheduleSpec.from_preset(cfg.schedule, cfg.preset)
    checkpoints = sorted(set(DataHelper.get_preset(cfg.preset)["spectral_checkpoints"]) | {schedule.total})

    def evaluator(p):
        return evaluate_l2re(problem, spec, p)

    report = _train(schedule, closure, params, evaluator, checkpoints)
    runtime = _train.last_elapsed

    final_l2re = None if report.diverged else evaluate_l2re(problem, spec, report.params)
    row = ResultRow(
        config_hash=cfg.config_hash, run_id=run_id, problem=cfg.problem.value,
        method=cfg.method.value, schedule=cfg.schedule.value, seed=seed, l2re=final_l2re,
        divergence=report.diverged, iterations=report.iterations,
        param_count=get_network(spec).param_count, chosen_lr=report.chosen_lr,
        phase_losses=report.phase_losses(), runtime=runtime,
        features=cfg.features if cfg.method.has_feature_map else None,
    )
    outcome = RunOutcome(row=row, trajectory=report.to_frame())

    if spectral and not report.diverged:
        if report.iterations not in report.snapshots:
            report.snapshots[report.iterations] = report.params.detach()
            report.closure_states[report.iterations] = closure.state_dict()
        outcome.densities = checkpoint_densities(closure, report.snapshots, slq_config(cfg.preset, seed),
                                                 report.closure_states)
        outcome.eig = density_frame(outcome.densities)
        outcome.eig.insert(0, "run_id", run_id)

    if save_params and out_dir is not None:
        save_checkpoint(Path(out_dir) / "checkpoints" / f"{run_id}.ckpt", spec, report.params, seed)

    status = "DIVERGED" if report.diverged else f"COMPLETED (L2RE={final_l2re:.4e})"
    Logger.log_run_end(run_id, status)
    return outcome


def _run_job(job: Tuple[ExperimentConfig, int, Optional[str], bool, bool]) -> RunOutcome:
    cfg, seed, out_dir, spectral, save_params = job
    return run_single(cfg, seed, out_dir, spectral, save_params)


@allure_step("Run experiment matrix")
def run_matrix(configs: Sequence[ExperimentConfig], jobs: int = None, out_dir: Path = None,
               spectral: bool = False, save_params: bool = False) -> List[RunOutcome]:
    """
    Run every (config, seed) pair.

    Independent runs go to a spawn-based process pool when jobs > 1; outcomes
    come back in (config, seed) order either way.

    Args:
        configs: Experiment configs
        jobs: Worker count (uses Config.JOBS if not provided)
        out_dir: Output directory for checkpoints
        spectral: Run SLQ at the spectral checkpoints
        save_params: Write final parameters

    Returns:
        One RunOutcome per (config, seed)
    """
    jobs = jobs or Config.JOBS
    work = [(cfg, seed, str(out_dir) if out_dir else None, spectral, save_params)
            for cfg in configs for seed in cfg.seeds]
    logger.info(f"Running {len(work)} run(s) from {len(configs)} config(s) with {jobs} worker(s)")
    if not work:
        return []
    if jobs == 1:
        return [_run_job(job) for job in work]
    with ProcessPoolExecutor(max_workers=jobs, mp_context=multiprocessing.get_context("spawn")) as pool:
        return list(pool.map(_run_job, work))


def improvement_pct(before: float, after: float) -> Optional[float]:
    """Relative improvement (1 - after/before) * 100; None when undefined."""
    if before is None or after is None or before == 0 or math.isnan(before) or math.isnan(after):
        return None
    return (1.0 - after / before) * 100.0


def results_frame(outcomes: Sequence[RunOutcome]) -> pd.DataFrame:
    """Result table sorted by key and seed."""
    if not outcomes:
        return pd.DataFrame(columns=list(ResultRow.__dataclass_fields__))
    frame = pd.DataFrame([o.row.to_record() for o in outcomes])
    frame["features"] = frame["features"].astype("Int64")
    return frame.sort_values(["problem", "method", "schedule", "config_hash", "seed"], kind="stable",
                             ignore_index=True)


def summarize(outcomes: Sequence[RunOutcome]) -> Dict:
    """
    Medians over completed seeds per problem/method/schedule cell, plus improvements.

    Runs with an explicit feature count form their own cells. Improvements are
    given per problem/method (and feature count) for every pair of schedules,
    keyed "A->B" with A before B in sort order.
    """
    groups: Dict[str, List[ResultRow]] = {}
    for outcome in outcomes:
        groups.setdefault(outcome.row.key, []).append(outcome.row)

    summary: Dict = {}
    by_method: Dict[str, Dict[str, Optional[float]]] = {}
    for key in sorted(groups):
        rows = sorted(groups[key], key=lambda r: r.seed)
        done = [r.l2re for r in rows if not r.divergence]
        first = rows[0]
        summary[key] = {
            "median_l2re": float(pd.Series(done).median()) if done else None,
            "n_completed": len(done),
            "n_diverged": len(rows) - len(done),
            "seeds": [r.seed for r in rows],
            "features": first.features,
            "param_count": first.param_count,
        }
        method_key = f"{first.problem}/{first.method}" + ("" if first.features is None else f"/f{first.features}")
        by_method.setdefault(method_key, {})[first.schedule] = summary[key]["median_l2re"]

    improvements: Dict[str, Dict[str, Optional[float]]] = {}
    for pm, medians in sorted(by_method.items()):
        for a, b in combinations(sorted(medians), 2):
            improvements.setdefault(pm, {})[f"{a}->{b}"] = improvement_pct(medians[a], medians[b])
    summary["improvements"] = improvements
    return summary


def any_diverged(outcomes: Sequence[RunOutcome]) -> bool:
    return any(o.row.divergence for o in outcomes)
