"""
Schedules module.
Phase-structured Adam / L-BFGS training runs and their trajectory report.
"""

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import pandas as pd
import torch

from autodiff.engine import loss_gradient
from config.config import Config
from models.params import ParamVector
from training import lbfgs as lbfgs_mod
from training.lbfgs import LbfgsState, lbfgs_step
from training.losses import LossClosure
from training.optimizers import AdamState, adam_step
from utils.exceptions import ConfigError, NonFiniteLossError
from utils.helpers import DataHelper
from utils.logger import Logger, get_logger

logger = get_logger(__name__)

TRAJECTORY_COLUMNS = ["iter", "phase", "loss", "L_res", "L_bc", "L_ic", "grad_norm", "L2RE"]


class ScheduleKind(str, Enum):
    S1 = "S1"
    S2 = "S2"
    S3A = "S3a"
    S3B = "S3b"
    S3C = "S3c"
    S3D = "S3d"
    S3E = "S3e"
    S4 = "S4"


@dataclass(frozen=True)
class Phase:
    """
    One optimizer phase ending at an absolute iteration.

    An L-BFGS phase also ends when the optimizer stalls; an Adam phase with a
    plateau patience also ends when the loss plateaus.
    """

    name: str
    optimizer: str
    end_at: int
    lr_scale: float = 1.0
    plateau_patience: Optional[int] = None
    lr_search: bool = False

    def __post_init__(self):
        if self.optimizer not in ("adam", "lbfgs"):
            raise ConfigError(f"Unknown optimizer '{self.optimizer}' in phase '{self.name}'")


@dataclass(frozen=True)
class ScheduleSpec:
    kind: ScheduleKind
    phases: Tuple[Phase, ...]
    lr_grid: Tuple[float, ...] = ()

    def __post_init__(self):
        ends = [p.end_at for p in self.phases]
        if not ends or ends != sorted(ends) or ends[0] < 0:
            raise ConfigError(f"Schedule {self.kind}: phase ends must be non-decreasing, got {ends}")

    @property
    def total(self) -> int:
        return self.phases[-1].end_at

    @classmethod
    def from_preset(cls, kind, preset: str = None) -> "ScheduleSpec":
        """
        Build a schedule from the presets file.

        Raises:
            ConfigError: If the preset or the schedule kind is unknown
        """
        kind = ScheduleKind(kind)
        data = DataHelper.get_preset(preset)
        if kind.value not in data["schedules"]:
            raise ConfigError(f"Schedule {kind.value} missing from preset")
        phases = tuple(Phase(**p) for p in data["schedules"][kind.value])
        grid = tuple(data.get("s2_lr_grid", Config.s2_lr_grid(preset))) if kind == ScheduleKind.S2 else ()
        return cls(kind=kind, phases=phases, lr_grid=grid)


class PlateauDetector:
    """Fires after `patience` iterations without a relative improvement of min_delta on the best loss."""

    def __init__(self, patience: int, min_delta: float = 1e-4):
        self.patience = patience
        self.min_delta = min_delta
        self.best = math.inf
        self.wait = 0

    def update(self, loss: float) -> bool:
        if loss < self.best * (1 - self.min_delta) or self.best == math.inf:
            self.best = loss
            self.wait = 0
        else:
            self.wait += 1
        return self.wait >= self.patience


@dataclass
class TrainReport:
    rows: List[Dict] = field(default_factory=list)
    phase_boundaries: List[Tuple[str, int]] = field(default_factory=list)
    divergence: Optional[Dict] = None
    snapshots: Dict[int, ParamVector] = field(default_factory=dict)
    closure_states: Dict[int, Dict] = field(default_factory=dict)
    stalls: List[Tuple[str, int, str]] = field(default_factory=list)
    chosen_lr: Optional[float] = None
    params: Optional[ParamVector] = None
    iterations: int = 0

    @property
    def diverged(self) -> bool:
        return self.divergence is not None

    @property
    def final_loss(self) -> float:
        return self.rows[-1]["loss"] if self.rows else math.nan

    def phase_losses(self) -> Dict[str, float]:
        """Last recorded loss of every phase."""
        out = {}
        for row in self.rows:
            out[row["phase"]] = row["loss"]
        return out

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.rows, columns=TRAJECTORY_COLUMNS)


Evaluator = Callable[[ParamVector], float]


def _key(values: torch.Tensor) -> bytes:
    return values.detach().numpy().tobytes()


class ScheduleRunner:
    """Runs the phases of one schedule on one loss closure."""

    def __init__(self, closure: LossClosure, evaluator: Optional[Evaluator] = None,
                 checkpoints: Sequence[int] = (), eval_every: int = Config.EVAL_EVERY,
                 base_lr: float = Config.ADAM_LR, wpinn_every: int = Config.WPINN_EVERY):
        self.closure = closure
        self.evaluator = evaluator
        self.checkpoints = set(checkpoints)
        self.eval_every = eval_every
        self.base_lr = base_lr
        self.wpinn_every = wpinn_every

    def _row(self, report: TrainReport, it: int, phase: Phase, terms: Dict[str, float],
             grad: torch.Tensor, params: ParamVector):
        l2re = math.nan
        if self.evaluator is not None and it % self.eval_every == 0:
            l2re = self.evaluator(params)
        report.rows.append({
            "iter": it, "phase": phase.name, **terms,
            "grad_norm": torch.linalg.vector_norm(grad).item(), "L2RE": l2re,
        })

    def _snapshot(self, report: TrainReport, it: int, params: ParamVector):
        if it in self.checkpoints and it not in report.snapshots:
            report.snapshots[it] = params.detach()
            report.closure_states[it] = self.closure.state_dict()

    def _refresh_weights(self, it: int, params: ParamVector) -> bool:
        """Per-iteration loss updates; True when the loss function changed."""
        changed = False
        if self.closure.rba:
            self.closure.update_rba(params)
            changed = True
        if self.closure.wpinn and it % self.wpinn_every == 0:
            self.closure.update_wpinn(params)
            changed = True
        return changed

    def _diverge(self, report: TrainReport, it: int, phase: Phase, reason: str):
        report.divergence = {"iter": it, "phase": phase.name, "reason": reason}
        Logger.log_divergence(phase.name, it, reason)

    def run_adam(self, report: TrainReport, phase: Phase, params: ParamVector,
                 start: int, lr: float) -> Tuple[ParamVector, int]:
        state = AdamState(params, lr=lr)
        plateau = PlateauDetector(phase.plateau_patience) if phase.plateau_patience else None
        it = start
        while it < phase.end_at:
            self._snapshot(report, it, params)
            try:
                self._refresh_weights(it, params)
                loss, grad = loss_gradient(self.closure, params)
            except NonFiniteLossError as e:
                self._diverge(report, it, phase, str(e))
                break
            self._row(report, it, phase, dict(self.closure.last_terms), grad, params)
            params = adam_step(state, grad)
            it += 1
            if plateau is not None and plateau.update(loss):
                logger.info(f"Loss plateau after {plateau.patience} iterations without improvement")
                break
        return params, it

    def run_lbfgs(self, report: TrainReport, phase: Phase, params: ParamVector,
                  start: int) -> Tuple[ParamVector, int]:
        state = LbfgsState()
        terms_at: Dict[bytes, Dict[str, float]] = {}

        def fun(values: torch.Tensor):
            f, g = loss_gradient(self.closure, params.with_values(values))
            terms_at[_key(values)] = dict(self.closure.last_terms)
            return f, g

        it = start
        while it < phase.end_at:
            self._snapshot(report, it, params)
            try:
                if self._refresh_weights(it, params):
                    state.invalidate()
                    terms_at.clear()
                state.ensure(fun, params.values)
            except NonFiniteLossError as e:
                self._diverge(report, it, phase, str(e))
                break
            self._row(report, it, phase, terms_at[_key(params.values)], state.grad, params)
            result = lbfgs_step(state, fun, params.values)
            if result.stall == lbfgs_mod.NON_FINITE:
                self._diverge(report, it, phase, "non-finite loss in line search")
                break
            if result.step_size > 0:
                params = params.with_values(result.values)
                terms_at = {_key(params.values): terms_at[_key(params.values)]}
                it += 1
            if result.stall is not None:
                report.stalls.append((phase.name, it, result.stall))
                logger.info(f"L-BFGS stalled at iteration {it}: {result.stall}")
                break
        return params, it

    def _run_phase(self, report: TrainReport, phase: Phase, params: ParamVector,
                   start: int, lr: float) -> Tuple[ParamVector, int]:
        report.phase_boundaries.append((phase.name, start))
        Logger.log_phase(phase.name, start)
        if phase.optimizer == "adam":
            return self.run_adam(report, phase, params, start, lr * phase.lr_scale)
        return self.run_lbfgs(report, phase, params, start)

    def _search_lr(self, report: TrainReport, phase: Phase, params: ParamVector,
                   grid: Sequence[float]) -> Tuple[ParamVector, int, float]:
        """Run the phase once per lr from the same start; keep the lowest final training loss."""
        initial = self.closure.state_dict()
        best = None
        for lr in grid:
            self.closure.load_state_dict(initial)
            trial = TrainReport()
            trial_params, it = self._run_phase(trial, phase, params, 0, lr)
            final = math.inf if trial.diverged or not trial.rows else trial.final_loss
            logger.info(f"lr search {phase.name}: lr={lr:g} final loss {final:.6e}")
            if best is None or final < best[0]:
                best = (final, lr, trial, trial_params, it, self.closure.state_dict())
        _, lr, trial, trial_params, it, closure_state = best
        self.closure.load_state_dict(closure_state)
        report.rows.extend(trial.rows)
        report.phase_boundaries.extend(trial.phase_boundaries)
        report.snapshots.update(trial.snapshots)
        report.closure_states.update(trial.closure_states)
        report.divergence = trial.divergence
        return trial_params, it, lr

    def run(self, schedule: ScheduleSpec, params: ParamVector) -> TrainReport:
        """
        Run every phase in order.

        Returns:
            TrainReport; divergence stops the run and is recorded, never raised
        """
        report = TrainReport(chosen_lr=self.base_lr)
        it = 0
        lr = self.base_lr
        for phase in schedule.phases:
            if phase.lr_search and schedule.lr_grid and it == 0:
                params, it, lr = self._search_lr(report, phase, params, schedule.lr_grid)
                report.chosen_lr = lr
            else:
                params, it = self._run_phase(report, phase, params, it, lr)
            if report.diverged:
                break
        self._snapshot(report, it, params)
        report.params = params
        report.iterations = it
        return report


def run_schedule(schedule: ScheduleSpec, closure: LossClosure, params: ParamVector,
                 evaluator: Optional[Evaluator] = None, checkpoints: Sequence[int] = (),
                 eval_every: int = Config.EVAL_EVERY, base_lr: float = Config.ADAM_LR) -> TrainReport:
    """
    Train with a schedule.

    Args:
        schedule: Phases to run
        closure: Training loss
        params: Initial parameters
        evaluator: L2RE of a parameter vector, called every eval_every iterations
        checkpoints: Iterations at which to keep a parameter snapshot
        eval_every: Evaluation cadence
        base_lr: Adam learning rate before phase scaling (S2 replaces it with the searched one)

    Returns:
        TrainReport
    """
    runner = ScheduleRunner(closure, evaluator, checkpoints, eval_every, base_lr)
    return runner.run(schedule, params)
