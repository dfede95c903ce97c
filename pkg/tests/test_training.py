"""
Training tests.
Collocation sampling, the weighted loss, RBA and W-PINN weights, Adam, L-BFGS and schedules.
"""

import math

import pytest
import allure
import torch

from models.networks import init_params
from models.params import ParamVector, SegmentLayout
from pdes.base_problem import BcKind
from training import lbfgs as lbfgs_mod
from training.collocation import CollocationSizes, sample_collocation
from training.lbfgs import LbfgsState, lbfgs_step, two_loop_direction
from training.losses import LossClosure, LossWeights, loss_terms, rba_update, trace_weights, wpinn_weights
from training.optimizers import AdamState, adam_step
from training.schedules import (
    TRAJECTORY_COLUMNS,
    Phase,
    PlateauDetector,
    ScheduleKind,
    ScheduleSpec,
    run_schedule,
)
from utils.exceptions import ConfigError, NonFiniteLossError, ZeroTraceError
from utils.helpers import SeedHelper
from utils.logger import get_logger

logger = get_logger(__name__)

SMALL = CollocationSizes(n_res=32, n_bc=8, n_ic=8)


def value_and_grad(closure, params):
    def fun(values):
        leaf = values.detach().clone().requires_grad_(True)
        loss = closure(params.with_values(leaf))
        if not torch.isfinite(loss):
            raise NonFiniteLossError("loss")
        grad, = torch.autograd.grad(loss, leaf)
        return loss.item(), grad.detach()
    return fun


def rosenbrock(params):
    x, y = params.values[0], params.values[1]
    return (1 - x) ** 2 + 100 * (y - x ** 2) ** 2


def run_lbfgs(state, fun, values, max_iter):
    result = None
    for _ in range(max_iter):
        result = lbfgs_step(state, fun, values)
        values = result.values
        if result.stall is not None:
            break
    return result


class CountingClosure:
    """Quadratic loss that turns NaN after a fixed number of evaluations."""

    rba = False
    wpinn = False

    def __init__(self, fail_after):
        self.fail_after = fail_after
        self.calls = 0
        self.last_terms = {}

    def __call__(self, params):
        self.calls += 1
        loss = 0.5 * (params.values ** 2).sum()
        if self.calls > self.fail_after:
            loss = loss * float("nan")
        self.last_terms = {"loss": loss.item(), "L_res": loss.item(), "L_bc": 0.0, "L_ic": 0.0}
        return loss


@allure.feature("Training")
@allure.story("Collocation")
class TestCollocation:
    """Seeded interior, boundary and initial points."""

    @pytest.mark.smoke
    @pytest.mark.training
    @allure.title("Sampling is seeded and respects the domain")
    @allure.severity(allure.severity_level.CRITICAL)
    def test_sampling(self, wave):
        first, again = sample_collocation(wave, 0, SMALL), sample_collocation(wave, 0, SMALL)
        assert torch.equal(first.interior, again.interior)
        assert not torch.equal(first.interior, sample_collocation(wave, 1, SMALL).interior)
        assert first.interior.shape == (32, 2)
        lower = torch.tensor(wave.DOMAIN.lower)
        upper = torch.tensor(wave.DOMAIN.upper)
        assert torch.all((first.interior >= lower) & (first.interior <= upper))
        assert torch.all(first.initial[:, -1] == wave.DOMAIN.t_lo)
        assert torch.equal(first.rba_weights, torch.zeros(32))

    @pytest.mark.training
    @allure.title("Periodic faces come in matched pairs")
    @allure.severity(allure.severity_level.NORMAL)
    def test_periodic_pairs(self, convection):
        colloc = sample_collocation(convection, 3, SMALL)
        periodic = [b for b in colloc.boundary if b.condition.kind == BcKind.PERIODIC]
        assert periodic
        for batch in periodic:
            assert torch.all(batch.points[:, 0] == 0.0)
            assert torch.allclose(batch.partner[:, 0], torch.full((8,), 2 * math.pi))
            assert torch.equal(batch.points[:, 1], batch.partner[:, 1])

    @pytest.mark.training
    @allure.title("Subsets are evenly spaced and bounded")
    @allure.severity(allure.severity_level.MINOR)
    def test_subset(self, wave):
        colloc = sample_collocation(wave, 0, SMALL)
        sample = colloc.subset(4)
        assert sample.interior.shape[0] == 4
        assert torch.equal(sample.interior[0], colloc.interior[0])
        assert torch.equal(sample.interior[-1], colloc.interior[-1])
        assert sample.n_boundary <= 4
        with pytest.raises(ValueError):
            CollocationSizes(n_res=0)


@allure.feature("Training")
@allure.story("Loss")
class TestLoss:
    """Weighted loss, residual-based attention and trace weights."""

    @pytest.mark.smoke
    @pytest.mark.training
    @allure.title("Total loss is the weighted sum of its terms")
    @allure.severity(allure.severity_level.CRITICAL)
    def test_weighted_sum(self, wave, make_spec):
        spec = make_spec("wave")
        params = init_params(spec, 0)
        colloc = sample_collocation(wave, 0, SMALL)
        terms = loss_terms(wave, spec, params, colloc, LossWeights(res=2.0, bc=3.0, ic=5.0))
        expected = 2.0 * terms.res + 3.0 * terms.bc + 5.0 * terms.ic
        assert terms.total.item() == pytest.approx(expected.item(), rel=1e-14)
        assert min(terms.res.item(), terms.bc.item(), terms.ic.item()) > 0
        with pytest.raises(ValueError):
            LossWeights(bc=-1.0)

    @pytest.mark.training
    @allure.title("Zero attention weights silence the residual term")
    @allure.severity(allure.severity_level.NORMAL)
    def test_rba_zero_start(self, wave, make_spec):
        spec = make_spec("wave")
        colloc = sample_collocation(wave, 0, SMALL)
        terms = loss_terms(wave, spec, init_params(spec, 0), colloc, rba=True)
        assert terms.res.item() == 0.0

    @pytest.mark.training
    @allure.title("Attention update follows its recurrence and stays bounded")
    @allure.severity(allure.severity_level.CRITICAL)
    def test_rba_update(self):
        r = torch.tensor([0.5, -2.0, 1.0, 0.0])
        with allure.step("One step from zero"):
            w = rba_update(torch.zeros(4), r, gamma=0.999, eta=0.01)
            assert torch.allclose(w, torch.tensor([0.0025, 0.01, 0.005, 0.0]))
        with allure.step("Many steps stay below eta / (1 - gamma)"):
            for _ in range(20000):
                w = rba_update(w, r, gamma=0.999, eta=0.01)
            assert w.max().item() <= 10.0 + 1e-12
            assert w[1].item() == pytest.approx(10.0 * (1 - 0.999 ** 20001), rel=1e-9)
        with allure.step("Zero residuals only decay"):
            assert torch.allclose(rba_update(w, torch.zeros(4)), 0.999 * w)

    @pytest.mark.training
    @allure.title("Trace weights balance the two kernels")
    @allure.severity(allure.severity_level.NORMAL)
    def test_trace_weights(self):
        assert trace_weights(1.0, 3.0) == pytest.approx((4.0, 4.0 / 3.0))
        with pytest.raises(ZeroTraceError):
            trace_weights(0.0, 1.0)

    @pytest.mark.training
    @allure.title("W-PINN replaces the loss weights with kernel-trace weights")
    @allure.severity(allure.severity_level.NORMAL)
    def test_wpinn_closure(self, wave, make_spec):
        spec = make_spec("wave")
        params = init_params(spec, 0)
        closure = LossClosure(wave, spec, sample_collocation(wave, 0, SMALL), wpinn=True)
        lambda_b, lambda_r = wpinn_weights(wave, spec, params, closure.colloc, n_points=8)
        assert lambda_b > 1.0 and lambda_r > 1.0
        assert 1.0 / lambda_b + 1.0 / lambda_r == pytest.approx(1.0)
        closure.update_wpinn(params)
        assert closure.weights.bc == closure.weights.ic
        assert closure.weights.res > 1.0

    @pytest.mark.training
    @allure.title("Closure state survives a save/restore")
    @allure.severity(allure.severity_level.MINOR)
    def test_closure_state(self, wave, make_spec):
        spec = make_spec("wave")
        params = init_params(spec, 0)
        closure = LossClosure(wave, spec, sample_collocation(wave, 0, SMALL), rba=True)
        saved = closure.state_dict()
        closure.update_rba(params)
        assert closure.colloc.rba_weights.max().item() == pytest.approx(0.01)
        closure.load_state_dict(saved)
        assert torch.equal(closure.colloc.rba_weights, torch.zeros(32))


@allure.feature("Training")
@allure.story("Adam")
class TestAdam:
    """Full-batch Adam with stepwise decay."""

    @pytest.mark.training
    @allure.title("First step moves every coordinate by the learning rate")
    @allure.severity(allure.severity_level.NORMAL)
    def test_first_step(self, quadratic):
        closure, params = quadratic(torch.diag(torch.tensor([1.0, 10.0])))
        state = AdamState(params, lr=0.1)
        _, grad = value_and_grad(closure, params)(params.values)
        updated = adam_step(state, grad)
        assert torch.allclose(updated.values, torch.tensor([0.9, 0.9]), atol=1e-6)
        assert torch.equal(params.values, torch.ones(2))

    @pytest.mark.training
    @allure.title("Learning rate decays stepwise")
    @allure.severity(allure.severity_level.MINOR)
    def test_decay(self, quadratic):
        _, params = quadratic(torch.eye(2))
        state = AdamState(params, lr=1.0, decay=0.5, every=2)
        for _ in range(2):
            adam_step(state, torch.ones(2))
        assert state.lr == pytest.approx(0.5)

    @pytest.mark.training
    @allure.title("Adam minimizes a quadratic")
    @allure.severity(allure.severity_level.NORMAL)
    def test_quadratic(self, quadratic):
        closure, params = quadratic(torch.diag(torch.tensor([1.0, 10.0])))
        fun = value_and_grad(closure, params)
        state = AdamState(params, lr=1e-2)
        for _ in range(500):
            _, grad = fun(state.params.values)
            adam_step(state, grad)
        assert closure(state.params).item() < 1e-2


@allure.feature("Training")
@allure.story("L-BFGS")
class TestLbfgs:
    """Two-loop recursion, Wolfe line search and stall reasons."""

    @pytest.mark.training
    @allure.title("Two-loop direction")
    @allure.severity(allure.severity_level.NORMAL)
    def test_two_loop(self):
        g = torch.tensor([3.0, 4.0])
        assert torch.allclose(two_loop_direction(g, []), -g / 7.0)
        s = torch.tensor([1.0, -2.0])
        pairs = [(s, 2 * s, 1.0 / (2 * torch.dot(s, s).item()))]
        assert torch.allclose(two_loop_direction(g, pairs), -g / 2.0)

    @pytest.mark.smoke
    @pytest.mark.training
    @allure.title("Rosenbrock is solved")
    @allure.severity(allure.severity_level.CRITICAL)
    def test_rosenbrock(self):
        params = ParamVector(torch.tensor([-1.2, 1.0]), SegmentLayout.from_shapes([("p", (2,))]))
        state = LbfgsState(tol=1e-12)
        result = run_lbfgs(state, value_and_grad(rosenbrock, params), params.values, 200)
        logger.info(f"Rosenbrock: f={result.loss:.3e} after {state.iterations} iterations ({result.stall})")
        assert result.loss < 1e-8
        assert torch.allclose(result.values, torch.ones(2), atol=1e-3)

    @pytest.mark.training
    @allure.title("Well-conditioned quadratic converges quickly")
    @allure.severity(allure.severity_level.NORMAL)
    def test_quadratic(self, quadratic):
        gen = SeedHelper.generator(0)
        q, _ = torch.linalg.qr(torch.randn(50, 50, generator=gen, dtype=torch.float64))
        A = q @ torch.diag(torch.linspace(1.0, 4.0, 50)) @ q.T
        closure, params = quadratic(A)
        state = LbfgsState(memory=50, tol=1e-10)
        result = run_lbfgs(state, value_and_grad(closure, params), params.values, 100)
        logger.info(f"Quadratic: {state.iterations} iterations, stall {result.stall}")
        assert result.stall == lbfgs_mod.ZERO_GRADIENT
        assert state.iterations <= 51

    @pytest.mark.training
    @allure.title("Memory keeps the newest pairs only")
    @allure.severity(allure.severity_level.MINOR)
    def test_memory(self, quadratic):
        closure, params = quadratic(torch.diag(torch.linspace(1.0, 100.0, 10)))
        state = LbfgsState(memory=3, tol=1e-14)
        run_lbfgs(state, value_and_grad(closure, params), params.values, 8)
        assert len(state.pairs) <= 3

    @pytest.mark.training
    @allure.title("Stall reasons")
    @allure.severity(allure.severity_level.NORMAL)
    def test_stalls(self, quadratic):
        with allure.step("Zero gradient at the minimum"):
            closure, params = quadratic(torch.eye(2), start=torch.zeros(2))
            result = lbfgs_step(LbfgsState(), value_and_grad(closure, params), params.values)
            assert (result.stall, result.step_size) == (lbfgs_mod.ZERO_GRADIENT, 0.0)

        with allure.step("Non-finite trial points"):
            closure, params = quadratic(torch.eye(2))
            fun = value_and_grad(closure, params)

            def guarded(values):
                if not torch.equal(values, torch.ones(2)):
                    raise NonFiniteLossError("trial point")
                return fun(values)

            result = lbfgs_step(LbfgsState(), guarded, params.values)
            assert result.stall == lbfgs_mod.NON_FINITE
            assert torch.equal(result.values, torch.ones(2))


@allure.feature("Training")
@allure.story("Schedules")
class TestSchedules:
    """Phase-structured runs and their trajectories."""

    @pytest.mark.training
    @allure.title("Schedules are validated")
    @allure.severity(allure.severity_level.NORMAL)
    def test_validation(self):
        with pytest.raises(ConfigError):
            Phase("sgd", "sgd", 10)
        with pytest.raises(ConfigError):
            ScheduleSpec(ScheduleKind.S1, (Phase("a", "adam", 10), Phase("b", "lbfgs", 5)))
        with pytest.raises(ValueError):
            ScheduleKind("S9")

    @pytest.mark.training
    @allure.title("Presets define every schedule")
    @allure.severity(allure.severity_level.NORMAL)
    def test_from_preset(self, tiny_preset):
        s2 = ScheduleSpec.from_preset("S2", "desk")
        assert [p.name for p in s2.phases] == ["adam1", "lbfgs1", "adam2", "lbfgs2"]
        assert s2.lr_grid == (1e-2, 1e-3)
        assert s2.phases[2].lr_scale == 0.5
        assert ScheduleSpec.from_preset("S4", "desk").total == 10
        for kind in ScheduleKind:
            assert ScheduleSpec.from_preset(kind, "full").total > 0

    @pytest.mark.training
    @allure.title("Plateau detector fires after its patience")
    @allure.severity(allure.severity_level.MINOR)
    def test_plateau(self):
        detector = PlateauDetector(patience=3)
        fired = [detector.update(loss) for loss in [1.0, 0.5, 0.5, 0.5, 0.5]]
        assert fired == [False, False, False, False, True]

    @pytest.mark.smoke
    @pytest.mark.training
    @allure.title("Adam then L-BFGS run records a trajectory")
    @allure.severity(allure.severity_level.CRITICAL)
    def test_run_schedule(self, wave, make_spec):
        spec = make_spec("wave")
        closure = LossClosure(wave, spec, sample_collocation(wave, 0, SMALL))
        schedule = ScheduleSpec(ScheduleKind.S1, (Phase("adam", "adam", 10), Phase("lbfgs", "lbfgs", 20)))
        calls = []

        def evaluator(params):
            calls.append(params)
            return 0.5

        with allure.step("Run 10 Adam and up to 10 L-BFGS iterations"):
            report = run_schedule(schedule, closure, init_params(spec, 0), evaluator,
                                  checkpoints=[3], eval_every=5)
        with allure.step("Verify trajectory"):
            frame = report.to_frame()
            assert list(frame.columns) == TRAJECTORY_COLUMNS
            assert list(frame["iter"][:10]) == list(range(10))
            assert set(frame["phase"][:10]) == {"adam"}
            assert frame["iter"].is_monotonic_increasing
            assert frame["L2RE"][0] == 0.5 and math.isnan(frame["L2RE"][1])
            assert report.phase_boundaries[0] == ("adam", 0)
            assert report.phase_boundaries[1] == ("lbfgs", 10)
            assert report.final_loss < frame["loss"][0]
            assert 3 in report.snapshots
            assert not report.diverged
            assert report.iterations <= 20

    @pytest.mark.training
    @allure.title("Attention weights grow during training and stay bounded")
    @allure.severity(allure.severity_level.NORMAL)
    def test_rba_run(self, wave, make_spec):
        spec = make_spec("wave")
        closure = LossClosure(wave, spec, sample_collocation(wave, 0, SMALL), rba=True)
        schedule = ScheduleSpec(ScheduleKind.S4, (Phase("adam", "adam", 5),))
        run_schedule(schedule, closure, init_params(spec, 0))
        weights = closure.colloc.rba_weights
        assert weights.max().item() > 0
        assert weights.max().item() <= 10.0

    @pytest.mark.training
    @allure.title("Snapshots keep the attention weights of their iteration")
    @allure.severity(allure.severity_level.NORMAL)
    def test_snapshot_closure_state(self, wave, make_spec):
        spec = make_spec("wave")
        closure = LossClosure(wave, spec, sample_collocation(wave, 0, SMALL), rba=True)
        schedule = ScheduleSpec(ScheduleKind.S4, (Phase("adam", "adam", 6),))
        report = run_schedule(schedule, closure, init_params(spec, 0), checkpoints=[0, 6])
        assert set(report.closure_states) == set(report.snapshots) == {0, 6}
        assert torch.count_nonzero(report.closure_states[0]["rba_weights"]) == 0
        assert torch.equal(report.closure_states[6]["rba_weights"], closure.colloc.rba_weights)
        assert closure.colloc.rba_weights.max().item() > 0

    @pytest.mark.training
    @allure.title("Non-finite loss is recorded as divergence")
    @allure.severity(allure.severity_level.CRITICAL)
    def test_divergence(self, quadratic):
        _, params = quadratic(torch.eye(2))
        schedule = ScheduleSpec(ScheduleKind.S1, (Phase("adam", "adam", 10), Phase("lbfgs", "lbfgs", 20)))
        report = run_schedule(schedule, CountingClosure(fail_after=4), params)
        assert report.diverged
        assert report.divergence["phase"] == "adam"
        assert report.divergence["iter"] == 4
        assert len(report.rows) == 4
        assert [name for name, _ in report.phase_boundaries] == ["adam"]

    @pytest.mark.training
    @allure.title("Learning-rate search keeps the best grid value")
    @allure.severity(allure.severity_level.NORMAL)
    def test_lr_search(self, wave, make_spec, tiny_preset):
        spec = make_spec("wave")
        closure = LossClosure(wave, spec, sample_collocation(wave, 0, SMALL))
        schedule = ScheduleSpec.from_preset("S2", "desk")
        report = run_schedule(schedule, closure, init_params(spec, 0))
        assert report.chosen_lr in (1e-2, 1e-3)
        names = [name for name, _ in report.phase_boundaries]
        assert names[0] == "adam1"
        assert names.count("adam1") == 1
        assert report.iterations <= 30
        assert report.to_frame()["iter"].is_monotonic_increasing
