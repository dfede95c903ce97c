"""
Benchmark runner tests.
Experiment configs, the L2RE metric, matrix runs, reports and the command line.
The desk-scale acceptance runs are marked slow.
"""

import json
import math
import statistics
from types import SimpleNamespace

import pandas as pd
import pytest
import allure
import torch

from bench import cli
from bench.experiment import ExperimentConfig, evaluate_l2re, expand_document, l2re
from bench.reports import emit_reports, grid_sensitivity, l2re_curves, param_count_table
from bench.runner import (
    ResultRow,
    RunOutcome,
    improvement_pct,
    results_frame,
    run_matrix,
    run_single,
    summarize,
)
from config.config import Config
from models.networks import Arch, FeatureMapKind, init_params, param_count
from pdes.benchmarks import get_problem
from spectra import slq as slq_mod
from tests.conftest import pytest_html_report_title
from training import losses as losses_mod
from training.schedules import TRAJECTORY_COLUMNS
from utils.exceptions import ConfigError, ZeroNormError
from utils.logger import get_logger

logger = get_logger(__name__)


def config(problem="wave", method="SAFENET", schedule="S1", **kwargs):
    return ExperimentConfig(problem=problem, method=method, schedule=schedule, preset="desk", **kwargs)


def medians(outcomes):
    return {key: entry["median_l2re"] for key, entry in summarize(outcomes).items() if key != "improvements"}


def diverged_outcome():
    row = ResultRow(config_hash="0" * 16, run_id="wave_PINN_S1_00000000_s0", problem="wave", method="PINN",
                    schedule="S1", seed=0, l2re=None, divergence=True, iterations=4, param_count=7851,
                    chosen_lr=1e-3, phase_losses={"adam": 1.0})
    return RunOutcome(row=row, trajectory=pd.DataFrame(columns=TRAJECTORY_COLUMNS))


@allure.feature("Bench")
@allure.story("Metrics")
class TestMetrics:
    """Relative L2 error and relative improvement."""

    @pytest.mark.smoke
    @pytest.mark.bench
    @allure.title("L2RE reference values")
    @allure.severity(allure.severity_level.CRITICAL)
    def test_l2re(self):
        truth = torch.tensor([3.0, 4.0])
        assert l2re(truth.clone(), truth) == 0.0
        assert l2re(torch.zeros(2), truth) == pytest.approx(1.0)
        assert l2re(torch.tensor([1.0, 0.0]), torch.tensor([0.0, 1.0])) == pytest.approx(math.sqrt(2.0))

    @pytest.mark.bench
    @allure.title("L2RE rejects a zero reference and mismatched lengths")
    @allure.severity(allure.severity_level.NORMAL)
    def test_l2re_errors(self):
        with pytest.raises(ZeroNormError):
            l2re(torch.ones(3), torch.zeros(3))
        with pytest.raises(ValueError):
            l2re(torch.ones(3), torch.ones(4))

    @pytest.mark.bench
    @allure.title("Improvement percentage")
    @allure.severity(allure.severity_level.NORMAL)
    def test_improvement(self):
        assert improvement_pct(1.21e-4, 8.23e-5) == pytest.approx(31.98, abs=0.01)
        assert improvement_pct(1.0, 2.0) == pytest.approx(-100.0)
        assert improvement_pct(0.0, 1.0) is None
        assert improvement_pct(None, 1.0) is None


@allure.feature("Bench")
@allure.story("Experiment Configs")
class TestExperimentConfig:
    """Config validation, hashing and the method-to-network mapping."""

    @pytest.mark.smoke
    @pytest.mark.bench
    @allure.title("Seeds default to the preset and must be unique")
    @allure.severity(allure.severity_level.CRITICAL)
    def test_seeds(self, tiny_preset):
        assert config().seeds == (0, 1)
        assert config(seeds=[3]).seeds == (3,)
        with pytest.raises(ConfigError):
            config(seeds=[1, 1])

    @pytest.mark.bench
    @allure.title("Unknown names are config errors")
    @allure.severity(allure.severity_level.NORMAL)
    def test_unknown_values(self, tiny_preset):
        for kwargs in ({"problem": "kdv"}, {"method": "ResNet"}, {"schedule": "S9"}):
            with pytest.raises(ConfigError):
                config(**kwargs)
        with pytest.raises(ConfigError):
            ExperimentConfig(problem="wave", method="PINN", preset="laptop")

    @pytest.mark.bench
    @allure.title("Hash ignores seeds; run ids are stable")
    @allure.severity(allure.severity_level.NORMAL)
    def test_hash_and_run_id(self, tiny_preset):
        cfg = config(seeds=[0])
        assert cfg.config_hash == config(seeds=[5, 6]).config_hash
        assert cfg.config_hash != config(features=8).config_hash
        assert len(cfg.config_hash) == 16
        assert cfg.key == "wave/SAFENET/S1"
        assert cfg.run_id(2) == f"wave_SAFENET_S1_{cfg.config_hash[:8]}_s2"

    @pytest.mark.bench
    @allure.title("Methods map to their networks")
    @allure.severity(allure.severity_level.CRITICAL)
    def test_network_spec(self, tiny_preset):
        with allure.step("SAFE-NET: Fourier features with DKF and normalization"):
            spec = config().network_spec(0)
            assert (spec.arch, spec.feature_map, spec.n_features) == (Arch.SAFENET, FeatureMapKind.FOURIER, 16)
            assert spec.dkf and spec.normalize
        with allure.step("PINN: plain 4x50 MLP"):
            spec = config(method="PINN").network_spec(0)
            assert (spec.arch, spec.feature_map) == (Arch.MLP_4X50, FeatureMapKind.NONE)
            assert param_count(spec) == 7851
        with allure.step("RBA: 6x50 with the periodic embedding on periodic problems"):
            assert config("convection", "RBA").network_spec(0).feature_map == FeatureMapKind.PERIODIC
            assert config("wave", "RBA").network_spec(0).arch == Arch.MLP_6X50
            assert config("wave", "RBA").uses_rba and config("wave", "WPINN").uses_wpinn
        with allure.step("Frozen maps are drawn from the seed"):
            assert config(method="RFF").network_spec(4).map_seed == 4
            assert config(method="RBFP").network_spec(0).feature_map == FeatureMapKind.RBFP

    @pytest.mark.bench
    @allure.title("Matrix documents expand to the cross product")
    @allure.severity(allure.severity_level.NORMAL)
    def test_expand_document(self, tiny_preset):
        document = {
            "defaults": {"seeds": [0]},
            "experiments": [{"problem": "heat2d", "method": "RFF"}],
            "matrix": {"problems": ["wave", "diffusion"], "methods": ["PINN", "SAFENET"], "features": [8, 16]},
        }
        configs = expand_document(document)
        assert len(configs) == 1 + 2 * (1 + 2)
        assert configs[0].key == "heat2d/RFF/S1"
        assert configs[1].key == "wave/PINN/S1" and configs[1].features is None
        assert [cfg.features for cfg in configs[2:4]] == [8, 16]
        assert configs[4].key == "diffusion/PINN/S1"
        assert all(cfg.seeds == (0,) for cfg in configs)
        assert all(cfg.seeds == (4, 5) for cfg in expand_document(document, seeds=[4, 5]))

    @pytest.mark.bench
    @allure.title("Schema violations are config errors")
    @allure.severity(allure.severity_level.NORMAL)
    def test_schema(self, tiny_preset):
        bad = [
            {},
            {"experiments": [{"problem": "wave"}]},
            {"experiments": [{"problem": "wave", "method": "PINN", "width": 7}]},
            {"matrix": {"problems": ["wave"], "methods": ["PINN"], "schedules": ["S7"]}},
        ]
        for document in bad:
            with pytest.raises(ConfigError):
                expand_document(document)


@allure.feature("Bench")
@allure.story("Runner")
class TestRunner:
    """Single runs, matrix runs and aggregation on the tiny preset."""

    @pytest.mark.smoke
    @pytest.mark.bench
    @allure.title("A single run fills a result row and a trajectory")
    @allure.severity(allure.severity_level.CRITICAL)
    def test_run_single(self, tiny_preset):
        cfg = config(seeds=[0])
        outcome = run_single(cfg, 0)
        row = outcome.row
        assert row.run_id == cfg.run_id(0)
        assert not row.divergence
        assert 0 < row.l2re < math.inf
        assert 0 < row.iterations <= 30
        assert row.param_count == param_count(cfg.network_spec(0))
        assert set(row.phase_losses) <= {"adam", "lbfgs"}
        assert list(outcome.trajectory.columns) == TRAJECTORY_COLUMNS
        spec = cfg.network_spec(0)
        assert outcome.trajectory["L2RE"][0] == pytest.approx(
            evaluate_l2re(get_problem("wave"), spec, init_params(spec, 0)))
        assert "loss_adam" in row.to_record()

    @pytest.mark.bench
    @allure.title("Empty matrix gives an empty table")
    @allure.severity(allure.severity_level.NORMAL)
    def test_empty(self):
        assert run_matrix([], jobs=1) == []
        assert results_frame([]).empty
        assert summarize([]) == {"improvements": {}}
        assert l2re_curves([]).empty

    @pytest.mark.bench
    @allure.title("Two configs over two seeds give four ordered rows")
    @allure.severity(allure.severity_level.CRITICAL)
    def test_matrix(self, tiny_preset):
        configs = [config("wave", "SAFENET"), config("diffusion", "PINN")]
        outcomes = run_matrix(configs, jobs=1)
        assert [(o.row.problem, o.row.seed) for o in outcomes] == [
            ("wave", 0), ("wave", 1), ("diffusion", 0), ("diffusion", 1)]
        table = results_frame(outcomes)
        assert list(table["problem"]) == ["diffusion", "diffusion", "wave", "wave"]
        summary = summarize(outcomes)
        assert set(summary) == {"wave/SAFENET/S1", "diffusion/PINN/S1", "improvements"}
        entry = summary["wave/SAFENET/S1"]
        assert (entry["n_completed"], entry["n_diverged"], entry["seeds"]) == (2, 0, [0, 1])
        assert entry["median_l2re"] == pytest.approx(statistics.median(
            o.row.l2re for o in outcomes if o.row.problem == "wave"))
        assert len(param_count_table(outcomes)) == 2

    @pytest.mark.bench
    @allure.title("Schedules of one method are compared pairwise")
    @allure.severity(allure.severity_level.NORMAL)
    def test_improvements(self, tiny_preset):
        outcomes = run_matrix([config(schedule="S1", seeds=[0]), config(schedule="S2", seeds=[0])], jobs=1)
        summary = summarize(outcomes)
        before = summary["wave/SAFENET/S1"]["median_l2re"]
        after = summary["wave/SAFENET/S2"]["median_l2re"]
        assert summary["improvements"]["wave/SAFENET"]["S1->S2"] == pytest.approx(improvement_pct(before, after))
        s2 = [o for o in outcomes if o.row.schedule == "S2"][0]
        assert s2.row.chosen_lr in (1e-2, 1e-3)

    @pytest.mark.bench
    @allure.title("Feature-count ablation cells stay apart")
    @allure.severity(allure.severity_level.CRITICAL)
    def test_feature_cells(self):
        def outcome(features, l2re_value, count):
            row = ResultRow(config_hash=f"{features:016d}", run_id=f"wave_SAFENET_S4_f{features}_s0", problem="wave",
                            method="SAFENET", schedule="S4", seed=0, l2re=l2re_value, divergence=False,
                            iterations=10, param_count=count, chosen_lr=1e-3, features=features)
            return RunOutcome(row=row, trajectory=pd.DataFrame(columns=TRAJECTORY_COLUMNS))

        outcomes = [outcome(32, 1e-3, 400), outcome(8, 1e-1, 100)]
        with allure.step("Summary has one cell per feature count"):
            summary = summarize(outcomes)
            assert summary["wave/SAFENET/S4/f8"]["median_l2re"] == pytest.approx(1e-1)
            assert summary["wave/SAFENET/S4/f32"]["median_l2re"] == pytest.approx(1e-3)
            assert summary["wave/SAFENET/S4/f8"]["param_count"] == 100
            assert "wave/SAFENET/S4" not in summary
        with allure.step("Parameter counts do not depend on row order"):
            for ordering in (outcomes, outcomes[::-1]):
                table = param_count_table(ordering)
                assert list(table["features"]) == [8, 32]
                assert list(table["param_count"]) == [100, 400]

    @pytest.mark.bench
    @allure.title("Diverged runs are excluded from the median")
    @allure.severity(allure.severity_level.NORMAL)
    def test_diverged_summary(self):
        summary = summarize([diverged_outcome()])
        entry = summary["wave/PINN/S1"]
        assert (entry["median_l2re"], entry["n_completed"], entry["n_diverged"]) == (None, 0, 1)

    @pytest.mark.bench
    @allure.title("Spectral runs report SLQ at the checkpoints")
    @allure.severity(allure.severity_level.NORMAL)
    def test_spectral(self, tiny_preset, monkeypatch):
        calls = []
        density_fn = slq_mod.slq_density

        def counting(closure, params, cfg=None):
            calls.append(cfg.seed)
            return density_fn(closure, params, cfg)

        monkeypatch.setattr(slq_mod, "slq_density", counting)
        cfg = config(schedule="S4", seeds=[0])
        outcome = run_single(cfg, 0, spectral=True)
        assert list(outcome.eig["iter"]) == [5, 10]
        assert list(outcome.eig.columns[:3]) == ["run_id", "iter", "lambda_max"]
        assert set(outcome.densities) == {5, 10}
        assert len(calls) == 2
        for it, density in outcome.densities.items():
            assert outcome.eig.set_index("iter").loc[it, "lambda_max"] == density.lambda_max
            for _, weights in density.probes:
                assert weights.sum() == pytest.approx(1.0, abs=1e-8)

    @pytest.mark.bench
    @allure.title("Reruns reproduce every table byte for byte")
    @allure.severity(allure.severity_level.CRITICAL)
    def test_determinism(self, tiny_preset, tmp_path):
        configs = [config(seeds=[0]), config(method="RBA", seeds=[0])]
        first = emit_reports(run_matrix(configs, jobs=1), tmp_path / "first")
        second = emit_reports(run_matrix(configs, jobs=1), tmp_path / "second")
        for name in ("results", "summary", "l2re_curves"):
            assert first[name].read_bytes() == second[name].read_bytes()
        for path in (tmp_path / "first" / "trajectories").iterdir():
            assert path.read_bytes() == (tmp_path / "second" / "trajectories" / path.name).read_bytes()

    @pytest.mark.bench
    @allure.title("Reports cover every artifact")
    @allure.severity(allure.severity_level.NORMAL)
    def test_emit_reports(self, tiny_preset, out_dir):
        cfg = config(schedule="S4", seeds=[0])
        outcome = run_single(cfg, 0, spectral=True)
        paths = emit_reports([outcome], out_dir)
        assert set(paths) == {"results", "timings", "summary", "param_counts", "l2re_curves", "eig_trajectory"}
        assert "runtime" not in pd.read_csv(paths["results"]).columns
        assert (out_dir / "trajectories" / f"{cfg.run_id(0)}.csv").exists()
        assert (out_dir / "spectra" / f"{cfg.run_id(0)}_it5_nodes.csv").exists()
        assert (out_dir / "spectra" / f"{cfg.run_id(0)}_it10_density.csv").exists()
        summary = json.loads(paths["summary"].read_text())
        assert "wave/SAFENET/S4" in summary

    @pytest.mark.bench
    @allure.title("Refined evaluation grid")
    @allure.severity(allure.severity_level.MINOR)
    def test_grid_sensitivity(self, tiny_preset, wave):
        cfg = config(seeds=[0])
        spec = cfg.network_spec(0)
        result = grid_sensitivity(wave, spec, init_params(spec, 0))
        assert set(result) == {"l2re_default", "l2re_refine2", "relative_change"}
        assert result["relative_change"] < 0.5


@allure.feature("Bench")
@allure.story("Command Line")
class TestCli:
    """Subcommands and exit codes."""

    @pytest.mark.smoke
    @pytest.mark.bench
    @allure.title("Train writes results and exits 0")
    @allure.severity(allure.severity_level.CRITICAL)
    def test_train(self, tiny_preset, out_dir):
        code = cli.main(["train", "--problem", "wave", "--method", "SAFENET", "--seeds", "0",
                         "--jobs", "1", "--out", str(out_dir), "--save-params"])
        assert code == cli.EXIT_OK
        table = pd.read_csv(out_dir / "results.csv")
        assert list(table["seed"]) == [0]
        assert "wave/SAFENET/S1" in json.loads((out_dir / "summary.json").read_text())
        checkpoints = list((out_dir / "checkpoints").glob("*.ckpt"))
        assert len(checkpoints) == 1

        with allure.step("Evaluate the saved checkpoint"):
            assert cli.main(["evaluate", "--checkpoint", str(checkpoints[0]), "--out", str(out_dir)]) == cli.EXIT_OK
            result = json.loads((out_dir / f"{checkpoints[0].stem}_evaluation.json").read_text())
            assert result["l2re_default"] == pytest.approx(table["l2re"][0])

        with allure.step("Gram check with the network reports"):
            assert cli.main(["gram-check", "--problem", "wave", "--features", "16", "--grid", "16",
                             "--checkpoint", str(checkpoints[0]), "--kernel-grid", "4",
                             "--out", str(out_dir)]) == cli.EXIT_OK
            gram = json.loads((out_dir / "gram_wave.json").read_text())
            assert set(gram) == {"problem", "fourier_bank", "network_features", "tangent_kernel"}

    @pytest.mark.bench
    @allure.title("Gram check of a harmonic bank reports condition 1")
    @allure.severity(allure.severity_level.NORMAL)
    def test_gram_check(self, out_dir):
        assert cli.main(["gram-check", "--problem", "diffusion", "--features", "32", "--grid", "32",
                         "--out", str(out_dir)]) == cli.EXIT_OK
        report = json.loads((out_dir / "gram_diffusion.json").read_text())["fourier_bank"]
        assert report["condition"] <= 1 + 1e-6

    @pytest.mark.bench
    @allure.title("Sweep crosses configs with the feature ablation")
    @allure.severity(allure.severity_level.NORMAL)
    def test_sweep(self, tiny_preset, out_dir):
        code = cli.main(["sweep", "--problem", "wave", "--method", "SAFENET", "--schedule", "S4",
                         "--seeds", "0", "--jobs", "1", "--out", str(out_dir)])
        assert code == cli.EXIT_OK
        table = pd.read_csv(out_dir / "results.csv")
        assert len(table) == 2
        assert table["config_hash"].nunique() == 2
        with allure.step("Each feature count is its own summary cell"):
            assert sorted(table["features"]) == [8, 16]
            summary = json.loads((out_dir / "summary.json").read_text())
            assert {"wave/SAFENET/S4/f8", "wave/SAFENET/S4/f16"} <= set(summary)
            assert all(summary[f"wave/SAFENET/S4/f{n}"]["n_completed"] == 1 for n in (8, 16))

    @pytest.mark.bench
    @allure.title("Sweep leaves methods without a feature map out")
    @allure.severity(allure.severity_level.NORMAL)
    def test_sweep_plain_method(self, tiny_preset, out_dir):
        code = cli.main(["sweep", "--problem", "wave", "--method", "PINN", "--schedule", "S4",
                         "--seeds", "0", "--jobs", "1", "--out", str(out_dir)])
        assert code == cli.EXIT_OK
        assert pd.read_csv(out_dir / "results.csv").empty

    @pytest.mark.bench
    @pytest.mark.parametrize("argv", [
        ["train"],
        ["train", "--problem", "kdv", "--method", "PINN"],
        ["train", "--problem", "wave", "--method", "PINN", "--seeds", "a,b"],
        ["train", "--config", "missing.json"],
        ["gram-check"],
        ["gram-check", "--problem", "kdv"],
    ])
    @allure.title("Config errors exit 2")
    @allure.severity(allure.severity_level.CRITICAL)
    def test_config_errors(self, tiny_preset, out_dir, argv):
        assert cli.main(argv + ["--out", str(out_dir)]) == cli.EXIT_CONFIG

    @pytest.mark.bench
    @allure.title("Invalid experiment document exits 2")
    @allure.severity(allure.severity_level.NORMAL)
    def test_bad_document(self, tiny_preset, tmp_path, out_dir):
        path = tmp_path / "experiments.json"
        path.write_text(json.dumps({"experiments": [{"problem": "wave", "method": "Transformer"}]}))
        assert cli.main(["train", "--config", str(path), "--out", str(out_dir)]) == cli.EXIT_CONFIG

    @pytest.mark.bench
    @allure.title("A diverged run exits 3 and still writes reports")
    @allure.severity(allure.severity_level.CRITICAL)
    def test_diverged_exit(self, tiny_preset, out_dir, monkeypatch):
        monkeypatch.setattr(cli, "run_matrix", lambda *args, **kwargs: [diverged_outcome()])
        code = cli.main(["train", "--problem", "wave", "--method", "PINN", "--out", str(out_dir)])
        assert code == cli.EXIT_DIVERGED
        table = pd.read_csv(out_dir / "results.csv")
        assert bool(table["divergence"][0]) and math.isnan(table["l2re"][0])

    @pytest.mark.bench
    @allure.title("Unknown subcommand is rejected by the parser")
    @allure.severity(allure.severity_level.MINOR)
    def test_parser(self):
        with pytest.raises(SystemExit):
            cli.build_parser().parse_args(["fit"])

    @pytest.mark.bench
    @allure.title("HTML test report is titled with the preset")
    @allure.severity(allure.severity_level.MINOR)
    def test_html_report_title(self):
        report = SimpleNamespace(title="")
        pytest_html_report_title(report)
        assert report.title == f"SAFE-NET Benchmark Suite ({Config.PRESET} preset)"


@allure.feature("Bench")
@allure.story("Desk-scale Acceptance")
class TestDeskAcceptance:
    """Full desk-preset runs. Minutes per problem; enable with --runslow."""

    @pytest.mark.slow
    @pytest.mark.regression
    @pytest.mark.parametrize("problem,bound", [
        ("wave", 5e-2), ("convection", 5e-2), ("reaction", 5e-2), ("diffusion", 1e-2)])
    @allure.title("SAFE-NET solves the closed-form problems at desk scale")
    @allure.severity(allure.severity_level.BLOCKER)
    def test_desk_solving(self, problem, bound):
        outcomes = run_matrix([config(problem, "SAFENET")], jobs=1)
        median = medians(outcomes)[f"{problem}/SAFENET/S1"]
        logger.info(f"{problem}: SAFE-NET median L2RE {median:.4e} (bound {bound:g})")
        assert median <= bound

    @pytest.mark.slow
    @pytest.mark.regression
    @pytest.mark.parametrize("problem,bound", [("burgers", 0.5), ("allen_cahn", 1.0)])
    @allure.title("SAFE-NET trains and is scored against the numerical oracles")
    @allure.severity(allure.severity_level.BLOCKER)
    def test_desk_oracle_problems(self, problem, bound, tmp_path, monkeypatch):
        monkeypatch.setattr(Config, "ORACLE_DIR", tmp_path)
        monkeypatch.setattr(get_problem(problem), "_reference", None)
        with allure.step(f"Train SAFE-NET on {problem}"):
            outcome = run_single(config(problem, "SAFENET", seeds=[0]), 0)
        with allure.step("Verify the oracle was built and the error is finite"):
            assert (tmp_path / f"{problem}_oracle.csv").exists()
            assert not outcome.row.divergence
            assert math.isfinite(outcome.row.l2re)
            logger.info(f"{problem}: SAFE-NET L2RE {outcome.row.l2re:.4e} (bound {bound:g})")
            assert outcome.row.l2re <= bound

    @pytest.mark.slow
    @pytest.mark.regression
    @pytest.mark.parametrize("problem", ["wave", "convection"])
    @allure.title("SAFE-NET is at least as accurate as a plain PINN")
    @allure.severity(allure.severity_level.CRITICAL)
    def test_ordering(self, problem):
        outcomes = run_matrix([config(problem, "SAFENET"), config(problem, "PINN")], jobs=1)
        result = medians(outcomes)
        assert result[f"{problem}/SAFENET/S1"] <= result[f"{problem}/PINN/S1"]

    @pytest.mark.slow
    @pytest.mark.regression
    @allure.title("Alternating schedule helps SAFE-NET on Diffusion")
    @allure.severity(allure.severity_level.CRITICAL)
    def test_schedule_effect(self):
        outcomes = run_matrix([config("diffusion", schedule="S1"), config("diffusion", schedule="S2")], jobs=1)
        summary = summarize(outcomes)
        logger.info(f"Diffusion S1->S2 improvement: {summary['improvements']['diffusion/SAFENET']['S1->S2']}")
        assert summary["diffusion/SAFENET/S2"]["median_l2re"] <= summary["diffusion/SAFENET/S1"]["median_l2re"]

    @pytest.mark.slow
    @pytest.mark.regression
    @allure.title("Attention weights stay in (0, 10] through a desk run")
    @allure.severity(allure.severity_level.CRITICAL)
    def test_rba_bound(self, monkeypatch):
        bounds = []
        update = losses_mod.rba_update

        def recording(*args, **kwargs):
            weights = update(*args, **kwargs)
            bounds.append((weights.min().item(), weights.max().item()))
            return weights

        monkeypatch.setattr(losses_mod, "rba_update", recording)
        outcome = run_single(config("wave", "RBA", seeds=[0]), 0)
        assert not outcome.row.divergence
        assert len(bounds) == len(outcome.trajectory)
        assert all(0.0 < low and high <= 10.0 for low, high in bounds)

    @pytest.mark.slow
    @pytest.mark.regression
    @allure.title("SAFE-NET Hessian is two orders better conditioned than a PINN's")
    @allure.severity(allure.severity_level.CRITICAL)
    def test_conditioning_contrast(self):
        lambdas = {}
        for method in ("SAFENET", "PINN"):
            outcome = run_single(config("wave", method, schedule="S4", seeds=[0]), 0, spectral=True)
            eig = outcome.eig.set_index("iter")
            lambdas[method] = eig.loc[3000, "lambda_max"]
        ratio = lambdas["SAFENET"] / lambdas["PINN"]
        logger.info(f"lambda_max SAFE-NET {lambdas['SAFENET']:.4e}, PINN {lambdas['PINN']:.4e}, ratio {ratio:.3e}")
        assert ratio < 1e-2
