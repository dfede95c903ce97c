"""
Command-line interface.

    python -m bench train --config experiments.json --preset desk --out reports/run1
    python -m bench sweep --config ablation.json --jobs 4
    python -m bench spectral --problem wave --method SAFENET --schedule S4
    python -m bench evaluate --checkpoint reports/run1/checkpoints/<run_id>.ckpt
    python -m bench gram-check --problem wave --features 64
    python -m bench oracle-build --problem burgers

Exit codes: 0 success, 1 runtime failure, 2 config error, 3 a run diverged
(reports are still written).
"""

import argparse
import dataclasses
import sys
from pathlib import Path
from typing import List, Optional

from bench.experiment import ExperimentConfig, expand_document
from bench.reports import emit_reports, grid_sensitivity
from bench.runner import any_diverged, run_matrix
from config.config import Config
from features.fourier import CoeffInit, FeatureBank, FreqInit
from models.checkpoint import load_checkpoint
from pdes.base_problem import ProblemId
from pdes.benchmarks import get_problem
from pdes.oracles import build_oracle, save_oracle
from spectra.gram import gram_conditioning, network_feature_gram, tangent_kernel_report
from utils.decorators import log_action
from utils.exceptions import ConfigError, SafeNetError
from utils.helpers import DataHelper, FileHelper, GridHelper, SeedHelper
from utils.logger import get_logger

logger = get_logger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG = 2
EXIT_DIVERGED = 3


def parse_seeds(text: Optional[str]) -> Optional[List[int]]:
    """Parse "a,b,c" into a list of ints."""
    if not text:
        return None
    try:
        seeds = [int(s) for s in text.split(",") if s.strip()]
    except ValueError as e:
        raise ConfigError(f"--seeds expects comma-separated integers, got '{text}'") from e
    if not seeds:
        raise ConfigError("--seeds is empty")
    return seeds


def load_configs(args) -> List[ExperimentConfig]:
    """Configs from --config, or a single experiment from --problem/--method/--schedule."""
    if args.config:
        document = DataHelper.load_json(Path(args.config))
    elif args.problem and args.method:
        document = {"experiments": [{"problem": args.problem, "method": args.method,
                                     "schedule": args.schedule}]}
    else:
        raise ConfigError("Either --config or both --problem and --method are required")
    return expand_document(document, preset=args.preset, seeds=parse_seeds(args.seeds))


def _finish(outcomes, out_dir: Path) -> int:
    emit_reports(outcomes, out_dir)
    if any_diverged(outcomes):
        logger.warning("At least one run diverged")
        return EXIT_DIVERGED
    return EXIT_OK


def cmd_train(args) -> int:
    out_dir = Config.get_run_dir(args.out)
    outcomes = run_matrix(load_configs(args), jobs=args.jobs, out_dir=out_dir, save_params=args.save_params)
    return _finish(outcomes, out_dir)


def cmd_sweep(args) -> int:
    """Cross every feature-map config with the preset's feature-count ablation grid."""
    out_dir = Config.get_run_dir(args.out)
    base = load_configs(args)
    counts = DataHelper.get_preset(base[0].preset if base else args.preset)["feature_ablation"]
    configs = [dataclasses.replace(cfg, features=n) for cfg in base if cfg.method.has_feature_map for n in counts]
    skipped = [cfg.key for cfg in base if not cfg.method.has_feature_map]
    if skipped:
        logger.warning(f"No feature map to sweep, skipped: {', '.join(skipped)}")
    outcomes = run_matrix(configs, jobs=args.jobs, out_dir=out_dir, save_params=args.save_params)
    return _finish(outcomes, out_dir)


def cmd_spectral(args) -> int:
    out_dir = Config.get_run_dir(args.out)
    outcomes = run_matrix(load_configs(args), jobs=args.jobs, out_dir=out_dir, spectral=True,
                          save_params=args.save_params)
    return _finish(outcomes, out_dir)


@log_action
def cmd_evaluate(args) -> int:
    spec, params, seed = load_checkpoint(Path(args.checkpoint))
    problem = get_problem(spec.problem_id)
    result = grid_sensitivity(problem, spec, params, refine=args.refine)
    result.update({"checkpoint": str(args.checkpoint), "seed": seed, "problem": spec.problem_id.value})
    out_dir = Config.get_run_dir(args.out)
    FileHelper.write_json(result, out_dir / f"{Path(args.checkpoint).stem}_evaluation.json")
    return EXIT_OK


@log_action
def cmd_gram_check(args) -> int:
    """
    Feature Gram of a harmonic-init, unit-amplitude Fourier bank on a periodic grid.

    The grid spans two harmonic periods per axis; with a checkpoint, the network's
    first-layer Gram and tangent kernel are reported as well.
    """
    if not args.problem:
        raise ConfigError("gram-check needs --problem")
    try:
        problem = get_problem(args.problem)
    except ValueError as e:
        raise ConfigError(str(e)) from e
    domain = problem.DOMAIN
    features = args.features or DataHelper.get_preset(args.preset)["features"]
    bank = FeatureBank.from_feature_count(features, domain.spatial_dims, normalize=False)
    scales = {axis: problem.harmonic_scale(axis) for axis in domain.axes}
    segments = bank.init_segments(SeedHelper.generator(0), FreqInit.HARMONIC, CoeffInit.UNIT,
                                  scales, domain.input_dim)
    n = max(args.grid, 4 * bank.n_sets)
    points = GridHelper.uniform_grid(
        domain.lower, [lo + 2 * scales[a] for lo, a in zip(domain.lower, domain.axes)],
        [n] * domain.input_dim, endpoint=False,
    )
    result = {"problem": problem.PROBLEM_ID.value, "fourier_bank": gram_conditioning(bank, segments, points).to_dict()}

    if args.checkpoint:
        spec, params, _ = load_checkpoint(Path(args.checkpoint))
        grid = GridHelper.uniform_grid(domain.lower, domain.upper, [args.kernel_grid] * domain.input_dim)
        result["network_features"] = network_feature_gram(spec, params, grid).to_dict()
        result["tangent_kernel"] = tangent_kernel_report(spec, params, grid).to_dict()

    out_dir = Config.get_run_dir(args.out)
    FileHelper.write_json(result, out_dir / f"gram_{problem.PROBLEM_ID.value}.json")
    return EXIT_OK


@log_action
def cmd_oracle_build(args) -> int:
    targets = [args.problem] if args.problem else [ProblemId.BURGERS.value, ProblemId.ALLEN_CAHN.value]
    oracle_dir = Path(args.oracle_dir) if args.oracle_dir else Config.ORACLE_DIR
    for problem_id in targets:
        problem = get_problem(problem_id)
        reference = build_oracle(problem, tol=args.tol)
        save_oracle(reference, oracle_dir / f"{problem.PROBLEM_ID.value}_oracle.csv")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bench", description="SAFE-NET PINN benchmark runner")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--preset", choices=["desk", "full"], help="Scale preset (default: SAFENET_PRESET or the document)")
        p.add_argument("--out", help="Output directory (default: Config.REPORTS_DIR)")

    def runs(p):
        common(p)
        p.add_argument("--config", help="Experiment JSON document")
        p.add_argument("--problem", help="Single run: problem id")
        p.add_argument("--method", help="Single run: method")
        p.add_argument("--schedule", default="S1", help="Single run: schedule kind")
        p.add_argument("--seeds", help="Comma-separated seeds, e.g. 0,1,2")
        p.add_argument("--jobs", type=int, default=Config.JOBS)
        p.add_argument("--save-params", action="store_true", help="Write final parameter checkpoints")

    for name, func, help_text in (
            ("train", cmd_train, "Train a config matrix and write reports"),
            ("sweep", cmd_sweep, "Train with the preset's feature-count ablation"),
            ("spectral", cmd_spectral, "Train and run SLQ at the spectral checkpoints")):
        p = sub.add_parser(name, help=help_text)
        runs(p)
        p.set_defaults(func=func)

    p = sub.add_parser("evaluate", help="L2RE of a checkpoint on the default and a refined grid")
    common(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--refine", type=int, default=2)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("gram-check", help="Gram conditioning of the Fourier features")
    common(p)
    p.add_argument("--problem")
    p.add_argument("--features", type=int)
    p.add_argument("--grid", type=int, default=64, help="Periodic grid nodes per axis")
    p.add_argument("--checkpoint", help="Also report the network Gram and tangent kernel")
    p.add_argument("--kernel-grid", type=int, default=16)
    p.set_defaults(func=cmd_gram_check)

    p = sub.add_parser("oracle-build", help="Build and cache the Burgers / Allen-Cahn oracles")
    common(p)
    p.add_argument("--problem", choices=[ProblemId.BURGERS.value, ProblemId.ALLEN_CAHN.value])
    p.add_argument("--oracle-dir")
    p.add_argument("--tol", type=float)
    p.set_defaults(func=cmd_oracle_build)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """
    Entry point.

    Returns:
        Process exit code
    """
    args = build_parser().parse_args(argv)
    SeedHelper.configure_torch()
    try:
        return args.func(args)
    except ConfigError as e:
        logger.error(f"Config error: {e}")
        return EXIT_CONFIG
    except (SafeNetError, OSError) as e:
        logger.error(f"{args.command} failed: {type(e).__name__}: {e}")
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
