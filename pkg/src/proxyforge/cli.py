"""Command-line experiment runner.

Subcommands::

    proxyforge train      --config FILE | --preset NAME  [--out DIR] [--seed N]
    proxyforge eval       --model FILE [--config FILE] [--out DIR] [--workers K]
    proxyforge gradcheck  [--loss NAME|all] [--seed N] [--trials T]
    proxyforge complexity [--config FILE] [--out DIR] [--seed N]

Exit codes: 0 success, 1 failed check, 2 bad input, 3 training diverged.
The log level comes from the ``PROXYFORGE_LOG`` environment variable.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from importlib import resources
from pathlib import Path

import numpy as np

from .complexity import fit_scaling, write_scaling_csv
from .config import ConfigError, ExperimentConfig, load_experiment, preset_names, read_json
from .data import generate_dataset
from .errors import ProbeError, SamplerError, TrainingDivergedError
from .evaluation import ScoreSet, build_trials, compute_eer, score_trials, write_det_csv, write_scores_csv
from .losses import LOSS_NAMES
from .losses.gradcheck import check_gradients
from .trainer import TrainedModel, train, write_metrics_csv

log = logging.getLogger("proxyforge")

EXIT_OK, EXIT_FAILED, EXIT_USAGE, EXIT_DIVERGED = 0, 1, 2, 3
GRADCHECK_TOLERANCE = 1e-4


def _fail(message: str, code: int = EXIT_USAGE) -> int:
    print(f"error: {message}", file=sys.stderr)
    return code


def _out_dir(path) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_train(args) -> int:
    try:
        cfg = load_experiment(args.config, args.preset, {"seed": args.seed})
    except ConfigError as exc:
        return _fail(str(exc))
    out = _out_dir(args.out)
    data = generate_dataset(cfg.dataset_config())
    try:
        result = train(cfg.train_config(), data, workers=args.workers)
    except TrainingDivergedError as exc:
        return _fail(str(exc), EXIT_DIVERGED)
    except SamplerError as exc:
        return _fail(str(exc))
    write_metrics_csv(out / "metrics.csv", result.log)
    result.model.save(out / "model.npz", config_json=np.array(json.dumps(cfg.to_dict(), sort_keys=True)))
    summary = {
        "loss": cfg.loss,
        "epochs_run": len(result.log),
        "final_eer_percent": result.final_eer if result.log else None,
        "best_eer_percent": result.best_eer if result.log else None,
        "alpha": result.model.params.alpha,
        "beta": result.model.params.beta,
        "config": cfg.to_dict(),
    }
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    if result.log:
        print(f"final EER% = {result.final_eer:.2f} (best {result.best_eer:.2f}) after {len(result.log)} epochs")
    return EXIT_OK


def cmd_eval(args) -> int:
    model_path = Path(args.model)
    if not model_path.is_file():
        return _fail(f"no such model: {model_path}")
    model = TrainedModel.load(model_path)
    try:
        if args.config:
            raw = read_json(args.config)
        else:
            with np.load(model_path) as z:
                if "config_json" not in z:
                    return _fail("model carries no config; pass --config")
                raw = json.loads(str(z["config_json"]))
        if args.seed is not None:
            raw["seed"] = args.seed
        cfg = ExperimentConfig.from_dict(raw)
    except ConfigError as exc:
        return _fail(str(exc))
    out = _out_dir(args.out)
    data = generate_dataset(cfg.dataset_config())
    trials = build_trials(data.test, cfg.num_trials, cfg.seed)
    scores = score_trials(trials, model.embedder, cfg.num_segments, cfg.segment_length, args.workers)
    score_set = ScoreSet.from_trials(trials, scores)
    eer, threshold = compute_eer(score_set)
    write_scores_csv(out / "scores.csv", trials, scores)
    write_det_csv(out / "det.csv", score_set)
    print(f"EER% = {100 * eer:.2f}")
    log.info("EER threshold %.6f over %d trials", threshold, len(trials))
    return EXIT_OK


def cmd_gradcheck(args) -> int:
    names = LOSS_NAMES if args.loss == "all" else (args.loss,)
    if args.trials == 0:
        print("warning: trials=0, nothing checked", file=sys.stderr)
        return EXIT_OK
    worst = 0.0
    for name in names:
        report = check_gradients(name, seed=args.seed, trials=args.trials)
        cells = "  ".join(f"{g}={e:.3e}" for g, e in report.items())
        print(f"{name:<22} {cells}")
        worst = max(worst, *report.values())
    status = "PASS" if worst < GRADCHECK_TOLERANCE else "FAIL"
    print(f"{status}: max relative error {worst:.3e} (tolerance {GRADCHECK_TOLERANCE:g})")
    return EXIT_OK if worst < GRADCHECK_TOLERANCE else EXIT_FAILED


def _default_grid() -> dict:
    res = resources.files("proxyforge") / "presets" / "complexity_grid.json"
    return json.loads(res.read_text())


def cmd_complexity(args) -> int:
    try:
        grid = read_json(args.config) if args.config else _default_grid()
    except ConfigError as exc:
        return _fail(str(exc))
    seed = args.seed if args.seed is not None else int(grid.get("seed", 0))
    sweeps = grid.get("sweeps")
    if not isinstance(sweeps, list) or not sweeps:
        return _fail("grid config needs a non-empty 'sweeps' list")
    reports = []
    try:
        for sweep in sweeps:
            reports.append(fit_scaling(sweep["loss"], sweep, seed=seed))
    except (ProbeError, SamplerError, KeyError, TypeError) as exc:
        return _fail(f"infeasible grid: {exc}")
    out = _out_dir(args.out)
    write_scaling_csv(out / "scaling.csv", reports)
    for rep in reports:
        print(f"{rep.loss:<22} vs {rep.param}: slope {rep.slope:.3f} (rms residual {rep.residual:.2e})")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="proxyforge", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train on the synthetic benchmark")
    p.add_argument("--config", help="flat JSON config file")
    p.add_argument("--preset", choices=preset_names(), help="bundled preset (file values override it)")
    p.add_argument("--out", default="runs/train")
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="score verification trials with a trained model")
    p.add_argument("--model", required=True)
    p.add_argument("--config", help="trial/dataset config; defaults to the model's training config")
    p.add_argument("--out", default="runs/eval")
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("gradcheck", help="finite-difference check of every analytic gradient")
    p.add_argument("--loss", default="all", choices=("all",) + LOSS_NAMES)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--trials", type=int, default=20)
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("complexity", help="count comparisons per epoch and fit growth rates")
    p.add_argument("--config", help="sweep grid JSON; defaults to the bundled grid")
    p.add_argument("--out", default="runs/complexity")
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_complexity)
    return parser


def main(argv=None) -> int:
    level = os.environ.get("PROXYFORGE_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
