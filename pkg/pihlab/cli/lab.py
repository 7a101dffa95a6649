import json
import os
import sys
import time

import numpy as np

from pihlab._common import dump_json
from pihlab.cli._common import (
    RUNTIME_ERROR,
    ArgumentParser,
    add_common_cli_args,
    add_version_arg,
    create_logger,
    create_progress_handler,
)
from pihlab.config import RunConfig, rng_for
from pihlab.control import CONTROLLER_KINDS, run_episode
from pihlab.convergence import (
    detect_episode_convergence,
    ensemble_detect,
    ensemble_statistics,
    window_statistics,
)
from pihlab.core import PlanarMisalignment, derive_seed, float_text, seeded_rng
from pihlab.errors import LabError
from pihlab.learning import (
    DATASET_COLUMNS,
    AXES,
    Dataset,
    DirectionModels,
    FeatureSelector,
    collect_dataset,
    evaluate_models,
    fit_direction_models,
    fit_forest,
    tune_lengthscale,
)
from pihlab.policy import ContactOracle, evaluate_policy
from pihlab.report import render_report
from pihlab.units import format_duration


__all__ = ("get_arg_parser", "main", "run")


CONVERGENCE_COLUMNS = ("window", "mean_fz", "two_sigma", "ens_mean", "ci_half", "esig", "ssig")


def get_arg_parser():
    p = ArgumentParser(
        prog="pihlab",
        description="Simulated peg-in-hole experiments with accommodation control.",
        epilog="""Every subcommand reads a JSON run-config (--config) and writes
                  into an output directory (--out). Randomness flows from one
                  seed: --seed, else $PIH_SEED, else the config's seed."""
    )
    add_version_arg(p)

    sub = p.add_subparsers(dest="command", metavar="COMMAND", parser_class=ArgumentParser)
    sub.required = True

    collect = sub.add_parser("collect",
        help="""Collect a misalignment dataset (dataset.csv, meta.json)."""
    )
    add_controller_arg(collect)
    collect.add_argument("-n", "--episodes",
        type=int,
        default=None,
        help="""Number of episodes. Defaults to learning.n_episodes."""
    )

    analyze = sub.add_parser("analyze-convergence",
        help="""Ensemble convergence analysis (convergence.csv, convergence.json)."""
    )
    add_controller_arg(analyze)

    train = sub.add_parser("train",
        help="""Fit direction models and feature importance (model.json, importance.json)."""
    )
    add_dataset_arg(train)

    evaluate = sub.add_parser("evaluate-models",
        help="""Held-out accuracy and RMSE, full vs reduced features (evaluation.json)."""
    )
    add_dataset_arg(evaluate)

    insert = sub.add_parser("insert",
        help="""Run the corrective insertion policy (summary.json)."""
    )
    add_controller_arg(insert)
    insert.add_argument("--model",
        metavar="PATH",
        default=None,
        help="""Trained model file. Defaults to model.json in the output
                directory."""
    )
    insert.add_argument("--oracle",
        action="store_true",
        help="""Use the exact contact-signature inverse instead of trained
                models."""
    )

    sub.add_parser("report",
        help="""Summarize the result files in the output directory (report.txt)."""
    )

    for subparser in sub.choices.values():
        add_common_cli_args(subparser)
        add_version_arg(subparser)

    return p


def add_controller_arg(p):
    p.add_argument("--controller",
        choices=sorted(CONTROLLER_KINDS),
        default=None,
        help="""Controller kind, overriding controller.kind in the config."""
    )


def add_dataset_arg(p):
    p.add_argument("--dataset",
        metavar="PATH",
        action="append",
        default=None,
        help="""Dataset CSV; may be repeated. Defaults to dataset.csv in the
                output directory."""
    )


def main():
    """Entry point for the pihlab command.

    Returns:
        Exit code for passing to sys.exit()
    """
    return run(sys.argv[1:])


def run(argv=None):
    """Run pihlab with the specified command line arguments.

    Args:
        argv (list of str or None): command line arguments, not including the
            command itself (argv[0]).

    Returns:
        Exit code: 0 on success, 1 on usage errors, 2 on runtime errors.
    """
    p = get_arg_parser()
    try:
        args = p.parse_args(argv)
    except SystemExit as exit_:
        return exit_.code

    logger = create_logger(args)
    start_time = time.time()

    try:
        config = RunConfig.load(args.config, seed_override=args.seed)
        os.makedirs(args.out, exist_ok=True)
        COMMANDS[args.command](args, config, logger)
    except (LabError, OSError) as error:
        logger.error("{error!s}", error=error)
        return RUNTIME_ERROR

    if args.time:
        logger.info("elapsed: {t}", t=format_duration(time.time() - start_time, 1))
    return 0


def out_path(args, name):
    return os.path.join(args.out, name)


def write_json(path, data):
    with open(path, "w") as stream:
        dump_json(data, stream)


def load_datasets(args):
    paths = args.dataset or [ out_path(args, "dataset.csv") ]
    merged = Dataset()
    for path in paths:
        for record in Dataset.from_csv(path):
            merged.append(record)
    return merged


def collect(args, config, logger):
    controller = config.controller.build(args.controller)
    n = args.episodes if args.episodes is not None else config.learning.n_episodes
    logger.info("collecting {n} {kind} episodes, seed {seed}", n=n, kind=controller.kind, seed=config.seed)

    dataset = collect_dataset(
        config.env, controller, n, rng_for(config.seed, "collect"),
        traj=config.trajectory_spec(),
        criterion=config.convergence,
        logger=logger,
        progress_handler=create_progress_handler(args, "collect"),
    )
    dataset.to_csv(out_path(args, "dataset.csv"))
    write_json(out_path(args, "meta.json"), {
        "seed": config.seed,
        "controller": controller.kind,
        "n_records": len(dataset),
        "failed_seeds": dataset.failed_seeds,
        "columns": list(DATASET_COLUMNS),
        "config": config.to_dict(),
    })


def analyze_convergence(args, config, logger):
    controller = config.controller.build(args.controller)
    criterion = config.convergence
    analysis = config.analysis
    traj = config.trajectory_spec()
    rng = rng_for(config.seed, "analysis")
    progress = create_progress_handler(args, "episodes")

    logs = [ ]
    for index in range(analysis.n_episodes):
        episode_rng = seeded_rng(derive_seed(rng))
        logs.append(run_episode(
            controller, config.env, traj, PlanarMisalignment(*analysis.misalignment), episode_rng, logger=logger,
        ))
        progress.progress(index + 1, analysis.n_episodes)
    progress.complete()

    ensemble = ensemble_statistics(logs, criterion.window_len)
    representative = window_statistics(logs[0], criterion.window_len)
    detected = ensemble_detect(ensemble, criterion)
    per_episode = [detect_episode_convergence(episode, criterion) for episode in logs]

    with open(out_path(args, "convergence.csv"), "w") as stream:
        stream.write(",".join(CONVERGENCE_COLUMNS) + "\n")
        for window, stats in zip(ensemble.rows(), representative):
            k, ens_mean, ci_half, esig, ssig = window
            stream.write(",".join(
                [str(k)] + [float_text(v) for v in (stats.mean_fz, stats.two_sigma_fz, ens_mean, ci_half, esig, ssig)]
            ) + "\n")

    found = [k for k in per_episode if k is not None]
    result = {
        "controller": controller.kind,
        "n_episodes": len(logs),
        "window_len": criterion.window_len,
        "ensemble_window": detected,
        "ensemble_time_s": None if detected is None else detected * criterion.window_len,
        "episode_windows": per_episode,
        "median_episode_window": float(np.median(found)) if found else None,
        "steady_fz": float(ensemble.mean[-1]),
    }
    write_json(out_path(args, "convergence.json"), result)
    json.dump(result, sys.stdout, sort_keys=True)
    sys.stdout.write("\n")


def train(args, config, logger):
    dataset = load_datasets(args)
    learning = config.learning
    selector = FeatureSelector.parse(learning.feature_mode)
    params = learning.kernel

    if learning.tune:
        params = tune_lengthscale(
            dataset.features(selector), dataset.labels("x"),
            seed=derive_seed(rng_for(config.seed, "tune")), params=params, logger=logger,
        )

    models = fit_direction_models(dataset, selector, params, logger=logger)
    models.save(out_path(args, "model.json"))

    forest_rng = rng_for(config.seed, "forest")
    importance = { }
    for axis in AXES:
        forest = fit_forest(dataset, axis, learning.forest, forest_rng, FeatureSelector.FULL, logger=logger)
        mean, std = forest.feature_importance()
        importance[axis] = {
            "features": list(forest.feature_names),
            "mean": mean.tolist(),
            "std": std.tolist(),
        }
    write_json(out_path(args, "importance.json"), importance)
    logger.info("trained {mode} models on {n} records", mode=selector.value, n=len(dataset))


def evaluate(args, config, logger):
    dataset = load_datasets(args)
    report = evaluate_models(dataset, config.learning.split_seed, config.learning.kernel, logger=logger)
    write_json(out_path(args, "evaluation.json"), report.to_dict())
    for row in report.rows:
        logger.info(
            "{controller} {axis} {feature_mode}: accuracy={accuracy:.4f} rmse={rmse:.4f}", **row
        )


def insert(args, config, logger):
    if args.oracle:
        models = ContactOracle(config.env, config.policy.step_size)
        kind = args.controller or config.controller.kind
    else:
        models = DirectionModels.load(args.model or out_path(args, "model.json"))
        kind = args.controller or models.controller or config.controller.kind
    controller = config.controller.build(kind)

    summary = evaluate_policy(
        config.env, models, config.policy, config.insertion.n_trials, rng_for(config.seed, "insert"),
        controller=controller,
        traj_cfg=config.trajectory,
        criterion=config.convergence,
        workspace=config.insertion.workspace,
        logger=logger,
        progress_handler=create_progress_handler(args, "trials"),
    )
    write_json(out_path(args, "summary.json"), summary.to_dict())


def report(args, config, logger):
    lines = render_report(args.out)
    with open(out_path(args, "report.txt"), "w") as stream:
        for line in lines:
            stream.write(line + "\n")
    for line in lines:
        print(line)


COMMANDS = {
    "collect": collect,
    "analyze-convergence": analyze_convergence,
    "train": train,
    "evaluate-models": evaluate,
    "insert": insert,
    "report": report,
}
