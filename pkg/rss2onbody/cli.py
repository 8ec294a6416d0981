import argparse
import json
import logging
import os
import sys
import traceback
from contextlib import contextmanager
from pathlib import Path
from typing import Callable, Iterator, Optional, Sequence

from dotenv import load_dotenv

from .adversarial import load_checkpoint, save_checkpoint, train_adversarial, train_baseline
from .ban_synth import balanced_counts, synth_dataset
from .config import (
    ArchConfig,
    ExperimentRecipe,
    SynthConfig,
    TrainConfig,
    default_synth_config,
    load_config,
)
from .destination import FileSystemDestination
from .errors import InvalidConfigError, Rss2OnBodyError
from .eval import (
    evaluate,
    leave_one_motion_out,
    recipe_experiment,
    split_dataset,
    write_loss_curve,
    write_report,
    write_roc,
)
from .feature_store import FeatureDataset, load_dataset, save_dataset
from .features import profile_traces
from .labels import CONTROLLED_MOTIONS, DeviceLabel, MotionLabel, parse_motions
from .manifest import ENV_PREFIX, RunManifest, read_manifest, write_manifest
from .reader import CsvTraceReader
from .run_logger import RunLogger
from .theory import run_theory_checks

SEED_ENV = ENV_PREFIX + "SEED"
LOG_LEVEL_ENV = ENV_PREFIX + "LOG_LEVEL"

TRACES_DIR = "traces"
FEATURES_FILE = "features.bin"
TRAIN_FEATURES_FILE = "train.bin"
TEST_FEATURES_FILE = "test.bin"
CHECKPOINT_FILE = "checkpoint.bin"
HISTORY_FILE = "history.csv"
REPORT_FILE = "report.json"
ROC_FILE = "roc.csv"
LOMO_REPORT_FILE = "lomo_report.json"
RECIPE_REPORT_FILE = "recipe_report.json"
THEORY_REPORT_FILE = "theory_report.json"


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        self.print_usage(sys.stderr)
        _emit_error("UsageError", message, 2)
        sys.exit(2)


def _emit_error(kind: str, message: str, exit_code: int):
    sys.stderr.write(
        json.dumps({"error": kind, "message": message, "exit_code": exit_code}) + "\n"
    )


class _Run:
    """State of one command invocation: argv, env values consumed, logger and output folder"""

    def __init__(self, command: str, argv: Sequence[str], args: argparse.Namespace):
        self.command = command
        self.argv = list(argv)
        self.args = args
        self.env_used: dict[str, str] = dict(args.env_used)
        self.out_dir = FileSystemDestination(Path(args.out_dir))
        self.out_dir.mkdir()
        self.logger = RunLogger(
            log_file_path=self.out_dir / "log" / "log.jsonl",
            base_logger=logging.getLogger("rss2onbody"),
            log_name=command,
        )

    def finish(
        self,
        *,
        config: Optional[dict] = None,
        seeds: Optional[list[int]] = None,
        inputs: Optional[list[str]] = None,
        outputs: Optional[list[str]] = None,
    ):
        manifest = RunManifest.create(
            self.command,
            self.argv,
            config=config,
            seeds=seeds,
            inputs=inputs,
            outputs=outputs,
            env=self.env_used,
        )
        write_manifest(manifest, self.out_dir)
        self.logger.info("Command finished", stage=self.command, data={"out_dir": str(self.out_dir)})
        self.logger.flush()


def _dump(config) -> dict:
    return config.model_dump(mode="json", by_alias=True)


def _env(name: str, fallback: str, used: dict[str, str]) -> str:
    value = os.environ.get(name)
    if value is None:
        return fallback
    used[name] = value
    return value


def _seed_list(value: str) -> list[int]:
    try:
        seeds = [int(v) for v in value.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid seed list {value!r}")
    if not seeds or any(s < 0 for s in seeds):
        raise argparse.ArgumentTypeError("seeds must be non-negative integers")
    return seeds


def _float_list(value: str) -> list[float]:
    try:
        return [float(v) for v in value.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid number list {value!r}")


def _motion(value: str) -> MotionLabel:
    return MotionLabel(value.strip())


def _train_config(args: argparse.Namespace) -> TrainConfig:
    config = load_config(args.config, TrainConfig) if args.config else TrainConfig()
    update: dict = {"seed": args.seed}
    if getattr(args, "lambda_", None) is not None:
        update["lambda_"] = args.lambda_
    if getattr(args, "epochs", None) is not None:
        update["epochs"] = args.epochs
    return TrainConfig.model_validate({**config.model_dump(), **update})


def _arch_config(args: argparse.Namespace) -> ArchConfig:
    return load_config(args.arch, ArchConfig) if args.arch else ArchConfig()


def _load_features(path: str, motions: Optional[Sequence[MotionLabel]]) -> FeatureDataset:
    dataset = load_dataset(Path(path))
    return dataset.filter_motions(motions) if motions else dataset


def cmd_synth(run: _Run) -> int:
    args = run.args
    config = load_config(args.config, SynthConfig) if args.config else default_synth_config()
    if args.duration_s is not None:
        config = SynthConfig.model_validate({**config.model_dump(), "duration_s": args.duration_s})
    motions = args.motions or CONTROLLED_MOTIONS
    counts = balanced_counts(args.traces_per_cell, [m for m in motions if m.is_controlled])
    if args.uncontrolled_per_link:
        counts.update(
            {(link, MotionLabel.Uncontrolled): args.uncontrolled_per_link for link in DeviceLabel}
        )
    traces = synth_dataset(config, counts, args.seed, logger=run.logger)
    folder = run.out_dir / TRACES_DIR
    CsvTraceReader().write_directory(traces, folder)
    run.finish(config={"synth": _dump(config)}, seeds=[args.seed], outputs=[str(folder)])
    return 0


def cmd_featurize(run: _Run) -> int:
    args = run.args
    traces = CsvTraceReader().read_directory(Path(args.traces))
    ids = list(range(len(traces)))
    if args.motions:
        keep = [i for i, t in enumerate(traces) if t.motion in args.motions]
        traces, ids = [traces[i] for i in keep], keep
    dataset = FeatureDataset.from_profiles(profile_traces(traces, run.logger, ids))
    target = run.out_dir / FEATURES_FILE
    save_dataset(dataset, target)
    outputs = [str(target)]
    if args.test_fraction is not None:
        train, test = split_dataset(dataset, args.test_fraction, args.seed)
        save_dataset(train, run.out_dir / TRAIN_FEATURES_FILE)
        save_dataset(test, run.out_dir / TEST_FEATURES_FILE)
        outputs += [str(run.out_dir / TRAIN_FEATURES_FILE), str(run.out_dir / TEST_FEATURES_FILE)]
    run.logger.info(
        "Wrote feature dataset", stage="featurize", data={"records": len(dataset), "path": str(target)}
    )
    run.finish(seeds=[args.seed], inputs=[args.traces], outputs=outputs)
    return 0


def cmd_train(run: _Run) -> int:
    args = run.args
    config = _train_config(args)
    arch = _arch_config(args)
    motions = args.motions or CONTROLLED_MOTIONS
    train = _load_features(args.dataset, motions)
    validation = _load_features(args.validation, motions) if args.validation else None
    trainer = train_adversarial if args.mode == "adversarial" else train_baseline
    model, history = trainer(train, config, arch, test=validation, logger=run.logger)
    save_checkpoint(model, run.out_dir / CHECKPOINT_FILE)
    write_loss_curve(history, run.out_dir / HISTORY_FILE)
    run.finish(
        config={"mode": args.mode, "train": _dump(config), "arch": _dump(arch)},
        seeds=[config.seed],
        inputs=[args.dataset] + ([args.validation] if args.validation else []),
        outputs=[str(run.out_dir / CHECKPOINT_FILE), str(run.out_dir / HISTORY_FILE)],
    )
    return 0


def cmd_eval(run: _Run) -> int:
    args = run.args
    model = load_checkpoint(Path(args.checkpoint))
    dataset = _load_features(args.dataset, args.motions)
    report = evaluate(model, dataset, args.threshold)
    write_report(report, run.out_dir / REPORT_FILE)
    write_roc(report.roc_points, run.out_dir / ROC_FILE)
    run.logger.info(
        "Evaluated",
        stage="eval",
        data={"accuracy": report.accuracy, "auroc": report.auroc, "records": len(dataset)},
    )
    run.finish(
        config={"threshold": args.threshold},
        inputs=[args.checkpoint, args.dataset],
        outputs=[str(run.out_dir / REPORT_FILE), str(run.out_dir / ROC_FILE)],
    )
    return 0


def cmd_lomo(run: _Run) -> int:
    args = run.args
    config = _train_config(args)
    arch = _arch_config(args)
    seeds = args.seeds or [args.seed]
    dataset = _load_features(args.dataset, args.motions)
    report = leave_one_motion_out(
        dataset, config, seeds, arch, holdouts=args.holdout_motion, logger=run.logger
    )
    write_report(report, run.out_dir / LOMO_REPORT_FILE)
    run.finish(
        config={"train": _dump(config), "arch": _dump(arch)},
        seeds=seeds,
        inputs=[args.dataset],
        outputs=[str(run.out_dir / LOMO_REPORT_FILE)],
    )
    return 0


def cmd_recipe(run: _Run) -> int:
    args = run.args
    config = _train_config(args)
    arch = _arch_config(args)
    recipe = load_config(args.recipe, ExperimentRecipe) if args.recipe else ExperimentRecipe()
    seeds = args.seeds or [args.seed]
    dataset = load_dataset(Path(args.dataset))
    report = recipe_experiment(
        dataset, recipe, config, seeds, arch, threshold=args.threshold, logger=run.logger
    )
    write_report(report, run.out_dir / RECIPE_REPORT_FILE)
    run.finish(
        config={"train": _dump(config), "arch": _dump(arch), "recipe": _dump(recipe)},
        seeds=seeds,
        inputs=[args.dataset],
        outputs=[str(run.out_dir / RECIPE_REPORT_FILE)],
    )
    return 0


def cmd_theory_check(run: _Run) -> int:
    args = run.args
    report = run_theory_checks(
        args.seed,
        args.instances,
        max_x=args.max_x,
        max_z=args.max_z,
        codomain_size=args.codomain_size,
        lambdas=args.lambdas,
        logger=run.logger,
    )
    write_report(report, run.out_dir / THEORY_REPORT_FILE)
    if not report.passed:
        run.logger.error(
            "Some certificates failed",
            stage="theory",
            data={"failed": sum(not c.passed for c in report.certificates)},
        )
    run.finish(
        config={
            "instances": args.instances,
            "max_x": args.max_x,
            "max_z": args.max_z,
            "codomain_size": args.codomain_size,
            "lambdas": list(args.lambdas),
        },
        seeds=[args.seed],
        outputs=[str(run.out_dir / THEORY_REPORT_FILE)],
    )
    return 0


def cmd_pipeline(run: _Run) -> int:
    """synth -> featurize (with split) -> train -> eval, each stage in its own folder"""
    args = run.args
    out = Path(args.out_dir)
    common = ["--seed", str(args.seed)]
    stages: list[list[str]] = [
        ["synth", "--out-dir", str(out / "synth"), "--traces-per-cell", str(args.traces_per_cell)]
        + ["--uncontrolled-per-link", str(args.uncontrolled_per_link)]
        + (["--config", args.synth_config] if args.synth_config else [])
        + (["--duration-s", str(args.duration_s)] if args.duration_s is not None else [])
        + common,
        ["featurize", "--traces", str(out / "synth" / TRACES_DIR), "--out-dir", str(out / "features")]
        + ["--test-fraction", str(args.test_fraction)]
        + common,
        ["train", "--dataset", str(out / "features" / TRAIN_FEATURES_FILE)]
        + ["--out-dir", str(out / "train"), "--mode", args.mode]
        + (["--config", args.config] if args.config else [])
        + (["--arch", args.arch] if args.arch else [])
        + (["--lambda", str(args.lambda_)] if args.lambda_ is not None else [])
        + (["--epochs", str(args.epochs)] if args.epochs is not None else [])
        + common,
        ["eval", "--checkpoint", str(out / "train" / CHECKPOINT_FILE)]
        + ["--dataset", str(out / "features" / TEST_FEATURES_FILE)]
        + ["--out-dir", str(out / "eval"), "--threshold", str(args.threshold)]
        + common,
    ]
    for stage in stages:
        run.logger.info("Running stage", stage="pipeline", sub_stage=stage[0])
        code = _dispatch(stage)
        if code != 0:
            return code
    run.finish(
        seeds=[args.seed],
        outputs=[str(out / s) for s in ("synth", "features", "train", "eval")],
    )
    return 0


def _replace_out_dir(argv: list[str], out_dir: str) -> list[str]:
    result = []
    skip = False
    for i, a in enumerate(argv):
        if skip:
            skip = False
            continue
        if a == "--out-dir" and i + 1 < len(argv):
            result += [a, out_dir]
            skip = True
        elif a.startswith("--out-dir="):
            result.append("--out-dir=" + out_dir)
        else:
            result.append(a)
    return result


@contextmanager
def _replay_context(cwd: str, env: dict[str, str]) -> Iterator[None]:
    previous_cwd = os.getcwd()
    previous_env = {k: os.environ.get(k) for k in env}
    os.chdir(cwd)
    os.environ.update(env)
    try:
        yield
    finally:
        os.chdir(previous_cwd)
        for k, v in previous_env.items():
            if v is None:
                os.environ.pop(k, None)
            else:
                os.environ[k] = v


def cmd_replay(args: argparse.Namespace) -> int:
    """Runs the recorded command again; its own manifest is rewritten by that command"""
    manifest = read_manifest(Path(args.manifest))
    if manifest.command == "replay":
        raise InvalidConfigError("A replay manifest cannot be replayed")
    argv = manifest.argv
    if args.out_dir:
        argv = _replace_out_dir(argv, str(Path(args.out_dir).resolve()))
    with _replay_context(manifest.cwd, manifest.env):
        return _dispatch(argv)


def _add_common(p: argparse.ArgumentParser, out_dir: bool = True):
    p.add_argument("--seed", type=int, default=None, help=f"Master seed, defaults to ${SEED_ENV} or 0")
    if out_dir:
        p.add_argument("--out-dir", required=True, help="Output folder, receives manifest.json")


def _add_training(p: argparse.ArgumentParser):
    p.add_argument("--config", help="TrainConfig JSON")
    p.add_argument("--arch", help="ArchConfig JSON")
    p.add_argument(
        "--lambda",
        dest="lambda_",
        type=float,
        default=None,
        help=TrainConfig.model_fields["lambda_"].description,
    )
    p.add_argument("--epochs", type=int, default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="rss2onbody", description="On-body / off-body device authentication from RSS")
    parser.add_argument("--log-level", default=None, help=f"Defaults to ${LOG_LEVEL_ENV} or WARNING")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("synth", help="Generate labeled synthetic RSS traces")
    _add_common(p)
    p.add_argument("--config", help="SynthConfig JSON, defaults to the shipped config")
    p.add_argument("--motions", type=parse_motions, default=None)
    p.add_argument("--traces-per-cell", type=int, default=10)
    p.add_argument("--uncontrolled-per-link", type=int, default=0)
    p.add_argument("--duration-s", type=float, default=None)

    p = sub.add_parser("featurize", help="Build propagation profiles from a trace folder")
    _add_common(p)
    p.add_argument("--traces", required=True, help="Folder holding traces.json")
    p.add_argument("--motions", type=parse_motions, default=None)
    p.add_argument("--test-fraction", type=float, default=None, help="Also write a stratified train / test split")

    p = sub.add_parser("train", help="Train the adversarial or the baseline network")
    _add_common(p)
    _add_training(p)
    p.add_argument("--dataset", required=True)
    p.add_argument("--validation", help="Feature file driving early stopping")
    p.add_argument("--mode", choices=("adversarial", "baseline"), default="adversarial")
    p.add_argument("--motions", type=parse_motions, default=None)

    p = sub.add_parser("eval", help="Evaluate a checkpoint on a feature file")
    _add_common(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--threshold", type=float, default=0.5)
    p.add_argument("--motions", type=parse_motions, default=None)

    p = sub.add_parser("lomo", help="Leave-one-motion-out comparison of both trainers")
    _add_common(p)
    _add_training(p)
    p.add_argument("--dataset", required=True)
    p.add_argument("--seeds", type=_seed_list, default=None)
    p.add_argument("--holdout-motion", type=_motion, action="append", default=None)
    p.add_argument("--motions", type=parse_motions, default=None)

    p = sub.add_parser("recipe", help="Controlled vs uncontrolled experiment over several seeds")
    _add_common(p)
    _add_training(p)
    p.add_argument("--dataset", required=True)
    p.add_argument("--recipe", help="ExperimentRecipe JSON")
    p.add_argument("--seeds", type=_seed_list, default=None)
    p.add_argument("--threshold", type=float, default=0.5)

    p = sub.add_parser("theory-check", help="Certify the equilibrium statements on random finite joints")
    _add_common(p)
    p.add_argument("--instances", type=int, default=20)
    p.add_argument("--max-x", type=int, default=8)
    p.add_argument("--max-z", type=int, default=3)
    p.add_argument("--codomain-size", type=int, default=4)
    p.add_argument("--lambdas", type=_float_list, default=[0.1, 1.0, 10.0])

    p = sub.add_parser("pipeline", help="synth, featurize, train and eval in one go")
    _add_common(p)
    _add_training(p)
    p.add_argument("--synth-config")
    p.add_argument("--traces-per-cell", type=int, default=10)
    p.add_argument("--uncontrolled-per-link", type=int, default=10)
    p.add_argument("--duration-s", type=float, default=None)
    p.add_argument("--test-fraction", type=float, default=0.2)
    p.add_argument("--mode", choices=("adversarial", "baseline"), default="adversarial")
    p.add_argument("--threshold", type=float, default=0.5)

    p = sub.add_parser("replay", help="Re-run a command from its manifest.json")
    p.add_argument("--manifest", required=True, help="manifest.json or the folder holding it")
    p.add_argument("--out-dir", default=None, help="Write the outputs somewhere else")
    return parser


_COMMANDS: dict[str, Callable[[_Run], int]] = {
    "synth": cmd_synth,
    "featurize": cmd_featurize,
    "train": cmd_train,
    "eval": cmd_eval,
    "lomo": cmd_lomo,
    "recipe": cmd_recipe,
    "theory-check": cmd_theory_check,
    "pipeline": cmd_pipeline,
}


def _dispatch(argv: Sequence[str]) -> int:
    args = build_parser().parse_args(list(argv))
    if args.command == "replay":
        return cmd_replay(args)
    env_used: dict[str, str] = {}
    if args.seed is None:
        args.seed = int(_env(SEED_ENV, "0", env_used))
    args.env_used = env_used
    return _COMMANDS[args.command](_Run(args.command, argv, args))


def main(argv: Optional[Sequence[str]] = None) -> int:
    load_dotenv()
    argv = list(sys.argv[1:] if argv is None else argv)
    level = os.environ.get(LOG_LEVEL_ENV, "WARNING")
    if "--log-level" in argv[:-1]:
        level = argv[argv.index("--log-level") + 1]
    logging.basicConfig(level=level.upper(), format="%(levelname)s %(name)s: %(message)s")
    try:
        return _dispatch(argv)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else 2
    except Rss2OnBodyError as e:
        _emit_error(type(e).__name__, str(e), e.exit_code)
        return e.exit_code
    except Exception as e:
        logging.getLogger("rss2onbody").debug(traceback.format_exc())
        _emit_error(type(e).__name__, str(e), 1)
        return 1
