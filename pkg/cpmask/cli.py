"""
cpmask command line: gen, train, eval, viz, gradcheck, ablate
Every command writes run.json (command, arguments, config, seed, versions) next to its outputs
"""
import argparse
import json
import logging
import os
import platform
import sys

from typing import (
    Any,
    Dict,
    List,
    Optional,
    TextIO
)

import numpy as np
import torch

from . import __version__
from .engine import configure_threads, finetune_fewshot, load_checkpoint, save_checkpoint, train
from .enums import AblationLabels, AblationVariants, ExtendedAblationVariants, Splits, Subsets, SupervisionModes
from .evalviz import ablation_table, base_count_table, emit_heatmaps, evaluate
from .exceptions import ConfigError, CPMaskException
from .losses import pathway_checks
from .schema.config import TrainConfig
from .shapesdata import DEFAULT_BASE, DEFAULT_NOVEL, generate_dataset, load_dataset
from .utils import default_encode

logger = logging.getLogger(__name__)

CHECKPOINT = "checkpoint.bin"
TRAIN_LOG = "train_log.jsonl"
REPORT = "report.json"
RUN_RECORD = "run.json"
GRADCHECK_TOLERANCE = 1e-4
GENERALIZATION_VARIANTS = ("baseline", "both")


def count_list(val: str) -> List[int]:
    try:
        return [int(c) for c in val.split(",") if c.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma separated integers - {val}")


def category_list(val: str) -> List[str]:
    return [c.strip() for c in val.split(",") if c.strip()]


def write_run_record(out_dir: str, command: str, args: Dict[str, Any], config: Optional[TrainConfig] = None, seed: Optional[int] = None, **extra) -> str:
    """
    Provenance record of one command
    :return: path of run.json
    """
    os.makedirs(out_dir, exist_ok=True)
    record = {
        "command": command,
        "argv": sys.argv[1:],
        "args": {k: v for k, v in args.items() if k != "func"},
        "config": config.dict() if config is not None else None,
        "seed": seed,
        "versions": {
            "cpmask": __version__,
            "python": platform.python_version(),
            "numpy": np.__version__,
            "torch": torch.__version__
        },
        **extra
    }
    path = os.path.join(out_dir, RUN_RECORD)
    with open(path, "w") as f:
        json.dump(default_encode(record), f, indent=2, sort_keys=True)
    return path


def load_config(args: Dict[str, Any], **overrides) -> TrainConfig:
    overrides = {k: v for k, v in overrides.items() if v is not None}
    if args.get("config"):
        return TrainConfig.load(args["config"], **overrides)
    return TrainConfig(overrides)


# Commands
def cmd_gen(args: Dict[str, Any], stdout: TextIO) -> int:
    manifest = generate_dataset(
        seed=args["seed"],
        n_train=args["num_train"],
        n_val=args["num_val"],
        base_cats=args["base_cats"],
        novel_cats=args["novel_cats"],
        height=args["size"],
        width=args["size"],
        out_dir=args["out"]
    )
    write_run_record(args["out"], "gen", args, seed=args["seed"])
    stdout.write(f"Generated {args['num_train'] + args['num_val']} images at {args['out']}\n")
    return 0


def cmd_train(args: Dict[str, Any], stdout: TextIO) -> int:
    config = load_config(args, supervision_mode=args["mode"], shots=args["shots"], total_iters=args["iters"], seed=args["seed"])
    dataset = load_dataset(args["data"])
    out = args["out"]
    os.makedirs(out, exist_ok=True)
    log_path = os.path.join(out, TRAIN_LOG)
    if os.path.exists(log_path):
        os.remove(log_path)

    if config.supervision_mode == SupervisionModes.FEWSHOT:
        if args.get("init"):
            state = load_checkpoint(args["init"])
            state.config = state.config.replace(finetune_iters=config.finetune_iters, finetune_lr=config.finetune_lr, seed=config.seed)
        else:
            state = train(config.replace(supervision_mode=SupervisionModes.PARTIAL), dataset, log_path=log_path, dump_dir=out)
        state = finetune_fewshot(state, dataset, config.shots, config, log_path=log_path, dump_dir=out)
    else:
        state = load_checkpoint(args["init"], config) if args.get("init") else None
        state = train(config, dataset, state=state, log_path=log_path, dump_dir=out)

    save_checkpoint(state, os.path.join(out, CHECKPOINT))
    write_run_record(out, "train", args, config=state.config, seed=config.seed, iteration=state.iteration)
    stdout.write(f"Trained {state.iteration} iterations, final loss {state.running.get('total', 0.0):.4f}, checkpoint at {os.path.join(out, CHECKPOINT)}\n")
    return 0


def cmd_eval(args: Dict[str, Any], stdout: TextIO) -> int:
    state = load_checkpoint(args["ckpt"])
    dataset = load_dataset(args["data"])
    subset = None if args["subset"] == "all" else args["subset"]
    predictions = None
    if args["gt_as_prediction"]:
        predictions = {i.annotation_id: i.mask for s in dataset for i in s.instances}
    report = evaluate(state, dataset, args["split"], subset, predictions)

    out_dir = os.path.dirname(os.path.abspath(args["report"]))
    os.makedirs(out_dir, exist_ok=True)
    report.dump(args["report"])
    write_run_record(out_dir, "eval", args, config=state.config, seed=state.config.seed)
    stdout.write(report.table())
    return 0


def cmd_viz(args: Dict[str, Any], stdout: TextIO) -> int:
    state = load_checkpoint(args["ckpt"])
    dataset = load_dataset(args["data"])
    paths = emit_heatmaps(state, dataset, args["image_id"], args["out"])
    write_run_record(args["out"], "viz", args, config=state.config, seed=state.config.seed, files=[os.path.basename(p) for p in paths])
    stdout.write("".join(f"{p}\n" for p in paths))
    return 0


def cmd_gradcheck(args: Dict[str, Any], stdout: TextIO) -> int:
    results = pathway_checks(args["seed"], args["entries"])
    worst = max(results.values())
    for name, err in results.items():
        stdout.write(f"{name:<16} {err:.3e}\n")
    passed = worst <= GRADCHECK_TOLERANCE
    stdout.write(f"max relative error {worst:.3e} - {'PASS' if passed else 'FAIL'}\n")
    if args.get("out"):
        write_run_record(args["out"], "gradcheck", args, seed=args["seed"], results=results, passed=passed)
    return 0 if passed else 1


def _ablation_run(config: TrainConfig, dataset, variant: str) -> Dict[str, Any]:
    logger.info("ablation %s seed %d base categories %s", variant, config.seed, config.base_categories or "all")
    state = train(config, dataset)
    report = evaluate(state, dataset, Splits.NOVEL, Subsets.VAL)
    return {"variant": variant, "label": AblationLabels[variant], "seed": config.seed, **{k: report.novel[k] for k in ("AP", "AP50", "AP75")}}


def cmd_ablate(args: Dict[str, Any], stdout: TextIO) -> int:
    base = load_config(args, total_iters=args["iters"])
    dataset = load_dataset(args["data"])
    counts = args.get("base_counts")
    if counts:
        n_base = len(dataset.category_ids(Splits.BASE))
        bad = [k for k in counts if not 1 <= k <= n_base]
        if bad:
            raise ConfigError(f"base counts must be between 1 and {n_base} - given {', '.join(map(str, bad))}")
        variants = {v: AblationVariants[v] for v in GENERALIZATION_VARIANTS}
        name, make = "base_counts", base_count_table
    else:
        counts = [base.base_categories]
        variants = dict(AblationVariants)
        if args["extended"]:
            variants.update(ExtendedAblationVariants)
        name, make = "ablation", ablation_table

    rows = []
    for count in counts:
        for variant, flags in variants.items():
            for seed in range(args["seeds"]):
                config = base.replace(supervision_mode=SupervisionModes.PARTIAL, seed=base.seed + seed, base_categories=count, **flags)
                row = _ablation_run(config, dataset, variant)
                rows.append({"base_categories": count, **row} if name == "base_counts" else row)

    out = args["out"]
    os.makedirs(out, exist_ok=True)
    with open(os.path.join(out, f"{name}.json"), "w") as f:
        json.dump(rows, f, indent=2)
    table = make(rows)
    with open(os.path.join(out, f"{name}.txt"), "w") as f:
        f.write(table)
    write_run_record(out, "ablate", args, config=base, seed=base.seed)
    stdout.write(table)
    return 0


# Parser
parser = argparse.ArgumentParser(prog="cpmask", description="CPMask mask branch experiments")
parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
subparsers = parser.add_subparsers(dest="command", required=True)

gen = subparsers.add_parser("gen", help="generate a synthetic shapes dataset")
gen.add_argument("--out", required=True, help="dataset directory")
gen.add_argument("--num-train", type=int, default=2000, help="train images")
gen.add_argument("--num-val", type=int, default=500, help="val images")
gen.add_argument("--seed", type=int, default=0, help="dataset seed")
gen.add_argument("--base-cats", type=category_list, default=list(DEFAULT_BASE), help="comma separated base categories")
gen.add_argument("--novel-cats", type=category_list, default=list(DEFAULT_NOVEL), help="comma separated novel categories")
gen.add_argument("--size", type=int, default=96, help="image side length")
gen.set_defaults(func=cmd_gen)

trn = subparsers.add_parser("train", help="train the mask branch")
trn.add_argument("--data", required=True, help="dataset directory")
trn.add_argument("--config", help="key = value config file")
trn.add_argument("--out", required=True, help="output directory")
trn.add_argument("--mode", choices=list(SupervisionModes.values()), help="supervision mode (overrides the config)")
trn.add_argument("--shots", type=int, help="annotations per novel category in fewshot mode")
trn.add_argument("--init", help="checkpoint to resume or fine-tune")
trn.add_argument("--iters", type=int, help="total iterations (overrides the config)")
trn.add_argument("--seed", type=int, help="seed (overrides the config)")
trn.set_defaults(func=cmd_train)

evl = subparsers.add_parser("eval", help="oracle-box mask AP")
evl.add_argument("--data", required=True, help="dataset directory")
evl.add_argument("--ckpt", required=True, help="checkpoint")
evl.add_argument("--split", choices=list(Splits.values()), default=Splits.ALL, help="category split")
evl.add_argument("--subset", choices=[*Subsets.values(), "all"], default=Subsets.VAL, help="image subset")
evl.add_argument("--report", default=REPORT, help="report JSON path")
evl.add_argument("--gt-as-prediction", action="store_true", help="use GT masks as predictions (sanity check)")
evl.set_defaults(func=cmd_eval)

viz = subparsers.add_parser("viz", help="boundary/affinity heatmaps of one image")
viz.add_argument("--data", required=True, help="dataset directory")
viz.add_argument("--ckpt", required=True, help="checkpoint")
viz.add_argument("--image-id", type=int, required=True, help="image id")
viz.add_argument("--out", required=True, help="output directory")
viz.set_defaults(func=cmd_viz)

grd = subparsers.add_parser("gradcheck", help="finite-difference gradient checks of every loss pathway")
grd.add_argument("--seed", type=int, default=0, help="seed")
grd.add_argument("--entries", type=int, default=200, help="entries perturbed per pathway")
grd.add_argument("--out", help="directory for run.json")
grd.set_defaults(func=cmd_gradcheck)

abl = subparsers.add_parser("ablate", help="module ablation on the novel categories")
abl.add_argument("--data", required=True, help="dataset directory")
abl.add_argument("--out", required=True, help="output directory")
abl.add_argument("--seeds", type=int, default=3, help="seeds per variant")
abl.add_argument("--config", help="key = value config file")
abl.add_argument("--iters", type=int, help="iterations per run (overrides the config)")
abl.add_argument("--extended", action="store_true", help="add the w/o FF and w/o AL variants")
abl.add_argument("--base-counts", type=count_list, help="comma separated numbers of mask-supervised base categories, compares baseline and full model")
abl.set_defaults(func=cmd_ablate)


def run(args: Dict[str, Any], stdout: TextIO = sys.stdout, stderr: TextIO = sys.stderr) -> int:
    """
    Dispatch parsed arguments
    :return: exit code, 0 on success, 1 on a cpmask error or failed check
    """
    logging.basicConfig(level=logging.DEBUG if args.get("verbose") else logging.INFO, format="%(asctime)s %(levelname)s %(name)s: %(message)s", stream=stderr)
    try:
        configure_threads()
        return args["func"](args, stdout)
    except CPMaskException as e:
        stderr.write(f"error: {e}\n")
        return 1


def main(args: List[str] = None) -> None:
    args = sys.argv[1:] if args is None else args
    arguments = vars(parser.parse_args(args=args or ["--help"]))
    sys.exit(run(arguments))


if __name__ == "__main__":
    main()
