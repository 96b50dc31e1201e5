"""Command-line entry point.

Subcommands: gen-data, embed-synth, train, eval, experiment, report. Every
command resolves its configuration (flags override config-file values, which
override defaults), writes its outputs under --out together with a manifest
holding the resolved config and its canonical hash, and never mutates its
input files. Exit codes: 0 success, 2 usage or config error, 3 numeric
failure during training.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import asdict
from datetime import datetime, timezone

from . import worlds
from .datastore import (
    DatastoreError,
    PreferenceDataset,
    config_hash,
    read_dataset,
    write_dataset,
)
from .embeddings import EmbeddingError, SemanticGroupSpec, build_table, load_table, save_table
from .encoder import EncoderError, load_checkpoint, save_checkpoint
from .experiments import EXPERIMENTS, ExperimentConfig, ExperimentError, run_experiment
from .geometry import GeometryError
from .harness import HarnessError, TrainConfig, TrainingDivergence, reward_accuracy, train
from .objectives import LossWeights, ObjectiveError
from .worlds import WorldError

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_NUMERIC = 3

_CONFIG_ERRORS = (
    DatastoreError,
    EmbeddingError,
    EncoderError,
    ExperimentError,
    GeometryError,
    HarnessError,
    ObjectiveError,
    WorldError,
    ValueError,
    OSError,
)


class CliError(ValueError):
    pass


def _load_json(path: str) -> dict:
    try:
        with open(path, encoding="utf-8") as f:
            return json.load(f)
    except OSError as e:
        raise CliError(f"cannot read {path}: {e}") from e
    except json.JSONDecodeError as e:
        raise CliError(f"{path} is not valid JSON: {e}") from e


def _write_manifest(out_dir: str, command: str, config: dict, config_path: str | None) -> None:
    manifest = {
        "command": command,
        "config_path": config_path,
        "config": config,
        "config_hash": config_hash(config),
        "out_dir": os.path.abspath(out_dir),
        "timestamp": datetime.now(timezone.utc).isoformat(),
    }
    with open(os.path.join(out_dir, "manifest.json"), "w", encoding="utf-8") as f:
        json.dump(manifest, f, indent=2, sort_keys=True)
        f.write("\n")


def _slug(s: str) -> str:
    return "".join(c if c.isalnum() else "_" for c in s)[:40].strip("_")


# -- gen-data -----------------------------------------------------------------

_GEN_DEFAULTS = {
    "world": "confound",
    "n_tasks": 2,
    "seed": 0,
    "ambiguous_frac": 0.13,
    "diversity": False,
    "n_train_per_task": 1000,
    "n_val_ood_per_task": 150,
    "n_val_id_per_task": 0,
    # feature-world fields
    "transfer_pairs": 2000,
    "transfer_val_pairs": 300,
    "step_noise": 0.07,
}


def cmd_gen_data(args) -> int:
    config = dict(_GEN_DEFAULTS)
    config_path = args.config
    if config_path:
        config.update(_load_json(config_path))
    if args.seed is not None:
        config["seed"] = args.seed
    unknown = set(config) - set(_GEN_DEFAULTS)
    if unknown:
        raise CliError(f"unknown gen-data config keys: {sorted(unknown)}")
    if not isinstance(config["seed"], int):
        raise CliError(f"seed must be an integer, got {config['seed']!r}")
    os.makedirs(args.out, exist_ok=True)
    world_hash = config_hash(config)

    if config["world"] == "confound":
        make = worlds.diversity_confound_config if config["diversity"] else worlds.default_confound_config
        world = make(
            n_tasks=config["n_tasks"],
            seed=config["seed"],
            ambiguous_frac=config["ambiguous_frac"],
        )
        jobs = [("train", config["n_train_per_task"], False, worlds.SPLIT_TRAIN),
                ("val_id", config["n_val_id_per_task"], False, worlds.SPLIT_VAL_ID),
                ("val_ood", config["n_val_ood_per_task"], True, worlds.SPLIT_VAL_OOD)]
        written = []
        for name, count, swapped, split in jobs:
            if count < 1:
                continue
            salt = worlds._PAIR_SALT if split == worlds.SPLIT_TRAIN else worlds._VAL_SALT
            pairs = worlds.gen_confound_pairs(world, count, swapped=swapped, split=split, seed_salt=salt)
            for task in world.tasks:
                records = [p for p in pairs if p.task == task.task_string]
                ds = PreferenceDataset(records=records, world_hash=world_hash, seed=config["seed"])
                path = os.path.join(args.out, f"{name}_{_slug(task.task_string)}.jsonl")
                write_dataset(ds, path)
                written.append(path)
    elif config["world"] == "feature":
        world = worlds.default_transfer_config(seed=config["seed"], step_noise=config["step_noise"])
        suite = worlds.build_transfer_suite(
            world, n_train=config["transfer_pairs"], n_val=config["transfer_val_pairs"]
        )
        written = []
        for task, records in suite.train.items():
            path = os.path.join(args.out, f"train_{_slug(task)}.jsonl")
            write_dataset(PreferenceDataset(records, world_hash, config["seed"]), path)
            written.append(path)
        for task, records in suite.val_id.items():
            path = os.path.join(args.out, f"val_id_{_slug(task)}.jsonl")
            write_dataset(PreferenceDataset(records, world_hash, config["seed"]), path)
            written.append(path)
        path = os.path.join(args.out, f"val_heldout_{_slug(suite.heldout_task)}.jsonl")
        write_dataset(PreferenceDataset(suite.heldout_val, world_hash, config["seed"]), path)
        written.append(path)
    else:
        raise CliError(f"unknown world kind {config['world']!r}")

    _write_manifest(args.out, "gen-data", config, config_path)
    print(f"wrote {len(written)} dataset files to {args.out}")
    return EXIT_OK


# -- embed-synth ----------------------------------------------------------------


def cmd_embed_synth(args) -> int:
    try:
        with open(args.strings, encoding="utf-8") as f:
            strings = [line.rstrip("\n") for line in f if line.strip()]
    except OSError as e:
        raise CliError(f"cannot read strings file: {e}") from e
    if not strings:
        raise CliError("strings file is empty")
    if len(set(strings)) != len(strings):
        dupes = sorted({s for s in strings if strings.count(s) > 1})
        raise CliError(f"duplicate strings: {dupes}")
    groups = []
    if args.groups:
        raw = _load_json(args.groups)
        for g in raw.get("groups", []):
            groups.append(SemanticGroupSpec(
                group_id=g["group_id"],
                centroid_seed=g.get("centroid_seed", args.seed),
                member_strings=g["member_strings"],
                perturbation_scale=g.get("perturbation_scale", 0.25),
            ))
    table = build_table(strings, dim=args.dim, master_seed=args.seed, groups=groups)
    save_table(table, args.out)
    print(f"wrote {len(table)} embeddings (dim {table.dim}) to {args.out}")
    return EXIT_OK


# -- train / eval ---------------------------------------------------------------


def _train_config_from(args) -> TrainConfig:
    config = {}
    if args.config:
        config = _load_json(args.config)
    weights = LossWeights(**config.pop("weights", {}))
    known = {
        "method", "learning_rate", "batch_size", "epochs", "seed",
        "hidden", "embed_dim", "discount",
    }
    unknown = set(config) - known
    if unknown:
        raise CliError(f"unknown train config keys: {sorted(unknown)}")
    if "hidden" in config:
        config["hidden"] = tuple(config["hidden"])
    if args.method:
        config["method"] = args.method
    if args.seed is not None:
        config["seed"] = args.seed
    if args.epochs is not None:
        config["epochs"] = args.epochs
    return TrainConfig(weights=weights, **config)


def cmd_train(args) -> int:
    cfg = _train_config_from(args)
    dataset = read_dataset(args.data)
    table = load_table(args.embeddings)
    os.makedirs(args.out, exist_ok=True)
    params, history = train(cfg.method, dataset, cfg, table)
    save_checkpoint(params, os.path.join(args.out, "checkpoint.json"))
    accuracy = reward_accuracy(params, dataset, table)
    with open(os.path.join(args.out, "history.csv"), "w", encoding="utf-8") as f:
        f.write("epoch,loss\n")
        for i, loss in enumerate(history):
            f.write(f"{i},{loss!r}\n")
    metrics = {"train_accuracy": accuracy, "final_loss": history[-1], "epochs": len(history)}
    with open(os.path.join(args.out, "metrics.json"), "w", encoding="utf-8") as f:
        json.dump(metrics, f, indent=2, sort_keys=True)
        f.write("\n")
    resolved = asdict(cfg)
    resolved["hidden"] = list(resolved["hidden"])
    _write_manifest(args.out, "train", resolved, args.config)
    print(f"trained {cfg.method}: final loss {history[-1]:.6f}, train accuracy {accuracy!r}")
    return EXIT_OK


def cmd_eval(args) -> int:
    params = load_checkpoint(args.checkpoint)
    dataset = read_dataset(args.data)
    table = load_table(args.embeddings)
    accuracy = reward_accuracy(params, dataset, table)
    result = {"data": os.path.abspath(args.data), "n_pairs": len(dataset), "accuracy": accuracy}
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        with open(os.path.join(args.out, "eval.json"), "w", encoding="utf-8") as f:
            json.dump(result, f, indent=2, sort_keys=True)
            f.write("\n")
        _write_manifest(args.out, "eval", {"checkpoint": os.path.abspath(args.checkpoint),
                                           "data": os.path.abspath(args.data),
                                           "embeddings": os.path.abspath(args.embeddings)}, None)
    print(f"reward accuracy: {accuracy!r} on {len(dataset)} pairs")
    return EXIT_OK


# -- experiment / report ----------------------------------------------------------


def cmd_experiment(args) -> int:
    cfg = ExperimentConfig()
    if args.config:
        cfg = ExperimentConfig.from_dict(_load_json(args.config))
    seeds = (args.seed,) if args.seed is not None else None
    report = run_experiment(args.name, cfg, seeds=seeds, jobs=args.jobs, out_dir=args.out)
    if args.out:
        resolved = cfg.to_dict()
        resolved["experiment"] = args.name
        if seeds is not None:
            resolved["seeds"] = list(seeds)
        _write_manifest(args.out, f"experiment {args.name}", resolved, args.config)
    for agg in report.aggregates():
        print(
            f"{agg['method']:32s} {agg['task'][:34]:36s} {agg['split']:8s} "
            f"{agg['mean']:.3f} +/- {agg['std']:.3f}"
        )
    return EXIT_OK


def cmd_report(args) -> int:
    rows_path = os.path.join(args.run, "rows.csv")
    if not os.path.exists(rows_path):
        raise CliError(f"no rows.csv under {args.run}")
    import csv as _csv

    groups: dict[tuple, list[float]] = {}
    with open(rows_path, encoding="utf-8") as f:
        for row in _csv.DictReader(f):
            key = (row["method"], row["task"], row["split"])
            groups.setdefault(key, []).append(float(row["accuracy"]))
    import numpy as np

    print(f"{'method':32s} {'task':36s} {'split':8s} {'mean':>6s} {'std':>6s} {'n':>3s}")
    for (method, task, split), accs in sorted(groups.items()):
        print(
            f"{method:32s} {task[:34]:36s} {split:8s} "
            f"{np.mean(accs):6.3f} {np.std(accs):6.3f} {len(accs):3d}"
        )
    return EXIT_OK


# -- parser ---------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="reasonpref",
        description="Preference-based reward learning with rationale projection axes.",
    )
    sub = parser.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("gen-data", help="generate preference datasets from a world config")
    p.add_argument("--config", help="world config JSON")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, help="override the config seed")
    p.set_defaults(fn=cmd_gen_data)

    p = sub.add_parser("embed-synth", help="write a synthetic embedding file for a string list")
    p.add_argument("--strings", required=True, help="text file, one string per line")
    p.add_argument("--dim", type=int, default=64)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--groups", help="JSON file of semantic group specs")
    p.add_argument("--out", required=True, help="output embedding file")
    p.set_defaults(fn=cmd_embed_synth)

    p = sub.add_parser("train", help="train one reward model on a dataset file")
    p.add_argument("--data", required=True, help="dataset JSONL")
    p.add_argument("--embeddings", required=True, help="embedding file")
    p.add_argument("--method", choices=["bt", "bt_multi", "rfp", "ec", "ic"])
    p.add_argument("--config", help="train config JSON")
    p.add_argument("--seed", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("eval", help="reward accuracy of a checkpoint on a dataset file")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--embeddings", required=True)
    p.add_argument("--out")
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("experiment", help="run a named experiment end to end")
    p.add_argument("name", choices=list(EXPERIMENTS))
    p.add_argument("--config", help="experiment config JSON")
    p.add_argument("--out", help="artifact directory")
    p.add_argument("--seed", type=int, help="run a single seed instead of the config seeds")
    p.add_argument("--jobs", type=int, default=1, help="parallel training runs")
    p.set_defaults(fn=cmd_experiment)

    p = sub.add_parser("report", help="re-render the aggregate table of a finished run")
    p.add_argument("--run", required=True, help="experiment output directory")
    p.set_defaults(fn=cmd_report)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except TrainingDivergence as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    except (CliError, *_CONFIG_ERRORS) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
