"""Named experiment drivers and their shipped default configurations.

Each experiment generates its datasets and embedding table from seeds in the
config, trains every applicable method over every seed, evaluates reward
accuracy per (task, split), and assembles a deterministic report: rerunning
the same config hash reproduces the CSV byte for byte. Distinct (method,
seed) runs share no mutable state, so they can execute in parallel worker
processes.
"""

from __future__ import annotations

import csv
import json
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from . import worlds
from .datastore import PreferenceDataset, config_hash, mask_rationales
from .embeddings import EmbeddingTable, load_table
from .harness import TrainConfig, reward_accuracy, train
from .objectives import LossWeights

EXPERIMENTS = (
    "confusion_2task",
    "confusion_4task",
    "transfer",
    "ablation",
    "sparse",
    "diversity",
    "scaling",
)

CONFOUND_METHODS = ("bt", "bt_multi", "rfp", "ec", "ic")


class ExperimentError(ValueError):
    """Raised for unknown experiment names or invalid configurations."""


@dataclass(frozen=True)
class ExperimentConfig:
    """Flat, JSON-serializable settings shared by all experiment drivers.

    Fields irrelevant to a given experiment are ignored by its driver; the
    config hash always covers the full resolved config.
    """

    experiment: str = ""
    seeds: tuple[int, ...] = (0, 1, 2)
    methods: tuple[str, ...] = ()      # empty = driver default
    # data
    pairs_per_task: int = 1000
    val_pairs_per_task: int = 150
    world_seed: int = 0
    ambiguous_frac: float = 0.13
    # embeddings; a nonempty embedding_file replaces the synthetic builder
    # (the file must cover every task and rationale string of the experiment)
    embedding_file: str = ""
    embed_dim: int = 64
    embed_seed: int = 0
    concept_mix: float = 0.35
    residual_mix: float = 1.5
    component_coherence: float = 0.8
    # optimization
    epochs: int = 150
    batch_size: int = 64
    learning_rate: float = 1e-3
    hidden: tuple[int, ...] = (64, 64)
    weights: LossWeights = field(default_factory=LossWeights)
    # sparse grid
    keep_fractions: tuple[float, ...] = (0.25, 0.5, 1.0)
    mask_seed: int = 13
    # scaling grid
    sizes: tuple[int, ...] = (200, 500, 1000, 2000)
    # transfer suite
    transfer_pairs: int = 2000
    transfer_val_pairs: int = 300
    transfer_step_noise: float = 0.07
    transfer_epochs: int = 120

    def to_dict(self) -> dict:
        d = asdict(self)
        for key in ("seeds", "methods", "hidden", "keep_fractions", "sizes"):
            d[key] = list(d[key])
        return d

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        known = {f.name for f in cls.__dataclass_fields__.values()}
        unknown = set(raw) - known
        if unknown:
            raise ExperimentError(f"unknown config keys: {sorted(unknown)}")
        kw = dict(raw)
        for key in ("seeds", "methods", "hidden", "keep_fractions", "sizes"):
            if key in kw:
                kw[key] = tuple(kw[key])
        if "weights" in kw and isinstance(kw["weights"], dict):
            kw["weights"] = LossWeights(**kw["weights"])
        return cls(**kw)

    def hash(self) -> str:
        return config_hash(self.to_dict())


@dataclass
class RunRow:
    experiment: str
    method: str
    task: str
    split: str
    seed: int
    accuracy: float


@dataclass
class EvalReport:
    """Per-run accuracy rows plus mean/std aggregates and loss histories."""

    experiment: str
    config_hash: str
    rows: list[RunRow]
    histories: dict[str, list[float]]
    wall_time_s: float = 0.0

    def aggregates(self) -> list[dict]:
        groups: dict[tuple, list[float]] = {}
        for r in self.rows:
            groups.setdefault((r.method, r.task, r.split), []).append(r.accuracy)
        out = []
        for (method, task, split), accs in sorted(groups.items()):
            out.append({
                "method": method,
                "task": task,
                "split": split,
                "mean": float(np.mean(accs)),
                "std": float(np.std(accs)),
                "n_seeds": len(accs),
            })
        return out

    def mean_accuracy(self, method: str, split: str, task: str | None = None) -> float:
        accs = [
            r.accuracy
            for r in self.rows
            if r.method == method and r.split == split and (task is None or r.task == task)
        ]
        if not accs:
            raise ExperimentError(f"no rows for method={method!r} split={split!r} task={task!r}")
        return float(np.mean(accs))

    def write_csv(self, path: str) -> None:
        rows = sorted(self.rows, key=lambda r: (r.method, r.task, r.split, r.seed))
        with open(path, "w", newline="", encoding="utf-8") as f:
            w = csv.writer(f)
            w.writerow(["experiment", "method", "task", "split", "seed", "accuracy"])
            for r in rows:
                w.writerow([r.experiment, r.method, r.task, r.split, r.seed, repr(r.accuracy)])

    def write_summary(self, path: str) -> None:
        payload = {
            "experiment": self.experiment,
            "config_hash": self.config_hash,
            "aggregates": self.aggregates(),
        }
        with open(path, "w", encoding="utf-8") as f:
            json.dump(payload, f, indent=2, sort_keys=True)
            f.write("\n")

    def write_artifacts(self, out_dir: str) -> None:
        """CSV rows, JSON summary, and one loss-history CSV per run."""
        os.makedirs(out_dir, exist_ok=True)
        self.write_csv(os.path.join(out_dir, "rows.csv"))
        self.write_summary(os.path.join(out_dir, "summary.json"))
        runs_dir = os.path.join(out_dir, "runs")
        os.makedirs(runs_dir, exist_ok=True)
        for key in sorted(self.histories):
            path = os.path.join(runs_dir, f"{key}_history.csv")
            with open(path, "w", newline="", encoding="utf-8") as f:
                w = csv.writer(f)
                w.writerow(["epoch", "loss"])
                for i, loss in enumerate(self.histories[key]):
                    w.writerow([i, repr(loss)])


# -- execution machinery ------------------------------------------------------


@dataclass
class _Unit:
    """One training run plus its evaluations; self-contained and picklable."""

    index: int
    label: str
    method: str
    seed: int
    train_records: list
    eval_sets: list  # (task, split, records)
    table: EmbeddingTable
    train_cfg: TrainConfig


def _execute_unit(unit: _Unit):
    params, history = train(unit.method, unit.train_records, unit.train_cfg, unit.table)
    rows = []
    for task, split, records in unit.eval_sets:
        acc = reward_accuracy(params, records, unit.table)
        rows.append((unit.label, task, split, unit.seed, acc))
    return unit.index, unit.label, unit.seed, rows, history


def _run_units(units: list[_Unit], experiment: str, jobs: int = 1):
    results = []
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_execute_unit, units))
    else:
        results = [_execute_unit(u) for u in units]
    results.sort(key=lambda r: r[0])
    rows, histories = [], {}
    for _, label, seed, unit_rows, history in results:
        histories[f"{label}_seed{seed}"] = history
        for lab, task, split, s, acc in unit_rows:
            rows.append(RunRow(experiment, lab, task, split, s, acc))
    return rows, histories


def _train_cfg(cfg: ExperimentConfig, method: str, seed: int, weights: LossWeights | None = None,
               epochs: int | None = None) -> TrainConfig:
    return TrainConfig(
        method=method,
        weights=weights if weights is not None else cfg.weights,
        learning_rate=cfg.learning_rate,
        batch_size=cfg.batch_size,
        epochs=epochs if epochs is not None else cfg.epochs,
        seed=seed,
        hidden=cfg.hidden,
        embed_dim=cfg.embed_dim,
    )


# -- confound-world helpers ---------------------------------------------------


def _confound_setup(cfg: ExperimentConfig, n_tasks: int, diversity: bool = False):
    if diversity:
        world = worlds.diversity_confound_config(
            n_tasks=n_tasks, seed=cfg.world_seed, ambiguous_frac=cfg.ambiguous_frac
        )
    else:
        world = worlds.default_confound_config(
            n_tasks=n_tasks, seed=cfg.world_seed, ambiguous_frac=cfg.ambiguous_frac
        )
    if cfg.embedding_file:
        table = load_table(cfg.embedding_file)
    else:
        table = worlds.confound_embedding_table(
            world, dim=cfg.embed_dim, master_seed=cfg.embed_seed, concept_mix=cfg.concept_mix
        )
    return world, table


def _confound_eval_sets(world, splits) -> list:
    sets = []
    for split in (worlds.SPLIT_VAL_ID, worlds.SPLIT_VAL_OOD):
        for task in world.tasks:
            records = [p for p in splits[split] if p.task == task.task_string]
            sets.append((task.task_string, split, records))
    return sets


def _confound_units(cfg, world, table, splits, method_grid, seeds, epochs=None):
    """method_grid: list of (label, variant, weights, train_records)."""
    eval_sets = _confound_eval_sets(world, splits)
    units = []
    for label, variant, weights, records in method_grid:
        for seed in seeds:
            if variant == "bt":
                # one encoder per task, evaluated on that task only
                for task in world.tasks:
                    t = task.task_string
                    units.append(_Unit(
                        index=len(units), label=label, method="bt", seed=seed,
                        train_records=[p for p in records if p.task == t],
                        eval_sets=[e for e in eval_sets if e[0] == t],
                        table=table,
                        train_cfg=_train_cfg(cfg, "bt", seed, weights, epochs),
                    ))
            else:
                units.append(_Unit(
                    index=len(units), label=label, method=variant, seed=seed,
                    train_records=records, eval_sets=eval_sets, table=table,
                    train_cfg=_train_cfg(cfg, variant, seed, weights, epochs),
                ))
    return units


# -- drivers ------------------------------------------------------------------


def _drive_confusion(cfg: ExperimentConfig, seeds, jobs: int, n_tasks: int):
    world, table = _confound_setup(cfg, n_tasks)
    splits = worlds.gen_confound_splits(world, cfg.pairs_per_task, cfg.val_pairs_per_task)
    methods = cfg.methods or CONFOUND_METHODS
    grid = [(m, m, None, splits[worlds.SPLIT_TRAIN]) for m in methods]
    units = _confound_units(cfg, world, table, splits, grid, seeds)
    return _run_units(units, cfg.experiment, jobs)


def _drive_ablation(cfg: ExperimentConfig, seeds, jobs: int):
    world, table = _confound_setup(cfg, n_tasks=2)
    splits = worlds.gen_confound_splits(world, cfg.pairs_per_task, cfg.val_pairs_per_task)
    w = cfg.weights
    grid = [
        ("ec", "ec", w, splits[worlds.SPLIT_TRAIN]),
        ("ec_no_consistency", "ec", replace(w, lambda_eq=0.0), splits[worlds.SPLIT_TRAIN]),
        (
            "ec_no_consistency_no_ratio",
            "ec",
            replace(w, lambda_eq=0.0, lambda_ratio=0.0),
            splits[worlds.SPLIT_TRAIN],
        ),
    ]
    if cfg.methods:
        grid = [g for g in grid if g[0] in cfg.methods]
    units = _confound_units(cfg, world, table, splits, grid, seeds)
    return _run_units(units, cfg.experiment, jobs)


def _drive_sparse(cfg: ExperimentConfig, seeds, jobs: int):
    world, table = _confound_setup(cfg, n_tasks=2)
    splits = worlds.gen_confound_splits(world, cfg.pairs_per_task, cfg.val_pairs_per_task)
    full = PreferenceDataset(records=splits[worlds.SPLIT_TRAIN], seed=world.seed)
    methods = cfg.methods or ("bt_multi", "ec", "ic")
    grid = []
    for m in methods:
        if m == "bt_multi":
            grid.append(("bt_multi", "bt_multi", None, full.records))
            continue
        for keep in cfg.keep_fractions:
            masked = mask_rationales(full, keep, seed=cfg.mask_seed)
            label = f"{m}_keep{int(round(keep * 100))}"
            grid.append((label, m, None, masked.records))
    units = _confound_units(cfg, world, table, splits, grid, seeds)
    return _run_units(units, cfg.experiment, jobs)


def _drive_diversity(cfg: ExperimentConfig, seeds, jobs: int):
    world_div, table = _confound_setup(cfg, n_tasks=2, diversity=True)
    # canonical-rationale runs reuse the same scenes and the same table (the
    # canonical string is one of the paraphrases)
    world_canon = worlds.default_confound_config(
        n_tasks=2, seed=cfg.world_seed, ambiguous_frac=cfg.ambiguous_frac
    )
    splits_div = worlds.gen_confound_splits(world_div, cfg.pairs_per_task, cfg.val_pairs_per_task)
    splits_canon = worlds.gen_confound_splits(world_canon, cfg.pairs_per_task, cfg.val_pairs_per_task)
    methods = cfg.methods or ("bt_multi", "ec", "ic")
    grid = []
    for m in methods:
        if m == "bt_multi":
            grid.append(("bt_multi", "bt_multi", None, splits_canon[worlds.SPLIT_TRAIN]))
            continue
        grid.append((f"{m}_canonical", m, None, splits_canon[worlds.SPLIT_TRAIN]))
        grid.append((f"{m}_diverse", m, None, splits_div[worlds.SPLIT_TRAIN]))
    units = _confound_units(cfg, world_div, table, splits_div, grid, seeds)
    return _run_units(units, cfg.experiment, jobs)


def _drive_scaling(cfg: ExperimentConfig, seeds, jobs: int):
    world, table = _confound_setup(cfg, n_tasks=2)
    methods = cfg.methods or ("bt_multi", "rfp", "ec", "ic")
    rows, histories = [], {}
    for n in cfg.sizes:
        splits = worlds.gen_confound_splits(world, n, cfg.val_pairs_per_task)
        grid = [(f"{m}_n{n}", m, None, splits[worlds.SPLIT_TRAIN]) for m in methods]
        units = _confound_units(cfg, world, table, splits, grid, seeds)
        r, h = _run_units(units, cfg.experiment, jobs)
        rows.extend(r)
        histories.update(h)
    return rows, histories


def _drive_transfer(cfg: ExperimentConfig, seeds, jobs: int):
    world = worlds.default_transfer_config(
        seed=cfg.world_seed, step_noise=cfg.transfer_step_noise
    )
    suite = worlds.build_transfer_suite(world, n_train=cfg.transfer_pairs, n_val=cfg.transfer_val_pairs)
    if cfg.embedding_file:
        table = load_table(cfg.embedding_file)
    else:
        table = worlds.featureworld_embedding_table(
            world,
            dim=cfg.embed_dim,
            master_seed=cfg.embed_seed,
            residual_mix=cfg.residual_mix,
            component_coherence=cfg.component_coherence,
        )
    train_records = [p for recs in suite.train.values() for p in recs]
    eval_sets = [
        (task, worlds.SPLIT_VAL_ID, recs) for task, recs in suite.val_id.items()
    ] + [(suite.heldout_task, worlds.SPLIT_VAL_OOD, suite.heldout_val)]
    methods = cfg.methods or ("bt_multi", "rfp", "ec", "ic")
    units = []
    for m in methods:
        for seed in seeds:
            units.append(_Unit(
                index=len(units), label=m, method=m, seed=seed,
                train_records=train_records, eval_sets=eval_sets, table=table,
                train_cfg=_train_cfg(cfg, m, seed, epochs=cfg.transfer_epochs),
            ))
    return _run_units(units, cfg.experiment, jobs)


def run_experiment(
    name: str,
    cfg: ExperimentConfig | None = None,
    seeds: tuple[int, ...] | None = None,
    jobs: int = 1,
    out_dir: str | None = None,
) -> EvalReport:
    """Run a named experiment end to end and return (optionally write) its report."""
    if name not in EXPERIMENTS:
        raise ExperimentError(f"unknown experiment {name!r}; valid names: {', '.join(EXPERIMENTS)}")
    cfg = replace(cfg or ExperimentConfig(), experiment=name)
    if seeds is not None:
        cfg = replace(cfg, seeds=tuple(seeds))
    started = time.time()
    if name == "confusion_2task":
        rows, histories = _drive_confusion(cfg, cfg.seeds, jobs, n_tasks=2)
    elif name == "confusion_4task":
        rows, histories = _drive_confusion(cfg, cfg.seeds, jobs, n_tasks=4)
    elif name == "ablation":
        rows, histories = _drive_ablation(cfg, cfg.seeds, jobs)
    elif name == "sparse":
        rows, histories = _drive_sparse(cfg, cfg.seeds, jobs)
    elif name == "diversity":
        rows, histories = _drive_diversity(cfg, cfg.seeds, jobs)
    elif name == "scaling":
        rows, histories = _drive_scaling(cfg, cfg.seeds, jobs)
    else:
        rows, histories = _drive_transfer(cfg, cfg.seeds, jobs)
    report = EvalReport(
        experiment=name,
        config_hash=cfg.hash(),
        rows=rows,
        histories=histories,
        wall_time_s=time.time() - started,
    )
    if out_dir is not None:
        report.write_artifacts(out_dir)
    return report
