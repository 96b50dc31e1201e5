"""Synthetic preference-data generators.

Two parametric worlds stand in for physics benchmarks:

* ConfoundWorld: tabletop scenes with two cubes where object size decides the
  preference label but object color is perfectly correlated with size during
  training (with the correlation direction differing per task). An OOD
  transform swaps the colors, exposing any model that latched onto color.

* FeatureWorld: tasks whose ground-truth reward is a weighted sum of named
  progress components. Trajectory pools mix optimality levels; labels come
  from the true weighted totals, and each pair's rationale is sampled from a
  softmax over per-component advantages. Four tasks with compositional
  weights form a transfer suite with one held-out task.

Trajectories are synthesized directly as feature curves: the preference and
rationale semantics the learner consumes are preserved without a simulator.
Every generator draws from per-pair seed substreams, so a config plus master
seed reproduces byte-identical data in any execution order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .embeddings import EmbeddingTable, SemanticGroupSpec, blend, group_embed, synthetic_embed
from .encoder import TrajectorySegment
from .geometry import softmax

SPLIT_TRAIN = "train"
SPLIT_VAL_ID = "val_id"
SPLIT_VAL_OOD = "val_ood"

_PAIR_SALT = 101
_VAL_SALT = 202
_CAND_SALT = 303


class WorldError(ValueError):
    """Raised for invalid world configurations or unknown tasks."""


@dataclass
class LabeledPair:
    """Two same-task segments, a preference label, and an optional rationale."""

    seg_a: TrajectorySegment
    seg_b: TrajectorySegment
    y: int
    task: str
    reason: str | None = None
    split: str = SPLIT_TRAIN

    def __post_init__(self):
        if self.seg_a.horizon != self.seg_b.horizon:
            raise WorldError("paired segments must share a horizon")
        if self.seg_a.step_dim != self.seg_b.step_dim:
            raise WorldError("paired segments must share a feature dimension")
        if self.y not in (0, 1):
            raise WorldError(f"label must be 0 or 1, got {self.y}")


# =============================================================================
# ConfoundWorld: causal size vs. spurious color
# =============================================================================

RED, BLUE = "red", "blue"

# Per-step feature layout: two object slots of [red block, blue block, size,
# x, y], then gripper (x, y), then gripper-to-slot distances, then nuisance
# dims. Color is a multi-dim appearance block rather than a single indicator,
# the way a color fills many input channels of a visual observation; its
# input-space footprint is what makes it an attractive shortcut.
_COLOR_BLOCK = 3
_SIZE_OFF = 2 * _COLOR_BLOCK
_POS_OFF = _SIZE_OFF + 1
_SLOT_WIDTH = _POS_OFF + 2
_GRIPPER_OFF = 2 * _SLOT_WIDTH
_DIST_OFF = _GRIPPER_OFF + 2
_CONFOUND_BASE_DIM = _DIST_OFF + 2

# column indices per slot, for feature inspection
SIZE_COLUMNS = (_SIZE_OFF, _SLOT_WIDTH + _SIZE_OFF)
RED_COLUMNS = (0, _SLOT_WIDTH)
DIST_COLUMNS = (_DIST_OFF, _DIST_OFF + 1)
SLOT_FEATURE_SLICES = (slice(0, _SLOT_WIDTH), slice(_SLOT_WIDTH, 2 * _SLOT_WIDTH))


@dataclass
class ConfoundTask:
    task_string: str
    verb_id: int
    larger_color: str

    def __post_init__(self):
        if self.larger_color not in (RED, BLUE):
            raise WorldError(f"larger_color must be 'red' or 'blue', got {self.larger_color!r}")


@dataclass
class ConfoundWorldConfig:
    tasks: list[ConfoundTask]
    horizon: int = 4
    nuisance_dim: int = 8
    noise_scale: float = 0.1
    # Fraction of trajectories whose approach barely progresses, mimicking
    # segment windows cut before the manipulation; such segments carry weak
    # evidence, which keeps model confidence (and overfitting) honest.
    ambiguous_frac: float = 0.13
    seed: int = 0
    rationale: str = "the cube is larger"
    # Diversity mode: per-task paraphrase lists replacing the canonical
    # rationale, sampled uniformly per pair.
    paraphrases: dict[str, list[str]] | None = None

    def __post_init__(self):
        names = [t.task_string for t in self.tasks]
        if len(set(names)) != len(names):
            raise WorldError("task strings must be distinct")
        if self.horizon < 1:
            raise WorldError(f"horizon must be >= 1, got {self.horizon}")
        if self.nuisance_dim < 0:
            raise WorldError("nuisance_dim must be nonnegative")

    @property
    def step_dim(self) -> int:
        return _CONFOUND_BASE_DIM + self.nuisance_dim

    def task(self, task_string: str) -> ConfoundTask:
        for t in self.tasks:
            if t.task_string == task_string:
                return t
        raise WorldError(f"unknown task {task_string!r}")

    def reason_strings(self, task_string: str) -> list[str]:
        if self.paraphrases is not None:
            return self.paraphrases[task_string]
        return [self.rationale]


# Approach-speed profiles per manipulation verb: fraction of the remaining
# gripper-to-target distance kept after each step.
_VERB_DECAY = (0.40, 0.50, 0.45, 0.48)


def gen_confound_trajectory(
    cfg: ConfoundWorldConfig,
    task_string: str,
    target: str,
    swapped: bool,
    rng: np.random.Generator,
) -> TrajectorySegment:
    """One approach trajectory toward the larger or the smaller cube.

    Slot order is randomized per trajectory; the targeted object's distance
    feature strictly decreases over the segment. ``swapped`` inverts the
    color-size assignment while leaving sizes, motion, and the target
    untouched.
    """
    task = cfg.task(task_string)
    if target not in ("larger", "smaller"):
        raise WorldError(f"target must be 'larger' or 'smaller', got {target!r}")

    # Sizes are relative within a scene; across scenes the ranges overlap, so
    # only the within-scene comparison carries the preference signal, and the
    # gap distribution reaches down to near-ambiguous comparisons.
    size_small = rng.uniform(0.1, 0.5)
    size_large = size_small + rng.uniform(0.02, 0.35)
    pos_large = rng.uniform(-1.0, 1.0, size=2)
    pos_small = rng.uniform(-1.0, 1.0, size=2)
    larger_slot = int(rng.integers(2))

    larger_is_red = (task.larger_color == RED) != swapped
    slot_size = [0.0, 0.0]
    slot_pos = [None, None]
    slot_red = [0.0, 0.0]
    slot_size[larger_slot] = size_large
    slot_size[1 - larger_slot] = size_small
    slot_pos[larger_slot] = pos_large
    slot_pos[1 - larger_slot] = pos_small
    slot_red[larger_slot] = 1.0 if larger_is_red else 0.0
    slot_red[1 - larger_slot] = 0.0 if larger_is_red else 1.0

    target_pos = pos_large if target == "larger" else pos_small

    # Gripper starts at a random bearing and closes in on the target with a
    # verb-specific decay; jitter is clipped to keep the approach monotone.
    d0 = rng.uniform(0.5, 2.0)
    angle = rng.uniform(0.0, 2.0 * np.pi)
    start_dir = np.array([np.cos(angle), np.sin(angle)])
    perp_dir = np.array([-start_dir[1], start_dir[0]])
    decay = _VERB_DECAY[task.verb_id % len(_VERB_DECAY)]
    if rng.random() < cfg.ambiguous_frac:
        decay = rng.uniform(0.85, 0.95)

    steps = np.zeros((cfg.horizon, cfg.step_dim))
    rem = 1.0
    for t in range(cfg.horizon):
        if t > 0:
            rem = min(rem * decay * (1.0 + 0.15 * rng.uniform(-1.0, 1.0)), 0.95 * rem)
        lateral = 0.1 * rem * d0 * rng.uniform(-1.0, 1.0)
        gripper = target_pos + start_dir * (rem * d0) + perp_dir * lateral
        row = steps[t]
        for s in range(2):
            base = s * _SLOT_WIDTH
            row[base : base + _COLOR_BLOCK] = slot_red[s]
            row[base + _COLOR_BLOCK : base + 2 * _COLOR_BLOCK] = 1.0 - slot_red[s]
            row[base + _SIZE_OFF] = slot_size[s]
            row[base + _POS_OFF : base + _POS_OFF + 2] = slot_pos[s]
        row[_GRIPPER_OFF : _GRIPPER_OFF + 2] = gripper
        row[_DIST_OFF] = np.linalg.norm(gripper - slot_pos[0])
        row[_DIST_OFF + 1] = np.linalg.norm(gripper - slot_pos[1])
        if cfg.nuisance_dim:
            row[_CONFOUND_BASE_DIM:] = rng.normal(0.0, cfg.noise_scale, size=cfg.nuisance_dim)
    return TrajectorySegment(steps=steps, source_task=task_string)


def _pair_rng(seed: int, salt: int, task_idx: int, pair_idx: int) -> np.random.Generator:
    # The swap flag is deliberately not part of the stream: swapped pairs
    # replay the same scenes with only the colors exchanged.
    ss = np.random.SeedSequence(entropy=(seed, salt, task_idx, pair_idx))
    return np.random.default_rng(ss)


def gen_confound_pairs(
    cfg: ConfoundWorldConfig,
    n_per_task: int,
    swapped: bool,
    split: str | None = None,
    seed_salt: int = _PAIR_SALT,
) -> list[LabeledPair]:
    """Preference pairs coupling a larger-target and a smaller-target segment.

    The label marks whichever side handled the larger cube; sides are ordered
    at random per pair. ``swapped=True`` produces the color-swapped OOD split.
    """
    if n_per_task < 1:
        raise WorldError("n_per_task must be >= 1")
    if split is None:
        split = SPLIT_VAL_OOD if swapped else SPLIT_TRAIN
    pairs = []
    for task_idx, task in enumerate(cfg.tasks):
        reasons = cfg.reason_strings(task.task_string)
        for i in range(n_per_task):
            rng = _pair_rng(cfg.seed, seed_salt, task_idx, i)
            seg_larger = gen_confound_trajectory(cfg, task.task_string, "larger", swapped, rng)
            seg_smaller = gen_confound_trajectory(cfg, task.task_string, "smaller", swapped, rng)
            reason = reasons[int(rng.integers(len(reasons)))]
            if rng.random() < 0.5:
                pairs.append(LabeledPair(seg_larger, seg_smaller, 1, task.task_string, reason, split))
            else:
                pairs.append(LabeledPair(seg_smaller, seg_larger, 0, task.task_string, reason, split))
    return pairs


def gen_confound_splits(
    cfg: ConfoundWorldConfig, n_train_per_task: int, n_val_per_task: int
) -> dict[str, list[LabeledPair]]:
    """Train, in-distribution validation, and color-swapped validation pairs."""
    return {
        SPLIT_TRAIN: gen_confound_pairs(cfg, n_train_per_task, swapped=False),
        SPLIT_VAL_ID: gen_confound_pairs(
            cfg, n_val_per_task, swapped=False, split=SPLIT_VAL_ID, seed_salt=_VAL_SALT
        ),
        SPLIT_VAL_OOD: gen_confound_pairs(
            cfg, n_val_per_task, swapped=True, split=SPLIT_VAL_OOD, seed_salt=_VAL_SALT
        ),
    }


@dataclass
class CandidateSet:
    """Candidate segments for greedy selection; exactly one is desirable."""

    segments: list[TrajectorySegment]
    desirable_index: int
    task: str


def gen_confound_candidate_sets(
    cfg: ConfoundWorldConfig, n_sets: int, k: int = 4, swapped: bool = False
) -> list[CandidateSet]:
    """Selection sets with one larger-target segment among smaller-target ones."""
    if k < 2:
        raise WorldError("candidate sets need at least 2 segments")
    sets = []
    for task_idx, task in enumerate(cfg.tasks):
        for i in range(n_sets):
            rng = _pair_rng(cfg.seed, _CAND_SALT, task_idx, i)
            segs = [gen_confound_trajectory(cfg, task.task_string, "smaller", swapped, rng) for _ in range(k)]
            good = int(rng.integers(k))
            segs[good] = gen_confound_trajectory(cfg, task.task_string, "larger", swapped, rng)
            sets.append(CandidateSet(segments=segs, desirable_index=good, task=task.task_string))
    return sets


def default_confound_config(n_tasks: int = 2, seed: int = 0, **overrides) -> ConfoundWorldConfig:
    """Shipped task set: size decides preference, per-task color confound."""
    catalog = [
        ConfoundTask("pick up larger cube to target sphere", 0, RED),
        ConfoundTask("place larger cube in target bin", 1, BLUE),
        ConfoundTask("push larger cube toward target line", 2, BLUE),
        ConfoundTask("pull larger cube toward green line", 3, RED),
    ]
    if not 1 <= n_tasks <= len(catalog):
        raise WorldError(f"n_tasks must be in [1, {len(catalog)}]")
    return ConfoundWorldConfig(tasks=catalog[:n_tasks], seed=seed, **overrides)


_PARAPHRASE_TEMPLATES = [
    # canonical + synonyms
    "the cube is larger",
    "cube is bigger",
    "object is larger",
    "the bigger cube",
    "it is the larger one",
    "the larger of the two cubes",
    "the larger object is correct",
    # specific descriptors
    "red cube is larger",
    "blue object is bigger",
    "the cube with the bigger size",
    # action phrasings and passive voice
    "targets the larger cube",
    "reaches for the larger cube",
    "larger cube is {verbed}",
    "the larger cube gets {verbed}",
    # negation / contrast
    "smaller cube is not {verbed}",
    "not the smaller cube",
]

_VERB_FORMS = {
    0: ("pick up", "picked"),
    1: ("place", "placed"),
    2: ("push", "pushed"),
    3: ("pull", "pulled"),
}


def confound_paraphrases(cfg: ConfoundWorldConfig) -> dict[str, list[str]]:
    """Sixteen rationale paraphrases per task: synonyms, descriptors,
    passives, and negations, with the task's own verb filled in."""
    out = {}
    for task in cfg.tasks:
        verb, verbed = _VERB_FORMS[task.verb_id % len(_VERB_FORMS)]
        out[task.task_string] = [
            t.format(verb=verb, verbed=verbed) for t in _PARAPHRASE_TEMPLATES
        ]
    return out


def diversity_confound_config(n_tasks: int = 2, seed: int = 0, **overrides) -> ConfoundWorldConfig:
    cfg = default_confound_config(n_tasks=n_tasks, seed=seed, **overrides)
    cfg.paraphrases = confound_paraphrases(cfg)
    return cfg


def confound_strings(cfg: ConfoundWorldConfig) -> list[str]:
    """Every task and rationale string the world can emit, tasks first."""
    out = [t.task_string for t in cfg.tasks]
    for t in cfg.tasks:
        for s in cfg.reason_strings(t.task_string):
            if s not in out:
                out.append(s)
    return out


def confound_embedding_table(
    cfg: ConfoundWorldConfig,
    dim: int = 64,
    master_seed: int = 0,
    concept_mix: float = 0.55,
    paraphrase_scale: float = 0.3,
) -> EmbeddingTable:
    """Synthetic embeddings with the cosine structure a sentence encoder
    would give these strings.

    All rationale phrasings cluster around one shared size-concept direction,
    and every task description mixes that concept with its own task-specific
    direction (the strings literally share the "larger cube" content). This
    keeps rationale/task alignments positive and consistent across tasks
    while leaving each task a distinct embedding.
    """
    concept = "concept: the larger cube is the right one to manipulate"
    group_members = []
    for t in cfg.tasks:
        for s in cfg.reason_strings(t.task_string):
            if s not in group_members:
                group_members.append(s)
    group = SemanticGroupSpec(
        group_id=concept,
        centroid_seed=master_seed,
        member_strings=group_members,
        perturbation_scale=paraphrase_scale,
    )
    centroid = group.centroid(dim)
    entries = {s: group_embed(group, s, dim) for s in group_members}
    for t in cfg.tasks:
        own = synthetic_embed(t.task_string, dim, master_seed)
        own = own - (own @ centroid) * centroid
        own /= np.linalg.norm(own)
        entries[t.task_string] = blend([(concept_mix, centroid), (1.0 - concept_mix, own)])
    return EmbeddingTable(dim=dim, entries=entries, provider_tag="synthetic", normalized=True)


# =============================================================================
# FeatureWorld: component-decomposed rewards with sampled rationales
# =============================================================================


@dataclass
class FeatureComponent:
    name: str
    rationale: str


@dataclass
class FeatureTask:
    task_string: str
    weights: np.ndarray

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        if self.weights.ndim != 1:
            raise WorldError("task weights must be a vector over components")
        if not np.any(self.weights != 0):
            raise WorldError(f"task {self.task_string!r} has an all-zero weight vector")


@dataclass
class FeatureWorldConfig:
    components: list[FeatureComponent]
    tasks: list[FeatureTask]
    horizon: int = 32
    nuisance_dim: int = 8
    optimality_levels: tuple[float, ...] = (0.0, 0.3, 0.6, 0.9)
    slope_noise: float = 0.25
    step_noise: float = 0.07
    # When positive, step features expose tanh(saturation * progress) instead
    # of raw progress: a bounded sensor reading. Totals then cannot be read
    # off linearly, which is what keeps the suite from being trivially
    # solvable by one shared linear map.
    sensor_saturation: float = 2.5
    seed: int = 0

    def __post_init__(self):
        names = [t.task_string for t in self.tasks]
        if len(set(names)) != len(names):
            raise WorldError("task strings must be distinct")
        J = len(self.components)
        for t in self.tasks:
            if t.weights.shape != (J,):
                raise WorldError(
                    f"task {t.task_string!r} has {t.weights.shape[0]} weights for {J} components"
                )
        if self.horizon < 1:
            raise WorldError("horizon must be >= 1")

    @property
    def step_dim(self) -> int:
        return len(self.components) + self.nuisance_dim

    def task(self, task_string: str) -> FeatureTask:
        for t in self.tasks:
            if t.task_string == task_string:
                return t
        raise WorldError(f"unknown task {task_string!r}")


def gen_featureworld_trajectory(
    cfg: FeatureWorldConfig,
    task_string: str,
    optimality_level: float,
    rng: np.random.Generator,
) -> tuple[TrajectorySegment, np.ndarray]:
    """A trajectory of noisy monotone progress curves plus its component totals.

    Components the task does not weight stay flat at noise level. The curve
    slope for active components scales with (1 - optimality_level), randomly
    perturbed per trajectory, so pools at different levels overlap.
    """
    task = cfg.task(task_string)
    J = len(cfg.components)
    active = task.weights != 0
    slopes = np.zeros(J)
    z = rng.normal(0.0, 1.0, size=J)
    slopes[active] = np.clip((1.0 - optimality_level) + cfg.slope_noise * z[active], 0.0, None)

    # Progress is a noisy walk with per-component drift; inactive components
    # stay at noise level.
    increments = slopes[None, :] / cfg.horizon
    if cfg.step_noise > 0:
        increments = increments + rng.normal(0.0, cfg.step_noise, size=(cfg.horizon, J))
    curves = np.cumsum(np.broadcast_to(increments, (cfg.horizon, J)), axis=0)
    steps = np.zeros((cfg.horizon, cfg.step_dim))
    if cfg.sensor_saturation > 0:
        steps[:, :J] = np.tanh(cfg.sensor_saturation * curves)
    else:
        steps[:, :J] = curves
    if cfg.nuisance_dim:
        steps[:, J:] = rng.normal(0.0, 1.0, size=(cfg.horizon, cfg.nuisance_dim))
    totals = curves.sum(axis=0)
    return TrajectorySegment(steps=steps, source_task=task_string), totals


def component_totals(cfg: FeatureWorldConfig, segment: TrajectorySegment) -> np.ndarray:
    """Recover per-component totals from a stored segment's feature columns.

    Only exact for worlds without sensor saturation; saturated readings are
    inverted through atanh first, which degrades near the saturation rails.
    """
    cols = segment.steps[:, : len(cfg.components)]
    if cfg.sensor_saturation > 0:
        cols = np.arctanh(np.clip(cols, -1 + 1e-12, 1 - 1e-12)) / cfg.sensor_saturation
    return cols.sum(axis=0)


def label_preference(
    totals_a: np.ndarray, totals_b: np.ndarray, w: np.ndarray, rng: np.random.Generator
) -> int:
    """1 when the first side's true weighted total is higher; fair coin on ties."""
    sa = float(np.dot(w, totals_a))
    sb = float(np.dot(w, totals_b))
    if sa > sb:
        return 1
    if sa < sb:
        return 0
    return int(rng.integers(2))


def sample_rationale(
    totals_pref: np.ndarray,
    totals_other: np.ndarray,
    w: np.ndarray,
    active_components: np.ndarray,
    rng: np.random.Generator,
    rationales: list[str],
) -> str:
    """Draw a rationale from the softmax over per-component advantages.

    Advantages must be computed preferred-minus-dispreferred, so callers pass
    the preferred side first.
    """
    active_idx = np.flatnonzero(active_components)
    if active_idx.size == 0:
        raise WorldError("no active components to sample a rationale from")
    delta = w[active_idx] * (totals_pref[active_idx] - totals_other[active_idx])
    probs = softmax(delta)
    j = int(rng.choice(active_idx, p=probs))
    return rationales[j]


def gen_featureworld_pairs(
    cfg: FeatureWorldConfig,
    task_string: str,
    n_pairs: int,
    split: str = SPLIT_TRAIN,
    seed_salt: int = _PAIR_SALT,
) -> list[LabeledPair]:
    """Random segment pairs from mixed-optimality pools, labeled by true
    weighted totals, each with a sampled rationale."""
    task = cfg.task(task_string)
    task_idx = [t.task_string for t in cfg.tasks].index(task_string)
    rationales = [c.rationale for c in cfg.components]
    active = task.weights != 0
    pairs = []
    for i in range(n_pairs):
        rng = _pair_rng(cfg.seed, seed_salt, task_idx, i)
        level_a, level_b = rng.choice(cfg.optimality_levels, size=2)
        seg_a, tot_a = gen_featureworld_trajectory(cfg, task_string, float(level_a), rng)
        seg_b, tot_b = gen_featureworld_trajectory(cfg, task_string, float(level_b), rng)
        y = label_preference(tot_a, tot_b, task.weights, rng)
        if y == 1:
            reason = sample_rationale(tot_a, tot_b, task.weights, active, rng, rationales)
        else:
            reason = sample_rationale(tot_b, tot_a, task.weights, active, rng, rationales)
        pairs.append(LabeledPair(seg_a, seg_b, y, task_string, reason, split))
    return pairs


@dataclass
class TransferSuite:
    """Datasets of the compositional transfer experiment."""

    config: FeatureWorldConfig
    train: dict[str, list[LabeledPair]]
    val_id: dict[str, list[LabeledPair]]
    heldout_task: str
    heldout_val: list[LabeledPair]


def build_transfer_suite(
    cfg: FeatureWorldConfig, n_train: int = 2000, n_val: int = 300
) -> TransferSuite:
    """Train pools for the first three tasks and a validation-only held-out task.

    The fourth task's weights must equal taskC - (taskB - taskA) so the
    held-out reward is a composition of what training exposes.
    """
    if len(cfg.tasks) != 4:
        raise WorldError("transfer suite needs exactly 4 tasks (3 train + 1 held out)")
    w = [t.weights for t in cfg.tasks]
    residual = np.max(np.abs(w[3] - (w[2] - (w[1] - w[0]))))
    if residual > 1e-9:
        raise WorldError(
            f"held-out weights break the compositionality identity (residual {residual:.3g})"
        )
    train_tasks = [t.task_string for t in cfg.tasks[:3]]
    heldout = cfg.tasks[3].task_string
    train = {t: gen_featureworld_pairs(cfg, t, n_train, SPLIT_TRAIN) for t in train_tasks}
    val_id = {
        t: gen_featureworld_pairs(cfg, t, n_val, SPLIT_VAL_ID, seed_salt=_VAL_SALT)
        for t in train_tasks
    }
    heldout_val = gen_featureworld_pairs(cfg, heldout, n_val, SPLIT_VAL_OOD, seed_salt=_VAL_SALT)
    return TransferSuite(
        config=cfg, train=train, val_id=val_id, heldout_task=heldout, heldout_val=heldout_val
    )


def default_transfer_config(seed: int = 0, **overrides) -> FeatureWorldConfig:
    """Shipped compositional suite over seven manipulation components."""
    components = [
        FeatureComponent("contact", "makes contact with puck sooner"),
        FeatureComponent("push-progress", "pushes puck closer to goal"),
        FeatureComponent("waypoint", "bypasses the wall via the waypoint"),
        FeatureComponent("grasp", "maintains firm grip on puck"),
        FeatureComponent("lift", "lifts puck cleanly"),
        FeatureComponent("carry", "carries puck toward goal while lifted"),
        FeatureComponent("goal", "finishes at goal spot"),
    ]

    def weights(names):
        return np.array([1.0 if c.name in names else 0.0 for c in components])

    tasks = [
        FeatureTask("make contact and push puck to goal", weights({"contact", "push-progress", "goal"})),
        FeatureTask(
            "make contact, bypass wall via waypoint, and push puck to goal",
            weights({"contact", "push-progress", "waypoint", "goal"}),
        ),
        FeatureTask(
            "pick up puck, use waypoint to bypass wall, and place it on goal",
            weights({"grasp", "lift", "carry", "waypoint", "goal"}),
        ),
        FeatureTask(
            "pick up puck, lift it, and place it on goal",
            weights({"grasp", "lift", "carry", "goal"}),
        ),
    ]
    return FeatureWorldConfig(components=components, tasks=tasks, seed=seed, **overrides)


def featureworld_embedding_table(
    cfg: FeatureWorldConfig,
    dim: int = 64,
    master_seed: int = 0,
    residual_mix: float = 1.5,
    component_coherence: float = 0.8,
) -> EmbeddingTable:
    """Synthetic embeddings mirroring how a sentence encoder relates task
    descriptions to the component rationales they mention.

    Component rationales share a common manipulation-domain direction
    (sentences about the same domain correlate under a real encoder) plus
    their own direction; each task description blends its active components'
    directions, scaled by its weights, with a substantial task-specific
    residual direction.
    """
    domain = synthetic_embed("domain: tabletop manipulation progress", dim, master_seed)
    entries = {}
    comp_vecs = []
    for c in cfg.components:
        own = synthetic_embed(c.rationale, dim, master_seed)
        v = blend([(component_coherence, domain), (1.0, own)])
        comp_vecs.append(v)
        entries[c.rationale] = v
    for t in cfg.tasks:
        parts = [(float(w), v) for w, v in zip(t.weights, comp_vecs) if w != 0]
        comp_sum = blend(parts)
        resid = synthetic_embed(t.task_string, dim, master_seed)
        entries[t.task_string] = blend([(1.0, comp_sum), (residual_mix, resid)])
    return EmbeddingTable(dim=dim, entries=entries, provider_tag="synthetic", normalized=True)
