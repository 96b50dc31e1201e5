"""Preference-dataset persistence and manipulation.

Datasets are JSON Lines: one metadata header line, then one record per
line with fields {"task", "reason", "y", "segA", "segB", "split"}. Floats
are serialized with full round-trip precision, so read(write(ds)) is
lossless down to the bit pattern. Writes go through a temp file and rename,
so readers never observe a partial file.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
import tempfile
from dataclasses import dataclass

import numpy as np

from .encoder import TrajectorySegment
from .worlds import LabeledPair

SCHEMA_VERSION = 1


class DatastoreError(ValueError):
    """Raised for malformed files, schema mismatches, or invalid arguments."""


def config_hash(obj) -> str:
    """Stable digest of a JSON-serializable config (key order independent)."""
    canon = json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False)
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()


@dataclass
class PreferenceDataset:
    """An ordered list of labeled pairs plus provenance metadata."""

    records: list[LabeledPair]
    world_hash: str = ""
    seed: int = 0

    def __post_init__(self):
        if not self.records:
            raise DatastoreError("dataset must contain at least one record")
        dims = {r.seg_a.step_dim for r in self.records} | {r.seg_b.step_dim for r in self.records}
        if len(dims) != 1:
            raise DatastoreError(f"records mix step-feature dimensions: {sorted(dims)}")

    @property
    def step_dim(self) -> int:
        return self.records[0].seg_a.step_dim

    def __len__(self) -> int:
        return len(self.records)

    def equals(self, other: "PreferenceDataset") -> bool:
        if len(self.records) != len(other.records):
            return False
        if (self.world_hash, self.seed) != (other.world_hash, other.seed):
            return False
        for a, b in zip(self.records, other.records):
            if (a.y, a.task, a.reason, a.split) != (b.y, b.task, b.reason, b.split):
                return False
            if not (np.array_equal(a.seg_a.steps, b.seg_a.steps)
                    and np.array_equal(a.seg_b.steps, b.seg_b.steps)):
                return False
        return True


def _pair_to_json(pair: LabeledPair) -> dict:
    return {
        "task": pair.task,
        "reason": pair.reason,
        "y": pair.y,
        "segA": [[float(x) for x in row] for row in pair.seg_a.steps],
        "segB": [[float(x) for x in row] for row in pair.seg_b.steps],
        "split": pair.split,
    }


def write_dataset(ds: PreferenceDataset, path: str) -> None:
    """Serialize to JSONL atomically: header line, then one record per line."""
    # n_records makes truncation at a line boundary detectable on read.
    header = {
        "schema": SCHEMA_VERSION,
        "world_hash": ds.world_hash,
        "seed": ds.seed,
        "step_dim": ds.step_dim,
        "n_records": len(ds.records),
    }
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as f:
            f.write(json.dumps(header, ensure_ascii=False) + "\n")
            for pair in ds.records:
                f.write(json.dumps(_pair_to_json(pair), ensure_ascii=False) + "\n")
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def read_dataset(path: str) -> PreferenceDataset:
    """Parse a JSONL dataset file, naming the offending record on errors."""
    try:
        with open(path, encoding="utf-8") as f:
            lines = f.read().splitlines()
    except OSError as e:
        raise DatastoreError(f"cannot read dataset {path}: {e}") from e
    if not lines:
        raise DatastoreError(f"dataset {path} is empty")
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as e:
        raise DatastoreError(f"dataset {path} header is not valid JSON: {e}") from e
    if header.get("schema") != SCHEMA_VERSION:
        raise DatastoreError(
            f"dataset {path} has schema {header.get('schema')!r}, expected {SCHEMA_VERSION}"
        )
    step_dim = header.get("step_dim")
    records = []
    for i, line in enumerate(lines[1:]):
        if not line.strip():
            raise DatastoreError(f"record {i}: blank line (file truncated?)")
        try:
            raw = json.loads(line)
        except json.JSONDecodeError as e:
            raise DatastoreError(f"record {i}: invalid JSON: {e}") from e
        for key in ("task", "reason", "y", "segA", "segB", "split"):
            if key not in raw:
                raise DatastoreError(f"record {i}: missing field {key!r}")
        seg_a = np.asarray(raw["segA"], dtype=np.float64)
        seg_b = np.asarray(raw["segB"], dtype=np.float64)
        for name, seg in (("segA", seg_a), ("segB", seg_b)):
            if seg.ndim != 2 or seg.shape[1] != step_dim:
                raise DatastoreError(
                    f"record {i}: {name} has inconsistent dims {seg.shape}, expected (*, {step_dim})"
                )
        records.append(
            LabeledPair(
                seg_a=TrajectorySegment(seg_a, raw["task"]),
                seg_b=TrajectorySegment(seg_b, raw["task"]),
                y=raw["y"],
                task=raw["task"],
                reason=raw["reason"],
                split=raw["split"],
            )
        )
    if not records:
        raise DatastoreError(f"dataset {path} has a header but no records")
    declared = header.get("n_records")
    if declared is not None and declared != len(records):
        raise DatastoreError(
            f"dataset {path} is truncated: header declares {declared} records, found {len(records)}"
        )
    return PreferenceDataset(records=records, world_hash=header.get("world_hash", ""), seed=header.get("seed", 0))


def mask_rationales(ds: PreferenceDataset, keep_fraction: float, seed: int) -> PreferenceDataset:
    """Keep rationales on an exact floor(keep_fraction * n) subset of records.

    The kept subset is a seeded random choice; labels and segments are
    untouched, and re-masking with the same seed and fraction is a no-op.
    """
    if not 0.0 <= keep_fraction <= 1.0:
        raise DatastoreError(f"keep_fraction must be in [0, 1], got {keep_fraction}")
    n = len(ds.records)
    n_keep = int(math.floor(keep_fraction * n + 1e-9))
    rng = np.random.default_rng(seed)
    keep = set(rng.permutation(n)[:n_keep].tolist())
    records = []
    for i, pair in enumerate(ds.records):
        reason = pair.reason if i in keep else None
        records.append(LabeledPair(pair.seg_a, pair.seg_b, pair.y, pair.task, reason, pair.split))
    return PreferenceDataset(records=records, world_hash=ds.world_hash, seed=ds.seed)


def split_dataset(ds: PreferenceDataset, fractions, seed: int) -> list[PreferenceDataset]:
    """Disjoint, exhaustive random partitions with cumulative-floor sizing."""
    fractions = [float(f) for f in fractions]
    if any(f <= 0 for f in fractions):
        raise DatastoreError("split fractions must be positive")
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise DatastoreError(f"split fractions must sum to 1, got {sum(fractions)}")
    n = len(ds.records)
    perm = np.random.default_rng(seed).permutation(n)
    bounds = [0] + [int(math.floor(c * n + 1e-9)) for c in np.cumsum(fractions)]
    bounds[-1] = n
    parts = []
    for lo, hi in zip(bounds[:-1], bounds[1:]):
        if hi <= lo:
            raise DatastoreError("a split partition came out empty; use larger fractions")
        idx = sorted(perm[lo:hi].tolist())
        parts.append(
            PreferenceDataset(
                records=[ds.records[i] for i in idx], world_hash=ds.world_hash, seed=ds.seed
            )
        )
    return parts
