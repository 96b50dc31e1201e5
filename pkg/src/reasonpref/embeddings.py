"""Frozen language-embedding provider.

Task and rationale strings are mapped to fixed d-dimensional vectors either
by loading a file exported from a real sentence encoder or by a
deterministic synthetic embedder. Synthetic vectors come from a counter-based
PRNG keyed by a cryptographic hash of the string, so any process reproduces
them bit-for-bit. Semantic groups let related strings (paraphrases, or a
task family sharing one concept) share a common direction, which is the
structure a real encoder would give them.
"""

from __future__ import annotations

import hashlib
import json
import os
import tempfile
from dataclasses import dataclass, field

import numpy as np

DEFAULT_DIM = 64


class EmbeddingError(ValueError):
    """Raised for malformed embedding inputs or missing strings."""


def _hash_key(s: str, master_seed: int) -> np.ndarray:
    digest = hashlib.sha256(f"{master_seed}\x1f{s}".encode("utf-8")).digest()
    return np.frombuffer(digest[:16], dtype=np.uint64)


def synthetic_embed(s: str, dim: int = DEFAULT_DIM, master_seed: int = 0) -> np.ndarray:
    """Deterministic unit-norm pseudo-embedding of a string.

    Seeds a Philox counter-based generator with a SHA-256 hash of
    (master_seed, s), samples ``dim`` standard normals and normalizes.
    Distinct strings land nearly orthogonal in high dimension.
    """
    if not s:
        raise EmbeddingError("cannot embed an empty string")
    if dim < 2:
        raise EmbeddingError(f"embedding dim must be >= 2, got {dim}")
    rng = np.random.Generator(np.random.Philox(key=_hash_key(s, master_seed)))
    v = rng.standard_normal(dim)
    return v / np.linalg.norm(v)


@dataclass
class SemanticGroupSpec:
    """A cluster of strings that should embed near a shared centroid."""

    group_id: str
    centroid_seed: int
    member_strings: list[str]
    perturbation_scale: float = 0.25

    def __post_init__(self):
        if not self.member_strings:
            raise EmbeddingError(f"group {self.group_id!r} has no member strings")
        if len(set(self.member_strings)) != len(self.member_strings):
            raise EmbeddingError(f"group {self.group_id!r} has duplicate member strings")
        if not 0.0 <= self.perturbation_scale < 1.0:
            raise EmbeddingError(
                f"perturbation_scale must be in [0, 1), got {self.perturbation_scale}"
            )

    def centroid(self, dim: int) -> np.ndarray:
        return synthetic_embed(self.group_id, dim, self.centroid_seed)


def group_embed(spec: SemanticGroupSpec, s: str, dim: int = DEFAULT_DIM) -> np.ndarray:
    """Embed a group member as its centroid plus a small orthogonal offset.

    The offset direction is the member's own synthetic embedding projected
    off the centroid, so members of one group stay mutually closer than they
    are to any other group's centroid.
    """
    if s not in spec.member_strings:
        raise EmbeddingError(f"string {s!r} is not a member of group {spec.group_id!r}")
    c = spec.centroid(dim)
    raw = synthetic_embed(s, dim, spec.centroid_seed)
    off = raw - (raw @ c) * c
    n = np.linalg.norm(off)
    if n > 0:
        off = off / n
    v = c + spec.perturbation_scale * off
    return v / np.linalg.norm(v)


@dataclass
class EmbeddingTable:
    """Immutable exact-string lookup of frozen embeddings.

    Lookups miss (and raise) on any string not stored verbatim; there is no
    fuzzy or case-insensitive matching, and nothing downstream may mutate the
    stored vectors.
    """

    dim: int
    entries: dict[str, np.ndarray]
    provider_tag: str = "synthetic"
    normalized: bool = True
    _frozen: bool = field(default=False, repr=False)

    def __post_init__(self):
        if self.dim < 1:
            raise EmbeddingError(f"table dim must be positive, got {self.dim}")
        for key, vec in self.entries.items():
            vec = np.asarray(vec, dtype=np.float64)
            if vec.shape != (self.dim,):
                raise EmbeddingError(
                    f"inconsistent dimension for {key!r}: got {vec.shape}, expected ({self.dim},)"
                )
            if not np.all(np.isfinite(vec)):
                raise EmbeddingError(f"non-finite embedding for {key!r}")
            if self.normalized and abs(np.linalg.norm(vec) - 1.0) > 1e-9:
                raise EmbeddingError(f"embedding for {key!r} is not unit norm")
            vec.flags.writeable = False
            self.entries[key] = vec
        self._frozen = True

    def lookup(self, s: str) -> np.ndarray:
        try:
            return self.entries[s]
        except KeyError:
            raise EmbeddingError(f"no embedding for exact string {s!r}") from None

    def __contains__(self, s: str) -> bool:
        return s in self.entries

    def __len__(self) -> int:
        return len(self.entries)

    def checksum(self) -> str:
        """Digest of every key and vector bit pattern, for frozen-ness checks."""
        h = hashlib.sha256()
        for key in sorted(self.entries):
            h.update(key.encode("utf-8"))
            h.update(b"\x00")
            h.update(np.ascontiguousarray(self.entries[key]).tobytes())
        return h.hexdigest()


def build_table(
    strings: list[str],
    dim: int = DEFAULT_DIM,
    master_seed: int = 0,
    groups: list[SemanticGroupSpec] | None = None,
) -> EmbeddingTable:
    """Build a synthetic table; grouped strings use their group geometry."""
    by_group: dict[str, SemanticGroupSpec] = {}
    for g in groups or []:
        for m in g.member_strings:
            if m in by_group:
                raise EmbeddingError(f"string {m!r} appears in more than one group")
            by_group[m] = g
    entries: dict[str, np.ndarray] = {}
    for s in strings:
        if s in entries:
            raise EmbeddingError(f"duplicate string {s!r}")
        if s in by_group:
            entries[s] = group_embed(by_group[s], s, dim)
        else:
            entries[s] = synthetic_embed(s, dim, master_seed)
    return EmbeddingTable(dim=dim, entries=entries, provider_tag="synthetic", normalized=True)


def blend(parts: list[tuple[float, np.ndarray]]) -> np.ndarray:
    """Unit-normalized weighted sum of vectors, for composing related concepts."""
    acc = np.zeros_like(parts[0][1])
    for w, v in parts:
        acc = acc + w * np.asarray(v, dtype=np.float64)
    n = np.linalg.norm(acc)
    if n == 0:
        raise EmbeddingError("blend collapsed to the zero vector")
    return acc / n


# -- file format -------------------------------------------------------------
#
# UTF-8 JSON object:
#   {"dim": int, "normalized": bool, "provider": str,
#    "embeddings": {string: [float, ...], ...}}
# Floats carry full round-trip precision. This is the interchange contract
# with external embedding exporters.


def _reject_duplicate_keys(pairs):
    obj = {}
    for k, v in pairs:
        if k in obj:
            raise EmbeddingError(f"duplicate key {k!r} in embedding file")
        obj[k] = v
    return obj


def save_table(table: EmbeddingTable, path: str) -> None:
    """Write the table atomically in the interchange JSON format."""
    payload = {
        "dim": table.dim,
        "normalized": table.normalized,
        "provider": table.provider_tag,
        "embeddings": {k: [float(x) for x in v] for k, v in table.entries.items()},
    }
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as f:
            json.dump(payload, f, ensure_ascii=False)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load_table(path: str, normalize: bool = True) -> EmbeddingTable:
    """Load an embedding file; vectors are unit-normalized unless told not to.

    Normalization at load time is harmless for the projection math (which is
    axis-scale invariant) and keeps reward magnitudes predictable.
    """
    try:
        with open(path, encoding="utf-8") as f:
            raw = json.load(f, object_pairs_hook=_reject_duplicate_keys)
    except OSError as e:
        raise EmbeddingError(f"cannot read embedding file {path}: {e}") from e
    except json.JSONDecodeError as e:
        raise EmbeddingError(f"malformed embedding file {path}: {e}") from e
    for key in ("dim", "normalized", "provider", "embeddings"):
        if key not in raw:
            raise EmbeddingError(f"embedding file {path} missing field {key!r}")
    dim = raw["dim"]
    if not isinstance(dim, int) or dim < 1:
        raise EmbeddingError(f"embedding file {path} has invalid dim {dim!r}")
    entries: dict[str, np.ndarray] = {}
    for key, vals in raw["embeddings"].items():
        vec = np.asarray(vals, dtype=np.float64)
        if vec.shape != (dim,):
            raise EmbeddingError(
                f"inconsistent dimension for {key!r}: got {vec.shape[0] if vec.ndim == 1 else vec.shape}, expected {dim}"
            )
        if not np.all(np.isfinite(vec)):
            raise EmbeddingError(f"non-finite embedding for {key!r}")
        if normalize:
            n = np.linalg.norm(vec)
            if n == 0:
                raise EmbeddingError(f"zero-norm embedding for {key!r}")
            vec = vec / n
        entries[key] = vec
    return EmbeddingTable(
        dim=dim,
        entries=entries,
        provider_tag=str(raw["provider"]),
        normalized=normalize or bool(raw["normalized"]),
    )
