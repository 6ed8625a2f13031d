"""Loaders for externally produced feature files.

Embedding manifest
    ``<name>.index``: newline-delimited JSON records
    ``{"image_id": str, "offset_bytes": int, "dim": int}``. An optional first
    line ``{"meta": {...}}`` carries producer provenance (encoder checkpoint,
    preprocessing constants) and is preserved verbatim.
    ``<name>.blob``: float32 little-endian vectors, contiguous, no padding.

Correspondence set
    Text table, one row per tentative match, four decimal fields
    ``x1,y1,x2,y2`` in pixel coordinates of the (real, synthetic) pair.
    Header row required.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

import numpy as np

from ..errors import ManifestError
from .types import Correspondences

FLOAT32_BYTES = 4


@dataclass
class EmbeddingManifest:
    """image_id -> embedding vector, loaded eagerly and immutable after load."""

    index_path: str
    vectors: dict[str, np.ndarray]
    meta: dict = field(default_factory=dict)

    def get(self, image_id: str) -> np.ndarray:
        try:
            return self.vectors[image_id]
        except KeyError:
            raise ManifestError(
                f"no embedding for image {image_id!r} in {self.index_path}"
            ) from None

    def __contains__(self, image_id: str) -> bool:
        return image_id in self.vectors

    def __len__(self) -> int:
        return len(self.vectors)


def load_embedding_manifest(index_path: str, blob_path: str | None = None) -> EmbeddingManifest:
    """Load an embedding manifest (index + blob file pair).

    Rejects truncated blobs, index/blob dimension mismatches, and any
    non-finite vector component (the offending image_id is named).
    """
    if blob_path is None:
        blob_path = os.path.splitext(index_path)[0] + ".blob"
    if not os.path.isfile(index_path):
        raise ManifestError(f"embedding index not found: {index_path}")
    if not os.path.isfile(blob_path):
        raise ManifestError(f"embedding blob not found: {blob_path}")

    with open(blob_path, "rb") as fh:
        blob = fh.read()

    vectors: dict[str, np.ndarray] = {}
    meta: dict = {}
    with open(index_path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ManifestError(
                    f"{index_path}:{lineno}: bad index record: {exc}"
                ) from None
            if "meta" in rec and "image_id" not in rec:
                meta = rec["meta"]
                continue
            try:
                image_id = rec["image_id"]
                offset = int(rec["offset_bytes"])
                dim = int(rec["dim"])
            except (KeyError, TypeError, ValueError):
                raise ManifestError(
                    f"{index_path}:{lineno}: record needs image_id/offset_bytes/dim"
                ) from None
            if dim < 1 or offset < 0:
                raise ManifestError(f"{index_path}:{lineno}: bad offset/dim")
            end = offset + dim * FLOAT32_BYTES
            if end > len(blob):
                raise ManifestError(
                    f"{blob_path}: truncated blob; {image_id!r} needs bytes "
                    f"[{offset}, {end}) but blob has {len(blob)}"
                )
            vec = np.frombuffer(blob, dtype="<f4", count=dim, offset=offset)
            vec = vec.astype(np.float64)
            if not np.all(np.isfinite(vec)):
                raise ManifestError(
                    f"{index_path}: non-finite embedding component for {image_id!r}"
                )
            if image_id in vectors:
                raise ManifestError(f"{index_path}: duplicate image_id {image_id!r}")
            vec.setflags(write=False)
            vectors[image_id] = vec
    return EmbeddingManifest(index_path=index_path, vectors=vectors, meta=meta)


def write_embedding_manifest(index_path: str, blob_path: str,
                             vectors: dict[str, np.ndarray],
                             meta: dict | None = None) -> None:
    """Emit the index/blob pair in the exact format `load_embedding_manifest` reads."""
    os.makedirs(os.path.dirname(os.path.abspath(index_path)), exist_ok=True)
    offset = 0
    with open(index_path, "w", encoding="utf-8") as idx, open(blob_path, "wb") as blob:
        if meta:
            idx.write(json.dumps({"meta": meta}) + "\n")
        for image_id, vec in vectors.items():
            arr = np.asarray(vec, dtype="<f4")
            if arr.ndim != 1:
                raise ManifestError(f"embedding for {image_id!r} must be 1-D")
            blob.write(arr.tobytes())
            idx.write(json.dumps({
                "image_id": image_id, "offset_bytes": offset, "dim": int(arr.size),
            }) + "\n")
            offset += arr.size * FLOAT32_BYTES


def load_correspondence_set(path: str) -> Correspondences:
    """Load one tentative-match table (may legitimately contain zero rows)."""
    if not os.path.isfile(path):
        raise ManifestError(f"correspondence set not found: {path}")
    rows: list[tuple[float, float, float, float]] = []
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip()
        if [c.strip() for c in header.split(",")] != ["x1", "y1", "x2", "y2"]:
            raise ManifestError(f"{path}: expected header 'x1,y1,x2,y2', got {header!r}")
        for lineno, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != 4:
                raise ManifestError(f"{path}:{lineno}: expected 4 fields")
            try:
                vals = tuple(float(p) for p in parts)
            except ValueError:
                raise ManifestError(f"{path}:{lineno}: non-numeric field") from None
            rows.append(vals)  # type: ignore[arg-type]
    return Correspondences(matches=tuple(rows), source="external_manifest")


def write_correspondence_set(path: str, corr: Correspondences) -> None:
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("x1,y1,x2,y2\n")
        for x1, y1, x2, y2 in corr.matches:
            fh.write(f"{float(x1)!r},{float(y1)!r},{float(x2)!r},{float(y2)!r}\n")


def correspondence_path(corr_dir: str, real_id: str, synth_id: str) -> str:
    """Per-pair file naming convention inside a correspondence directory."""
    return os.path.join(corr_dir, f"{real_id}__{synth_id}.csv")
