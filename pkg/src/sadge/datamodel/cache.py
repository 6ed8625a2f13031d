"""Versioned pair-score cache.

Expensive pair metrics (RANSAC geometry above all) are computed once and
reused across runs. Store format: append-only newline-delimited JSON records
``{"real_id", "synth_id", "metric_id", "value", "engine_version"}``.

Keying includes the engine version, so entries written by an engine with
different metric constants are invisible rather than silently stale: bump
``sadge.ENGINE_VERSION`` whenever any metric constant changes. Floats round
trip bit-exactly (json emits repr, the shortest exact form).

Readers may share one open cache across threads; writes are serialized by an
internal lock and flushed per record.
"""

from __future__ import annotations

import json
import logging
import os
import threading

from ..errors import ValidationError
from .types import PairScore

log = logging.getLogger(__name__)

_FIELDS = ("real_id", "synth_id", "metric_id", "value", "engine_version")


class PairScoreCache:
    """Append-only on-disk cache with an in-memory index."""

    def __init__(self, path: str, engine_version: str):
        self.path = path
        self.engine_version = engine_version
        self._lock = threading.Lock()
        self._store: dict[tuple[str, str, str], float] = {}
        self._hits = 0
        self._misses = 0
        if os.path.isfile(path):
            self._load()
        else:
            parent = os.path.dirname(os.path.abspath(path))
            os.makedirs(parent, exist_ok=True)

    def _load(self) -> None:
        with open(self.path, "r", encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.strip()
                if not line:
                    continue
                try:
                    rec = json.loads(line)
                    key_version = rec["engine_version"]
                    key = (rec["real_id"], rec["synth_id"], rec["metric_id"])
                    value = float(rec["value"])
                except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                    log.warning("%s:%d: skipping corrupt cache record (%s)",
                                self.path, lineno, exc)
                    continue
                if key_version != self.engine_version:
                    continue  # stale version: never served
                self._store[key] = value

    def get(self, real_id: str, synth_id: str, metric_id: str) -> PairScore | None:
        """Stored score iff (ids, metric, engine_version) match exactly."""
        value = self._store.get((real_id, synth_id, metric_id))
        if value is None:
            self._misses += 1
            return None
        self._hits += 1
        return PairScore(real_id=real_id, synth_id=synth_id, metric_id=metric_id,
                         value=value, engine_version=self.engine_version)

    def put(self, score: PairScore) -> None:
        if score.engine_version != self.engine_version:
            raise ValidationError(
                f"cache opened for version {self.engine_version!r}, "
                f"got record for {score.engine_version!r}"
            )
        score.validate()
        rec = {f: getattr(score, f) for f in _FIELDS}
        line = json.dumps(rec) + "\n"
        key = (score.real_id, score.synth_id, score.metric_id)
        with self._lock:
            with open(self.path, "a", encoding="utf-8") as fh:
                fh.write(line)
            self._store[key] = score.value

    def put_many(self, scores: list[PairScore]) -> None:
        with self._lock:
            with open(self.path, "a", encoding="utf-8") as fh:
                for score in scores:
                    if score.engine_version != self.engine_version:
                        raise ValidationError("engine_version mismatch in put_many")
                    score.validate()
                    fh.write(json.dumps({f: getattr(score, f) for f in _FIELDS}) + "\n")
                    self._store[(score.real_id, score.synth_id, score.metric_id)] = score.value

    @property
    def stats(self) -> dict[str, int]:
        return {"hits": self._hits, "misses": self._misses, "entries": len(self._store)}


class NullCache:
    """Cache stand-in that stores nothing (bench mode measures raw compute)."""

    def get(self, real_id: str, synth_id: str, metric_id: str) -> None:
        return None

    def put(self, score: PairScore) -> None:
        return None

    def put_many(self, scores: list[PairScore]) -> None:
        return None

    @property
    def stats(self) -> dict[str, int]:
        return {"hits": 0, "misses": 0, "entries": 0}
