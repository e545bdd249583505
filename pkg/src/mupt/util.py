"""Canonical serialization helpers shared by artifacts and checkpoints."""
from __future__ import annotations

import hashlib
import json

__all__ = ["canonical_json", "short_hash"]


def canonical_json(obj) -> str:
    """Deterministic JSON: sorted keys, no whitespace drift, stable floats."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=True)


def short_hash(obj) -> str:
    """12-hex digest of an object's canonical JSON; names artifact files."""
    return hashlib.sha256(canonical_json(obj).encode("utf-8")).hexdigest()[:12]
