"""Small shared helpers: canonical JSON, JSONL files, seed derivation."""

from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Any, Iterable, Iterator

_SEED_MASK = (1 << 63) - 1


def derive_seed(seed: int, key: str) -> int:
    """Mix a run seed with a string key into a new nonnegative seed.

    Stable across processes (unlike hash()), so per-scene work can run in
    any order or in parallel and still reproduce byte-identical outputs.
    """
    digest = hashlib.sha256(key.encode("utf-8")).digest()
    return (seed ^ int.from_bytes(digest[:8], "little")) & _SEED_MASK


def canonical_json(obj: Any) -> str:
    """Serialize with sorted keys and fixed separators so equal inputs
    produce byte-identical files."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def write_jsonl(records: Iterable[Any], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(canonical_json(record))
            fh.write("\n")


def read_jsonl(path: str | Path) -> Iterator[tuple[int, Any]]:
    """Yield (line_number, parsed_record) pairs, skipping blank lines."""
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            yield lineno, json.loads(line)


def write_json(obj: Any, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps(obj, sort_keys=True, indent=2))
        fh.write("\n")
