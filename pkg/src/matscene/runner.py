"""Seeded parallel batch execution over independent corpus items.

Items are processed by a pure worker function; any single-item failure is
recorded and never aborts the batch. The manifest is written atomically by the
parent process and is byte-deterministic except for its timing block.
"""

from __future__ import annotations

import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from matscene import __version__, imgio

# Manifest keys that legitimately differ between identical runs.
NONDETERMINISTIC_MANIFEST_KEYS = ("timing",)


@dataclass
class Skipped:
    """Return this from a worker to record the item as skipped."""

    reason: str = ""


@dataclass
class ItemResult:
    item_id: str
    status: str  # ok | skip | error
    detail: str = ""
    value: object = None


@dataclass
class RunManifest:
    kind: str
    config_hash: str
    seed: int
    items: list[dict] = field(default_factory=list)
    counts: dict = field(default_factory=dict)
    wall_time_s: float = 0.0

    def to_json_dict(self) -> dict:
        return {
            "kind": self.kind,
            "tool_version": __version__,
            "config_hash": self.config_hash,
            "seed": self.seed,
            "counts": dict(self.counts),
            "items": list(self.items),
            "timing": {"wall_time_s": round(self.wall_time_s, 3)},
        }


def run_batch(items: list[tuple[str, tuple]], worker, workers: int = 1) -> list[ItemResult]:
    """Apply worker(*payload) to every (item_id, payload), isolating faults.

    With workers > 1 a process pool is used; results keep the input order
    either way. The CPU-bound workload gains nothing from oversubscription,
    so the effective pool size is capped at the machine's core count.
    """
    workers = min(workers, os.cpu_count() or 1)
    if workers <= 1 or len(items) <= 1:
        return [_run_one(item_id, worker, payload) for item_id, payload in items]
    results: list[ItemResult] = []
    with ProcessPoolExecutor(max_workers=workers) as pool:
        futures = [(item_id, pool.submit(_call_worker, worker, payload)) for item_id, payload in items]
        for item_id, future in futures:
            try:
                results.append(_as_result(item_id, future.result()))
            except Exception as exc:
                results.append(ItemResult(item_id=item_id, status="error", detail=_describe(exc)))
    return results


def _call_worker(worker, payload):
    return worker(*payload)


def _run_one(item_id: str, worker, payload) -> ItemResult:
    try:
        return _as_result(item_id, worker(*payload))
    except Exception as exc:
        return ItemResult(item_id=item_id, status="error", detail=_describe(exc))


def _as_result(item_id: str, value) -> ItemResult:
    if isinstance(value, Skipped):
        return ItemResult(item_id=item_id, status="skip", detail=value.reason)
    return ItemResult(item_id=item_id, status="ok", value=value)


def _describe(exc: Exception) -> str:
    return f"{type(exc).__name__}: {exc}"


def write_manifest(
    path: str | Path,
    kind: str,
    config_hash: str,
    seed: int,
    results: list[ItemResult],
    started_at: float,
    extra_items: dict[str, dict] | None = None,
) -> RunManifest:
    """Summarize a batch into a manifest file (single writer, atomic)."""
    counts: dict[str, int] = {"ok": 0, "skip": 0, "error": 0}
    items = []
    for res in results:
        counts[res.status] = counts.get(res.status, 0) + 1
        entry = {"item_id": res.item_id, "status": res.status}
        if res.detail:
            entry["detail"] = res.detail
        if extra_items and res.item_id in extra_items:
            entry.update(extra_items[res.item_id])
        items.append(entry)
    manifest = RunManifest(
        kind=kind,
        config_hash=config_hash,
        seed=seed,
        items=items,
        counts=counts,
        wall_time_s=time.monotonic() - started_at,
    )
    imgio.atomic_write_json(path, manifest.to_json_dict())
    return manifest


def error_rate(manifest: RunManifest) -> float:
    total = sum(manifest.counts.values())
    return manifest.counts.get("error", 0) / total if total else 0.0
