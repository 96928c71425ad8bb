"""Benchmark grid runner and report rendering.

Cells (vlm x t2i x iut-mode) run sequentially; items within a cell run
concurrently up to the configured limit. Per-item failures are recorded and
never abort the grid. Under mock backends the whole run is deterministic.
"""

from __future__ import annotations

import concurrent.futures
import itertools
import json
from dataclasses import dataclass, field
from pathlib import Path

from .artifacts import ArtifactStore
from .errors import EmptyDataset, IutError
from .evaluation import ConsistencyTriplet
from .gateway import BackendConfig
from .session import ROLES, Runtime, Session, build_backend, mock_runtime


@dataclass(frozen=True)
class DatasetItem:
    item_id: str
    question: str
    image_id: str
    reference_answer: str | None = None


def load_dataset(path: str | Path) -> list[DatasetItem]:
    items = []
    for line in Path(path).read_text("utf-8").splitlines():
        if not line.strip():
            continue
        raw = json.loads(line)
        items.append(DatasetItem(str(raw["id"]), raw["question"], raw["image"], raw.get("reference_answer")))
    if not items:
        raise EmptyDataset(f"dataset {path} has no items")
    return items


@dataclass
class RunConfig:
    vlms: list[BackendConfig] = field(default_factory=lambda: [BackendConfig(model="mock-vlm")])
    t2is: list[BackendConfig] = field(default_factory=lambda: [BackendConfig(model="mock-t2i")])
    roles: dict[str, BackendConfig] = field(default_factory=dict)
    iut_modes: tuple[str, ...] = ("off", "on")
    dataset: str = ""
    output_dir: str = "bench-out"
    artifact_dir: str | None = None
    concurrency: int = 2
    seed: int = 0

    @classmethod
    def from_file(cls, path: str | Path) -> "RunConfig":
        raw = json.loads(Path(path).read_text("utf-8"))
        return cls(
            vlms=[BackendConfig(**c) for c in raw.get("vlms", [{"model": "mock-vlm"}])],
            t2is=[BackendConfig(**c) for c in raw.get("t2is", [{"model": "mock-t2i"}])],
            roles={role: BackendConfig(**c) for role, c in raw.get("roles", {}).items()},
            iut_modes=tuple(raw.get("iut_modes", ["off", "on"])),
            dataset=raw.get("dataset", ""),
            output_dir=raw.get("output_dir", "bench-out"),
            artifact_dir=raw.get("artifact_dir"),
            concurrency=int(raw.get("concurrency", 2)),
            seed=int(raw.get("seed", 0)),
        )


@dataclass
class BenchmarkRecord:
    item_id: str
    vlm: str
    t2i: str
    iut_mode: str
    triplet: ConsistencyTriplet | None
    composite: float | None = None
    wall_time: float = 0.0
    error: str | None = None

    def to_dict(self) -> dict:
        return {
            "item_id": self.item_id,
            "vlm": self.vlm,
            "t2i": self.t2i,
            "iut_mode": self.iut_mode,
            "triplet": self.triplet.as_dict() if self.triplet else None,
            "composite": self.composite,
            "wall_time": self.wall_time,
            "error": self.error,
        }


def _cell_runtime(config: RunConfig, vlm: BackendConfig, t2i: BackendConfig, store: ArtifactStore) -> Runtime:
    if vlm.base_url.startswith("mock") and t2i.base_url.startswith("mock"):
        runtime = mock_runtime(store, model=vlm.model)
        runtime.backends["t2i"] = build_backend(t2i, store)
        for role, cfg in config.roles.items():
            runtime.backends[role] = build_backend(cfg, store)
        return runtime
    backends = {role: build_backend(config.roles.get(role, vlm), store) for role in ROLES}
    backends["vlm"] = build_backend(vlm, store)
    backends["t2i"] = build_backend(t2i, store)
    return Runtime(backends, store)


def _run_item(item: DatasetItem, runtime: Runtime, mode: str, sessions_dir: Path, cell_tag: str) -> tuple[ConsistencyTriplet, float]:
    started = runtime.clock()
    image = runtime.store.get(item.image_id)
    session = Session.create(
        sessions_dir / f"{cell_tag}-{item.item_id}",
        image,
        runtime,
        session_id=f"{cell_tag}-{item.item_id}",
        iut_mode=mode,
    )
    turn = session.run_turn(item.question, image)
    if turn.status != "ok":
        raise IutError(f"turn failed at stage {turn.failed_stage}: {turn.error}")
    triplet = session.evaluate_turn(turn)
    return triplet, runtime.clock() - started


def run_benchmark(config: RunConfig) -> tuple[list[BenchmarkRecord], dict]:
    items = load_dataset(config.dataset)
    store = ArtifactStore(config.artifact_dir) if config.artifact_dir else ArtifactStore()
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    sessions_dir = out / "sessions"

    records: list[BenchmarkRecord] = []
    for vlm, t2i, mode in itertools.product(config.vlms, config.t2is, config.iut_modes):
        runtime = _cell_runtime(config, vlm, t2i, store)
        cell_tag = f"{vlm.model}-{t2i.model}-{mode}"

        def run_one(item: DatasetItem) -> BenchmarkRecord:
            try:
                triplet, wall = _run_item(item, runtime, mode, sessions_dir, cell_tag)
                return BenchmarkRecord(item.item_id, vlm.model, t2i.model, mode, triplet, wall_time=wall)
            except IutError as exc:
                return BenchmarkRecord(item.item_id, vlm.model, t2i.model, mode, None, error=str(exc))

        with concurrent.futures.ThreadPoolExecutor(max_workers=max(1, config.concurrency)) as pool:
            records.extend(pool.map(run_one, items))

    summary = summarize(records)
    (out / "records.jsonl").write_text(
        "".join(json.dumps(r.to_dict(), sort_keys=True, ensure_ascii=False) + "\n" for r in records), "utf-8"
    )
    (out / "summary.json").write_text(json.dumps(summary, sort_keys=True, indent=2, ensure_ascii=False) + "\n", "utf-8")
    (out / "report.txt").write_text(render_report(records) + "\n", "utf-8")
    return records, summary


def _mean(values: list[float]) -> float | None:
    return sum(values) / len(values) if values else None


def summarize(records: list[BenchmarkRecord]) -> dict:
    """Per-cell macro means of the per-item triplets (wall time excluded)."""
    cells: dict[tuple[str, str, str], list[BenchmarkRecord]] = {}
    for record in records:
        cells.setdefault((record.vlm, record.t2i, record.iut_mode), []).append(record)
    summary = {}
    for (vlm, t2i, mode), cell in sorted(cells.items()):
        scored = [r.triplet for r in cell if r.triplet is not None]
        summary["/".join((vlm, t2i, mode))] = {
            "items": len(cell),
            "failed": sum(1 for r in cell if r.error),
            "style": _mean([t.style for t in scored if t.style is not None]),
            "logic": _mean([t.logic for t in scored if t.logic is not None]),
            "entity": _mean([t.entity for t in scored if t.entity is not None]),
        }
    return summary


def format_delta_cell(off: float | None, on: float | None) -> str:
    """Paired cell "46.7(↑9.0)": the iut-on score with its signed delta.

    Inputs are scores in [0,1]; output is percentage points to one decimal.
    """
    if on is None:
        return "-"
    on_pct = round(on * 100, 1)
    if off is None:
        return f"{on_pct:.1f}"
    off_pct = round(off * 100, 1)
    delta = round(on_pct - off_pct, 1)
    arrow = "↓" if delta < 0 else "↑"
    return f"{on_pct:.1f}({arrow}{abs(delta):.1f})"


def render_report(records: list[BenchmarkRecord]) -> str:
    summary = summarize(records)
    pairs: dict[tuple[str, str], dict[str, dict]] = {}
    for key, cell in summary.items():
        vlm, t2i, mode = key.split("/")
        pairs.setdefault((vlm, t2i), {})[mode] = cell

    header = f"{'VLM':20} {'T2I':14} {'Style':>14} {'Logic':>14} {'Entity':>14}"
    lines = [header, "-" * len(header)]
    for (vlm, t2i), modes in sorted(pairs.items()):
        off = modes.get("off", {})
        on = modes.get("on", {})
        cells = []
        for dim in ("style", "logic", "entity"):
            if on:
                cells.append(format_delta_cell(off.get(dim), on.get(dim)))
            else:
                value = off.get(dim)
                cells.append("-" if value is None else f"{round(value * 100, 1):.1f}")
        lines.append(f"{vlm:20} {t2i:14} {cells[0]:>14} {cells[1]:>14} {cells[2]:>14}")
    return "\n".join(lines)
