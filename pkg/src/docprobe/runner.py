"""Experiment orchestration: multi-seed sweeps, caching, aggregation, reports.

A sweep runs one probe per cell (task, bundle, layer, seed). Every finished
cell is persisted as a JSON file named by a hash of its full descriptor
(corpus, bundle, task, layer, seed, probe config, strata), so interrupted
sweeps resume exactly where they stopped and never reuse stale results after
a config change. Aggregation reports mean and population standard deviation
(ddof=0) over seeds. Failed cells are isolated and reported, not fatal.

Stratified evaluation splits test documents by word-count stratum; documents
in the gap between the middle and upper bounds belong to no stratum and are
excluded (counted). For the top stratum, inputs are truncated to the bundle's
max_tokens budget at evaluation time so modes with different native lengths
compare under the same budget.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .corpus import parse_corpus
from .embedstore import read_bundle
from .errors import KeyMismatch
from .probe import ProbeConfig, evaluate, train
from .taskgen import (
    STRATUM_ORDER,
    TASK_FAMILIES,
    TASK_ORDER,
    build_task,
    display_name,
    evnttyp_n,
    task_base,
    word_count_stratum,
)

DEFAULT_STRATA = (209, 420, 431)
DOC_LEVEL_TASKS = ("wordct", "sentct", "evntct")
DEFAULT_SEEDS = (0, 1, 2, 3, 4)


@dataclass(frozen=True)
class BundleRef:
    label: str
    path: str


@dataclass(frozen=True)
class ExperimentSpec:
    corpus_path: str
    bundles: tuple[BundleRef, ...]
    tasks: tuple[str, ...]
    layers: tuple[int, ...] | str = "all"
    seeds: tuple[int, ...] = DEFAULT_SEEDS
    probe: ProbeConfig = field(default_factory=ProbeConfig)
    strata: tuple[int, int, int] = DEFAULT_STRATA
    corpus_format: str = "muc-json"
    output_dir: str = "results"

    def validate(self) -> None:
        if not self.bundles:
            raise ValueError("spec needs at least one bundle")
        labels = [b.label for b in self.bundles]
        if len(set(labels)) != len(labels):
            raise ValueError(f"bundle labels must be unique: {labels}")
        if not self.tasks:
            raise ValueError("spec needs at least one task")
        for task in self.tasks:
            if task_base(task) == "evnttyp":
                evnttyp_n(task)
            elif task not in TASK_ORDER:
                raise ValueError(f"unknown task {task!r}")
        if not self.seeds or len(set(self.seeds)) != len(self.seeds):
            raise ValueError("seeds must be non-empty and distinct")
        if self.layers != "all":
            if not self.layers or any(l < 0 for l in self.layers):
                raise ValueError(f"bad layer list {self.layers!r}")

    @classmethod
    def from_json_file(cls, path: str | Path) -> "ExperimentSpec":
        obj = json.loads(Path(path).read_text(encoding="utf-8"))
        bundles = []
        for b in obj["bundles"]:
            if isinstance(b, str):
                bundles.append(BundleRef(label=Path(b).name, path=b))
            else:
                bundles.append(BundleRef(label=b["label"], path=b["path"]))
        layers = obj.get("layers", "all")
        spec = cls(
            corpus_path=obj["corpus"],
            bundles=tuple(bundles),
            tasks=tuple(obj["tasks"]),
            layers="all" if layers == "all" else tuple(int(l) for l in layers),
            seeds=tuple(int(s) for s in obj.get("seeds", DEFAULT_SEEDS)),
            probe=ProbeConfig(**obj.get("probe", {})),
            strata=tuple(obj.get("strata", DEFAULT_STRATA)),
            corpus_format=obj.get("corpus_format", "muc-json"),
            output_dir=obj.get("output_dir", "results"),
        )
        spec.validate()
        return spec


@dataclass(frozen=True)
class CellStats:
    mean: float
    std: float
    n_seeds: int
    seeds: tuple[int, ...]
    per_seed: tuple[float, ...]


RowKey = tuple[str, str, int, str]  # (task, bundle, layer, stratum)


@dataclass
class ResultTable:
    rows: dict[RowKey, CellStats]
    failures: tuple[dict, ...] = ()


# --- cells ---


def _probe_dict(config: ProbeConfig) -> dict:
    d = dataclasses.asdict(config)
    d.pop("seed")  # the cell seed fills this in
    return d


def _cell_descriptor(spec: ExperimentSpec, bundle: BundleRef, task: str, layer: int, seed: int, stratified: bool) -> dict:
    return {
        "corpus_path": spec.corpus_path,
        "corpus_format": spec.corpus_format,
        "bundle_label": bundle.label,
        "bundle_path": bundle.path,
        "task": task,
        "layer": layer,
        "seed": seed,
        "probe": _probe_dict(spec.probe),
        "strata": list(spec.strata),
        "stratified": stratified,
    }


def _cell_key(descriptor: dict) -> str:
    payload = json.dumps(descriptor, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:16]


def _cell_path(cells_dir: Path, descriptor: dict) -> Path:
    name = (
        f"{descriptor['task']}.{descriptor['bundle_label']}"
        f".L{descriptor['layer']}.s{descriptor['seed']}.{_cell_key(descriptor)}.json"
    )
    return cells_dir / name


def _compute_cell(descriptor: dict) -> dict:
    corpus = parse_corpus(descriptor["corpus_path"], descriptor["corpus_format"])
    manifest, reader = read_bundle(descriptor["bundle_path"])
    dataset = build_task(descriptor["task"], corpus, reader, seed=descriptor["seed"])
    config = ProbeConfig(**descriptor["probe"], seed=descriptor["seed"])
    model, report = train(config, dataset, reader, descriptor["layer"])
    out = {
        "status": "ok",
        "accuracy": report.test_accuracy,
        "best_epoch": report.best_epoch,
        "stopped_reason": report.stopped_reason,
        "materialize_dropped": report.dropped,
        "dataset_dropped": dataset.dropped_count,
        "dataset_skipped": dataset.skipped_count,
    }
    if descriptor["stratified"]:
        strata = tuple(descriptor["strata"])
        groups: dict[str, list] = {}
        gap = 0
        for ex in dataset.splits["test"]:
            wc = ex.meta.get("word_count")
            if wc is None:
                raise ValueError(
                    f"task {descriptor['task']!r} has no word_count meta; "
                    "stratified evaluation needs a document-level task"
                )
            stratum = word_count_stratum(int(wc), strata)
            if stratum is None:
                gap += 1
                continue
            groups.setdefault(stratum, []).append(ex)
        top = f">={strata[2]}"
        per_stratum: dict[str, float] = {}
        counts: dict[str, int] = {}
        for label in sorted(groups):
            budget = manifest.max_tokens if label == top else None
            per_stratum[label] = evaluate(
                model, groups[label], reader, descriptor["layer"], max_tokens=budget
            )
            counts[label] = len(groups[label])
        out["per_stratum"] = per_stratum
        out["stratum_counts"] = counts
        out["gap_excluded"] = gap
    return out


def _run_cell(descriptor: dict) -> dict:
    try:
        return _compute_cell(descriptor)
    except Exception as exc:  # isolate cell failures; the sweep reports them
        return {"status": "error", "error": f"{type(exc).__name__}: {exc}"}


def _write_cell(path: Path, descriptor: dict, result: dict) -> None:
    payload = json.dumps({"descriptor": descriptor, "result": result}, indent=2, sort_keys=True)
    tmp = path.with_suffix(".tmp")
    tmp.write_text(payload + "\n", encoding="utf-8")
    os.replace(tmp, path)


def _resolve_layers(spec: ExperimentSpec, bundle: BundleRef) -> tuple[int, ...]:
    manifest, _ = read_bundle(bundle.path)
    if spec.layers == "all":
        return manifest.layer_ids
    missing = sorted(set(spec.layers) - set(manifest.layer_ids))
    if missing:
        raise ValueError(f"bundle {bundle.label!r} lacks layers {missing}")
    return tuple(spec.layers)


def run_experiment(spec: ExperimentSpec, workers: int = 1, stratified: bool = False) -> ResultTable:
    """Run all cells (resuming from cached results), aggregate over seeds."""
    spec.validate()
    cells_dir = Path(spec.output_dir) / "cells"
    cells_dir.mkdir(parents=True, exist_ok=True)

    descriptors: list[dict] = []
    for bundle in spec.bundles:
        layers = _resolve_layers(spec, bundle)
        for task in spec.tasks:
            for layer in layers:
                for seed in spec.seeds:
                    descriptors.append(
                        _cell_descriptor(spec, bundle, task, layer, seed, stratified)
                    )

    todo = [d for d in descriptors if not _cell_path(cells_dir, d).exists()]
    if workers > 1 and len(todo) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for descriptor, result in zip(todo, pool.map(_run_cell, todo)):
                _write_cell(_cell_path(cells_dir, descriptor), descriptor, result)
    else:
        for descriptor in todo:
            result = _run_cell(descriptor)
            _write_cell(_cell_path(cells_dir, descriptor), descriptor, result)

    records = []
    for descriptor in descriptors:
        payload = json.loads(_cell_path(cells_dir, descriptor).read_text(encoding="utf-8"))
        records.append(payload)
    return aggregate_cells(records)


def layer_sweep(spec: ExperimentSpec, workers: int = 1) -> ResultTable:
    """Full-depth sweep over every stored layer of a single bundle."""
    if len(spec.bundles) != 1:
        raise ValueError("layer_sweep expects exactly one bundle")
    spec = dataclasses.replace(spec, layers="all")
    return run_experiment(spec, workers=workers)


def stratified_eval(spec: ExperimentSpec, workers: int = 1) -> ResultTable:
    """Sweep with per-stratum test evaluation; document-level tasks only."""
    bad = [t for t in spec.tasks if t not in DOC_LEVEL_TASKS]
    if bad:
        raise ValueError(f"stratified evaluation needs document-level tasks, got {bad}")
    return run_experiment(spec, workers=workers, stratified=True)


# --- aggregation ---


def aggregate_cells(records: list[dict]) -> ResultTable:
    """Group per-cell records by (task, bundle, layer, stratum); mean and ddof=0 std."""
    grouped: dict[RowKey, list[tuple[int, float]]] = {}
    failures: list[dict] = []
    for payload in records:
        descriptor, result = payload["descriptor"], payload["result"]
        base = (descriptor["task"], descriptor["bundle_label"], int(descriptor["layer"]))
        seed = int(descriptor["seed"])
        if result["status"] != "ok":
            failures.append(
                {
                    "task": base[0],
                    "bundle": base[1],
                    "layer": base[2],
                    "seed": seed,
                    "error": result.get("error", "unknown"),
                }
            )
            continue
        grouped.setdefault((*base, "all"), []).append((seed, float(result["accuracy"])))
        for stratum, acc in result.get("per_stratum", {}).items():
            grouped.setdefault((*base, stratum), []).append((seed, float(acc)))
    rows: dict[RowKey, CellStats] = {}
    for key, pairs in grouped.items():
        pairs.sort()
        accs = np.array([a for _, a in pairs], dtype=np.float64)
        rows[key] = CellStats(
            mean=float(np.mean(accs)),
            std=float(np.std(accs)),
            n_seeds=len(pairs),
            seeds=tuple(s for s, _ in pairs),
            per_seed=tuple(float(a) for _, a in pairs),
        )
    return ResultTable(rows=rows, failures=tuple(failures))


def load_results(results_dir: str | Path) -> ResultTable:
    """Rebuild a ResultTable from a results directory's cell files."""
    cells_dir = Path(results_dir) / "cells"
    if not cells_dir.is_dir():
        raise FileNotFoundError(f"{cells_dir} does not exist")
    records = []
    for path in sorted(cells_dir.glob("*.json")):
        records.append(json.loads(path.read_text(encoding="utf-8")))
    return aggregate_cells(records)


def _task_sort_key(task: str) -> tuple[int, int]:
    base = task_base(task)
    return (TASK_ORDER.index(base), evnttyp_n(task) if base == "evnttyp" else 0)


def _stratum_sort_key(stratum: str) -> tuple[int, str]:
    if stratum in STRATUM_ORDER:
        return (STRATUM_ORDER.index(stratum), stratum)
    return (len(STRATUM_ORDER), stratum)


def _sorted_keys(table: ResultTable) -> list[RowKey]:
    return sorted(
        table.rows,
        key=lambda k: (_task_sort_key(k[0]), k[1], k[2], _stratum_sort_key(k[3])),
    )


def render_csv(table: ResultTable) -> str:
    """One row per (task, bundle, layer, stratum); raw float repr for exact reload."""
    all_seeds = sorted({s for stats in table.rows.values() for s in stats.seeds})
    header = ["task", "bundle", "layer", "stratum", "n_seeds", "mean", "std"]
    header += [f"acc_seed{s}" for s in all_seeds]
    lines = [",".join(header)]
    for key in _sorted_keys(table):
        task, bundle, layer, stratum = key
        stats = table.rows[key]
        by_seed = dict(zip(stats.seeds, stats.per_seed))
        row = [task, bundle, str(layer), stratum, str(stats.n_seeds), repr(stats.mean), repr(stats.std)]
        row += [repr(by_seed[s]) if s in by_seed else "" for s in all_seeds]
        lines.append(",".join(row))
    return "\n".join(lines) + "\n"


def render_markdown(table: ResultTable) -> str:
    """Tasks grouped into families; cells show percent mean +/- std over seeds."""
    parts: list[str] = ["# Probing results", ""]
    tasks_present = sorted({k[0] for k in table.rows}, key=_task_sort_key)
    for family, members in TASK_FAMILIES:
        family_tasks = [t for t in tasks_present if task_base(t) in members]
        if not family_tasks:
            continue
        keys = sorted(
            {(k[1], k[2], k[3]) for k in table.rows if k[0] in family_tasks},
            key=lambda k: (k[0], k[1], _stratum_sort_key(k[2])),
        )
        parts.append(f"## {family}")
        parts.append("")
        header = ["bundle", "layer", "stratum"] + [display_name(t) for t in family_tasks]
        parts.append("| " + " | ".join(header) + " |")
        parts.append("|" + "---|" * len(header))
        for bundle, layer, stratum in keys:
            cells = [bundle, str(layer), stratum]
            for task in family_tasks:
                stats = table.rows.get((task, bundle, layer, stratum))
                if stats is None:
                    cells.append("-")
                else:
                    cells.append(f"{100 * stats.mean:.2f}±{100 * stats.std:.2f}")
            parts.append("| " + " | ".join(cells) + " |")
        parts.append("")
    if table.failures:
        parts.append("## failed cells")
        parts.append("")
        for f in table.failures:
            parts.append(
                f"- {f['task']} / {f['bundle']} / layer {f['layer']} / seed {f['seed']}: {f['error']}"
            )
        parts.append("")
    return "\n".join(parts)


def render_report(table: ResultTable, format: str, out_dir: str | Path) -> list[Path]:
    """Write report.csv and/or report.md; returns the written paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    if format in ("csv", "both"):
        path = out / "report.csv"
        path.write_text(render_csv(table), encoding="utf-8")
        paths.append(path)
    if format in ("markdown", "both"):
        path = out / "report.md"
        path.write_text(render_markdown(table), encoding="utf-8")
        paths.append(path)
    if not paths:
        raise ValueError(f"unknown report format {format!r}")
    return paths


def compare_modes(table_fulltext: ResultTable, table_sentcat: ResultTable) -> ResultTable:
    """Per-cell delta table (SentCat minus FullText); stds combine in quadrature.

    Both tables must hold exactly one bundle each and cover the same
    (task, layer, stratum) cells; mismatched coverage raises KeyMismatch.
    """

    def single_bundle(table: ResultTable, name: str) -> str:
        labels = {k[1] for k in table.rows}
        if len(labels) != 1:
            raise ValueError(f"{name} table must hold exactly one bundle, got {sorted(labels)}")
        return labels.pop()

    ft_label = single_bundle(table_fulltext, "fulltext")
    sc_label = single_bundle(table_sentcat, "sentcat")
    ft = {(k[0], k[2], k[3]): v for k, v in table_fulltext.rows.items()}
    sc = {(k[0], k[2], k[3]): v for k, v in table_sentcat.rows.items()}
    if set(ft) != set(sc):
        only_ft = sorted(set(ft) - set(sc))
        only_sc = sorted(set(sc) - set(ft))
        raise KeyMismatch(f"cells only in fulltext: {only_ft}; only in sentcat: {only_sc}")
    label = f"{sc_label}-minus-{ft_label}"
    rows: dict[RowKey, CellStats] = {}
    for key in ft:
        a, b = ft[key], sc[key]
        if a.seeds == b.seeds:
            per_seed = tuple(float(y - x) for x, y in zip(a.per_seed, b.per_seed))
            seeds = a.seeds
        else:
            per_seed = ()
            seeds = ()
        rows[(key[0], label, key[1], key[2])] = CellStats(
            mean=float(b.mean - a.mean),
            std=float(np.sqrt(a.std**2 + b.std**2)),
            n_seeds=min(a.n_seeds, b.n_seeds),
            seeds=seeds,
            per_seed=per_seed,
        )
    return ResultTable(rows=rows, failures=table_fulltext.failures + table_sentcat.failures)
