"""Experiment orchestration over the analytic mixture worlds.

Turns a declarative run config into a persisted, reproducible run artifact
directory; provides comparison tables across runs and figure-data emission
(shared-basis PCA scatters, KDE grids, agreement curves).

Run store layout (one directory per run id under the output directory):

    <out>/<run_id>/
        manifest.json        config, config hash, build id, file hashes
        samples.csv          seed, final-sample coordinates, final label
        ledgers.json         seed -> accumulated negative tokens (in order)
        report.json          metrics over final samples
        transcripts/seed_<n>.jsonl   one line per step

Run ids are deterministic: the first 12 hex digits of the config hash plus
the mode name, so re-running the same config overwrites the same directory
with identical samples.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from pathlib import Path
from typing import Sequence

import numpy as np
import yaml

from . import __version__, preset_world_path
from .errors import (
    ConfigError,
    IncompatibleRuns,
    MissingReplaySource,
    SamplingError,
)
from .guidance import (
    Adaptive,
    NegativeLedger,
    NoAccumulation,
    QuerySchedule,
    ReplayCrossSeed,
    ReplayPerSeed,
    StaticList,
    ledger_update,
)
from .metrics import MetricsReport, evaluate, fit_pca_basis, kde_grid
from .sampler import GuidanceConfig, TimeGrid, Trajectory, sample
from .world import (
    MixtureWorld,
    anchor_embedding,
    condition_from_prompt,
    mock_vlm,
    velocity,
)

MODES = (
    "adaptive",
    "baseline",
    "static",
    "replay-per-seed",
    "replay-cross-seed",
    "no-accumulation",
)
# The five controller ablations (baseline is adaptive minus queries).
ABLATION_MODES = (
    "adaptive",
    "static",
    "replay-per-seed",
    "replay-cross-seed",
    "no-accumulation",
)


@dataclass(frozen=True)
class RunConfig:
    world: str
    category: str
    label_category: str | None = None
    questions: tuple[str, ...] = ("subcategory",)
    mode: str = "adaptive"
    w: float = 2.0
    total_steps: int = 28
    t_floor: float = 1e-3
    t_start: int = 0
    t_stop: int = 14
    frequency: int = 1
    seeds: tuple[int, ...] = tuple(range(200))
    out: str = "runs"
    static_negatives: tuple[str, ...] = ()
    source_run: str | None = None
    oracle_threshold: float = math.inf
    label_threshold: float = 3.0
    workers: int = 1

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        if not self.seeds:
            raise ConfigError("seeds must be non-empty")
        if len(set(self.seeds)) != len(self.seeds):
            raise ConfigError("seeds must be unique")
        if self.mode == "static" and not self.static_negatives:
            raise ConfigError("static mode requires static_negatives")
        if self.mode.startswith("replay-") and not self.source_run:
            raise ConfigError(f"{self.mode} mode requires source_run")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")

    @classmethod
    def from_file(cls, path: str | Path, **overrides) -> "RunConfig":
        try:
            doc = yaml.safe_load(Path(path).read_text())
        except OSError as e:
            raise ConfigError(f"cannot read config {path}: {e}") from e
        except yaml.YAMLError as e:
            raise ConfigError(f"malformed config {path}: {e}") from e
        if not isinstance(doc, dict):
            raise ConfigError(f"config {path} must be a mapping")
        return cls.from_dict({**doc, **overrides})

    @classmethod
    def from_dict(cls, doc: dict) -> "RunConfig":
        doc = dict(doc)
        window = doc.pop("window", None)
        if window:
            doc.setdefault("t_start", window.get("start", 0))
            doc.setdefault("t_stop", window.get("stop", 0))
            doc.setdefault("frequency", window.get("frequency", 1))
        seeds = doc.get("seeds")
        if isinstance(seeds, dict):
            doc["seeds"] = tuple(range(seeds.get("start", 0), seeds.get("start", 0) + seeds["count"]))
        elif seeds is not None:
            doc["seeds"] = tuple(int(s) for s in seeds)
        for key in ("questions", "static_negatives"):
            if key in doc and doc[key] is not None:
                doc[key] = tuple(doc[key])
        known = set(cls.__dataclass_fields__)
        extra = set(doc) - known
        if extra:
            raise ConfigError(f"unknown config fields: {sorted(extra)}")
        try:
            return cls(**{k: v for k, v in doc.items() if v is not None})
        except TypeError as e:
            raise ConfigError(str(e)) from e

    def canonical(self) -> dict:
        doc = {
            "world": self.world,
            "category": self.category,
            "label_category": self.label_category,
            "questions": list(self.questions),
            "mode": self.mode,
            "w": self.w,
            "total_steps": self.total_steps,
            "t_floor": self.t_floor,
            "t_start": self.t_start,
            "t_stop": self.t_stop,
            "frequency": self.frequency,
            "seeds": list(self.seeds),
            "static_negatives": list(self.static_negatives),
            "source_run": self.source_run,
            "oracle_threshold": self.oracle_threshold,
            "label_threshold": self.label_threshold,
        }
        return doc

    @property
    def config_hash(self) -> str:
        blob = json.dumps(self.canonical(), sort_keys=True, default=str)
        return hashlib.sha256(blob.encode()).hexdigest()

    @property
    def run_id(self) -> str:
        return f"{self.config_hash[:12]}-{self.mode}"


@dataclass(frozen=True)
class RunArtifacts:
    run_id: str
    path: Path
    config: RunConfig
    seeds: tuple[int, ...]
    finals: np.ndarray
    labels: tuple[str, ...]
    ledgers: dict[int, list[str]]
    report: MetricsReport
    failures: dict[int, str] = field(default_factory=dict)


def resolve_world_path(name_or_path: str) -> Path:
    p = Path(name_or_path)
    if p.exists():
        return p
    try:
        preset = Path(preset_world_path(name_or_path))
    except (FileNotFoundError, ModuleNotFoundError) as e:
        raise ConfigError(f"world {name_or_path!r} is neither a file nor a preset") from e
    if not preset.exists():
        raise ConfigError(f"world {name_or_path!r} is neither a file nor a preset")
    return preset


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def replay_source(run_id: str, store_dir: str | Path, seed: int) -> NegativeLedger:
    """Load the persisted final ledger of one seed of a stored run."""
    ledger_file = Path(store_dir) / run_id / "ledgers.json"
    if not ledger_file.exists():
        raise MissingReplaySource(f"run {run_id!r} not found in {store_dir}")
    ledgers = json.loads(ledger_file.read_text())
    key = str(seed)
    if key not in ledgers:
        raise MissingReplaySource(f"run {run_id!r} has no ledger for seed {seed}")
    return ledger_update(NegativeLedger(), ledgers[key], 0)


def _load_source_ledgers(run_id: str, store_dir: Path) -> dict[int, list[str]]:
    ledger_file = store_dir / run_id / "ledgers.json"
    if not ledger_file.exists():
        raise MissingReplaySource(f"run {run_id!r} not found in {store_dir}")
    raw = json.loads(ledger_file.read_text())
    return {int(k): list(v) for k, v in raw.items()}


def _controller_for_seed(config: RunConfig, seed: int, source: dict[int, list[str]] | None):
    """Mode name -> (ControllerMode, questions, replay store) for one seed."""
    if config.mode == "adaptive":
        return Adaptive(), config.questions, None
    if config.mode == "baseline":
        return Adaptive(), (), None
    if config.mode == "no-accumulation":
        return NoAccumulation(), config.questions, None
    if config.mode == "static":
        return StaticList(config.static_negatives), (), None
    assert source is not None
    if seed not in source:
        raise MissingReplaySource(
            f"run {config.source_run!r} has no ledger for seed {seed}"
        )
    if config.mode == "replay-per-seed":
        tokens = source[seed]
        mode = ReplayPerSeed(config.source_run)
    else:
        # Cross-seed: rotate the assignment by one position in seed order.
        order = sorted(source)
        tokens = source[order[(order.index(seed) + 1) % len(order)]]
        mode = ReplayCrossSeed(config.source_run)
    ledger = ledger_update(NegativeLedger(), tokens, 0)
    return mode, (), (lambda run_id, ledger=ledger: ledger)


def _run_seed(
    config: RunConfig,
    world: MixtureWorld,
    grid: TimeGrid,
    seed: int,
    source: dict[int, list[str]] | None,
) -> Trajectory:
    label_cat = config.label_category or config.category

    def field_fn(x, t, cond):
        return velocity(world, x, t, cond)

    def conditioner(neg_text):
        return condition_from_prompt(config.category, neg_text, world)

    def oracle(obs, question):
        return mock_vlm(obs, question, world, category=label_cat,
                        threshold=config.oracle_threshold)

    mode, questions, store = _controller_for_seed(config, seed, source)
    gconf = GuidanceConfig(
        schedule=QuerySchedule(config.t_start, config.t_stop, config.frequency),
        mode=mode,
        w=config.w,
        questions=questions,
    )
    return sample(field_fn, conditioner, oracle, lambda z: z, gconf, grid,
                  seed, world.dimension, store=store)


def run_experiment(config: RunConfig, store_dir: str | Path | None = None) -> RunArtifacts:
    """Execute one seeded batch and persist its artifact directory.

    Seeds are isolated: a failing seed is recorded in the manifest and
    excluded from the samples table and metrics; siblings proceed.
    """
    store_dir = Path(store_dir if store_dir is not None else config.out)
    world_path = resolve_world_path(config.world)
    world = MixtureWorld.from_file(world_path)
    label_cat = config.label_category or config.category
    for cat in (config.category, label_cat):
        if cat not in world.taxonomy:
            raise ConfigError(f"category {cat!r} not in world taxonomy")
    if config.t_stop > config.total_steps:
        raise ConfigError("t_stop must be <= total_steps")
    grid = TimeGrid.uniform(config.total_steps, config.t_floor)

    source = None
    if config.mode.startswith("replay-"):
        source = _load_source_ledgers(config.source_run, store_dir)

    results: dict[int, Trajectory] = {}
    failures: dict[int, str] = {}

    def one(seed: int):
        try:
            results[seed] = _run_seed(config, world, grid, seed, source)
        except MissingReplaySource:
            raise
        except SamplingError as e:
            failures[seed] = str(e)

    if config.workers > 1:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            list(pool.map(one, config.seeds))
    else:
        for s in config.seeds:
            one(s)

    ok_seeds = tuple(s for s in config.seeds if s in results)
    finals = np.array([results[s].final_sample for s in ok_seeds])
    labeler = lambda x: mock_vlm(x, "subcategory", world, category=label_cat,
                                 threshold=config.label_threshold)
    labels = tuple(labeler(results[s].final_sample) for s in ok_seeds)
    ledgers = {s: results[s].final_ledger.tokens() for s in ok_seeds}

    anchor = anchor_embedding(config.category, world)
    sub_anchors = [
        anchor_embedding(world.components[i].label, world)
        for i in sorted(world.category_indices(label_cat))
    ]
    report = evaluate(finals, labels, anchor, sub_anchors)

    run_dir = store_dir / config.run_id
    (run_dir / "transcripts").mkdir(parents=True, exist_ok=True)

    with open(run_dir / "samples.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["seed"] + [f"x{j}" for j in range(world.dimension)] + ["label"])
        for s, lab in zip(ok_seeds, labels):
            writer.writerow([s] + [repr(float(v)) for v in results[s].final_sample] + [lab])

    (run_dir / "ledgers.json").write_text(
        json.dumps({str(s): ledgers[s] for s in ok_seeds}, indent=2, sort_keys=True)
    )
    (run_dir / "report.json").write_text(json.dumps(report.to_dict(), indent=2, sort_keys=True))

    for s in ok_seeds:
        lines = []
        final_label = labeler(results[s].final_sample)
        for rec in results[s].records:
            lines.append(json.dumps({
                "step": rec.step,
                "t": rec.t,
                "x0_hat": [float(v) for v in rec.x0_hat],
                "answers": list(rec.answers),
                "negative_prompt": rec.negative_prompt,
                "step_label": labeler(rec.x0_hat),
            }, sort_keys=True))
        lines.append(json.dumps({
            "step": config.total_steps,
            "final": [float(v) for v in results[s].final_sample],
            "final_label": final_label,
            "step_label": final_label,
        }, sort_keys=True))
        (run_dir / "transcripts" / f"seed_{s}.jsonl").write_text("\n".join(lines) + "\n")

    files = {
        str(p.relative_to(run_dir)): _sha256(p)
        for p in sorted(run_dir.rglob("*")) if p.is_file() and p.name != "manifest.json"
    }
    manifest = {
        "run_id": config.run_id,
        "config": config.canonical(),
        "config_hash": config.config_hash,
        "build_id": __version__,
        "created": datetime.now(timezone.utc).isoformat(),
        "world_sha256": _sha256(world_path),
        "files": files,
        "failures": {str(k): v for k, v in sorted(failures.items())},
    }
    (run_dir / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True))

    return RunArtifacts(
        run_id=config.run_id,
        path=run_dir,
        config=config,
        seeds=ok_seeds,
        finals=finals,
        labels=labels,
        ledgers=ledgers,
        report=report,
        failures=failures,
    )


def verify_manifest(run_dir: str | Path) -> bool:
    """Re-hash every listed file and check it against the manifest."""
    run_dir = Path(run_dir)
    manifest = json.loads((run_dir / "manifest.json").read_text())
    return all(
        (run_dir / rel).is_file() and _sha256(run_dir / rel) == digest
        for rel, digest in manifest["files"].items()
    )


def load_run(run_id: str, store_dir: str | Path) -> RunArtifacts:
    run_dir = Path(store_dir) / run_id
    if not (run_dir / "manifest.json").exists():
        raise MissingReplaySource(f"run {run_id!r} not found in {store_dir}")
    manifest = json.loads((run_dir / "manifest.json").read_text())
    config = RunConfig.from_dict(manifest["config"])
    seeds, finals, labels = [], [], []
    with open(run_dir / "samples.csv", newline="") as fh:
        for row in csv.DictReader(fh):
            seeds.append(int(row["seed"]))
            finals.append([float(row[k]) for k in row if k.startswith("x")])
            labels.append(row["label"])
    ledgers = {int(k): v for k, v in json.loads((run_dir / "ledgers.json").read_text()).items()}
    report_doc = json.loads((run_dir / "report.json").read_text())
    report_doc["bandwidths"] = tuple(report_doc.get("bandwidths", ()))
    report = MetricsReport(**report_doc)
    return RunArtifacts(
        run_id=run_id,
        path=run_dir,
        config=config,
        seeds=tuple(seeds),
        finals=np.array(finals),
        labels=tuple(labels),
        ledgers=ledgers,
        report=report,
        failures={int(k): v for k, v in manifest.get("failures", {}).items()},
    )


# Comparison columns: (header, report attribute); larger is better for all.
_COLUMNS = (
    ("typicality", "relative_typicality_mean"),
    ("unknown_rate", "unknown_rate"),
    ("variance", "total_variance"),
    ("vendi", "vendi"),
    ("validity", "validity_mean"),
)


@dataclass(frozen=True)
class ComparisonTable:
    rows: tuple[dict, ...]

    def render(self) -> str:
        headers = ["run_id", "mode"] + [h for h, _ in _COLUMNS] + ["n"]
        lines = ["\t".join(headers)]
        for row in self.rows:
            cells = [row["run_id"], row["mode"]]
            for h, _ in _COLUMNS:
                star = "*" if row["best"][h] else " "
                cells.append(f"{row[h]:.4f}{star}")
            cells.append(str(row["n"]))
            lines.append("\t".join(cells))
        lines.append("# * = best value in column; larger is better for every column")
        return "\n".join(lines)

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["run_id", "mode"] + [h for h, _ in _COLUMNS]
                            + [f"best_{h}" for h, _ in _COLUMNS] + ["n"])
            for row in self.rows:
                writer.writerow(
                    [row["run_id"], row["mode"]]
                    + [repr(row[h]) for h, _ in _COLUMNS]
                    + [int(row["best"][h]) for h, _ in _COLUMNS]
                    + [row["n"]]
                )


def compare(runs: Sequence[RunArtifacts]) -> ComparisonTable:
    """One row per run with the best value per metric column flagged."""
    if not runs:
        raise IncompatibleRuns("nothing to compare")
    worlds = {r.config.world for r in runs}
    cats = {r.config.category for r in runs}
    if len(worlds) > 1 or len(cats) > 1:
        raise IncompatibleRuns(
            f"runs mix worlds {sorted(worlds)} / categories {sorted(cats)}"
        )
    ordered = sorted(runs, key=lambda r: r.run_id)
    rows = []
    for r in ordered:
        row = {"run_id": r.run_id, "mode": r.config.mode, "n": r.report.n}
        for h, attr in _COLUMNS:
            row[h] = getattr(r.report, attr)
        rows.append(row)
    for h, _ in _COLUMNS:
        best = max(row[h] for row in rows)
        for row in rows:
            row.setdefault("best", {})[h] = row[h] == best
    return ComparisonTable(tuple(rows))


def emit_figures(runs: Sequence[RunArtifacts], out_dir: str | Path) -> dict[str, Path]:
    """Write figure data: PCA scatters on a basis shared across runs, KDE
    grids on a shared extent, and per-step agreement curves.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written: dict[str, Path] = {}

    union = np.vstack([r.finals for r in runs])
    mean, dirs = fit_pca_basis(union)
    projected = {r.run_id: (r.finals - mean) @ dirs.T for r in runs}

    all_pts = np.vstack(list(projected.values()))
    lo = all_pts.min(axis=0)
    hi = all_pts.max(axis=0)
    # Pad the shared extent by the widest kernel so each run's grid captures
    # essentially all of its probability mass.
    h_max = max(
        np.max(pts.std(axis=0, ddof=1) * len(pts) ** (-1.0 / 6.0))
        for pts in projected.values()
    )
    pad = np.maximum(0.1 * (hi - lo), 3.0 * h_max)
    extent = (lo[0] - pad[0], hi[0] + pad[0], lo[1] - pad[1], hi[1] + pad[1])

    for r in runs:
        pts = projected[r.run_id]
        scatter = out_dir / f"{r.run_id}_scatter.csv"
        with open(scatter, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["seed", "pc1", "pc2", "label"])
            for s, p, lab in zip(r.seeds, pts, r.labels):
                writer.writerow([s, repr(float(p[0])), repr(float(p[1])), lab])
        written[f"{r.run_id}_scatter"] = scatter

        grid, (xmin, xmax, ymin, ymax), _ = kde_grid(pts, grid_size=50, extent=extent)
        # Persist per-cell probability mass (density x cell area) so a grid
        # covering its data sums to ~1.
        cell_area = (xmax - xmin) * (ymax - ymin) / grid.size
        kde_path = out_dir / f"{r.run_id}_kde.txt"
        np.savetxt(kde_path, grid * cell_area)
        written[f"{r.run_id}_kde"] = kde_path

        curve = _agreement_curve(r)
        agree_path = out_dir / f"{r.run_id}_agreement.csv"
        with open(agree_path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["step", "agreement"])
            for step, val in curve:
                writer.writerow([step, repr(val)])
        written[f"{r.run_id}_agreement"] = agree_path

    extent_path = out_dir / "kde_extent.txt"
    np.savetxt(extent_path, np.array(extent))
    written["kde_extent"] = extent_path
    return written


def _agreement_curve(run: RunArtifacts) -> list[tuple[int, float]]:
    """Mean per-step fraction of seeds whose step label matches the final
    label; the appended final point compares the final sample to itself and
    is therefore exactly 1.0.
    """
    per_step: dict[int, list[bool]] = {}
    for s in run.seeds:
        lines = (run.path / "transcripts" / f"seed_{s}.jsonl").read_text().splitlines()
        entries = [json.loads(ln) for ln in lines]
        final_label = entries[-1]["final_label"]
        for e in entries:
            per_step.setdefault(e["step"], []).append(e["step_label"] == final_label)
    return [(step, float(np.mean(vals))) for step, vals in sorted(per_step.items())]


def ablate(config: RunConfig, store_dir: str | Path | None = None) -> list[RunArtifacts]:
    """Expand one config into the five controller ablations and run them all.

    The adaptive run executes first so the replay modes can consume its
    persisted ledgers; the static list is the union of adaptive tokens when
    none was given.
    """
    store_dir = Path(store_dir if store_dir is not None else config.out)
    adaptive = run_experiment(replace(config, mode="adaptive"), store_dir)
    static_tokens = config.static_negatives
    if not static_tokens:
        seen: list[str] = []
        for s in adaptive.seeds:
            for tok in adaptive.ledgers[s]:
                if tok not in seen:
                    seen.append(tok)
        static_tokens = tuple(seen)
    out = [adaptive]
    for mode in ABLATION_MODES[1:]:
        cfg = replace(
            config,
            mode=mode,
            static_negatives=static_tokens if mode == "static" else config.static_negatives,
            source_run=adaptive.run_id if mode.startswith("replay-") else config.source_run,
        )
        out.append(run_experiment(cfg, store_dir))
    return out
