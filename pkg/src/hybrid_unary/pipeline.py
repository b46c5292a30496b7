"""Config-driven, deterministic end-to-end runs.

Run directory layout::

    <out>/manifest.json                 config, config hash, stage log, artifact digests
    <out>/comparison.csv                one row per (dataset, variant, coefficient table)
    <out>/summary.json, summary.txt     accuracy and cost table
    <out>/<dataset>/data.csv, data.json normalized snapshot with split
    <out>/<dataset>/<variant>/          model.json, accuracy.json, netlist.txt,
                                        equivalence.json, cost-<table>.json

Variant directories are ``baseline``, ``hybrid`` and ``hybrid-pow2``. Every
artifact records the config hash and seed; a stage that finds an input
artifact from a different config refuses to use it.

Sub-seeds derived from the single config seed: ``seed`` for the train/test
split, ``[seed, 1]`` for the validation slice, ``[seed, 2, restart]`` for
weight initialization, ``[seed, 3]`` for pow2 retraining and ``[seed, 4]``
for randomized equivalence vectors.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import costmodel
from .dataset import IngestionError, load_manifest, load_snapshot, prepare, save_snapshot
from .models import (REFERENCE_ACCURACY, REFERENCE_SHAPES, FixedPointConfig, Pow2Config,
                     Topology, TrainingParams, fit_baseline, infer_topology, input_levels,
                     pow2_retrain, to_hybrid)
from .models.io import load_model, load_model_meta, save_model
from .netlist import (GATE_KINDS, compute_unused_bits, load_netlist, lower_full, save_netlist,
                      to_verilog)
from .simulator import EXHAUSTIVE_LIMIT, Plan, check_equivalence

log = logging.getLogger(__name__)

RUN_FORMAT = "hybrid-unary-run"
VERSION = 1
VARIANTS = ("baseline", "hybrid", "hybrid+pow2")
VARIANT_DIRS = {"baseline": "baseline", "hybrid": "hybrid", "hybrid+pow2": "hybrid-pow2"}
STAGES = ("ingest", "train", "hybridize", "pow2", "lower", "simulate", "cost", "report")


class ConfigError(ValueError):
    """Invalid configuration or missing inputs, found before any work."""


class MissingArtifactError(ConfigError):
    """A stage ran before the stage that produces its inputs."""


class StageError(RuntimeError):
    def __init__(self, stage: str, message: str):
        super().__init__(f"stage {stage}: {message}")
        self.stage = stage


class EquivalenceFailure(RuntimeError):
    pass


# ---------------------------------------------------------------- config

def _sha256(path: Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


@dataclass(frozen=True)
class RunConfig:
    datasets: tuple[Path, ...]
    seed: int = 0
    fixed_point: FixedPointConfig = FixedPointConfig()
    training: TrainingParams = TrainingParams()
    pow2: Pow2Config = Pow2Config()
    coefficients: tuple[Path, ...] = ()
    variants: tuple[str, ...] = VARIANTS
    hidden: dict = field(default_factory=dict)
    equivalence_samples: int = 1000
    out: Path = Path("runs/default")

    def validate(self) -> None:
        if not self.datasets:
            raise ConfigError("config lists no datasets")
        bad = [v for v in self.variants if v not in VARIANTS]
        if bad:
            raise ConfigError(f"unknown variant(s) {bad}; choose from {list(VARIANTS)}")
        if "baseline" not in self.variants:
            raise ConfigError("the baseline variant is required as the cost reference")
        if self.equivalence_samples < 1000:
            raise ConfigError("equivalence_samples must be at least 1000")
        missing = []
        names = []
        for m in self.datasets:
            try:
                schema = load_manifest(m)
            except IngestionError as exc:
                missing.append(str(exc))
                continue
            names.append(schema.name)
            if not schema.path.exists():
                missing.append(f"dataset {schema.name}: data file not found: {schema.path}")
            try:
                self.topology_for(schema.name, len(schema.features), len(schema.classes))
            except ValueError as exc:
                missing.append(f"dataset {schema.name}: {exc}")
        if len(set(names)) != len(names):
            missing.append("dataset names must be unique")
        for c in self.coefficients:
            try:
                costmodel.TechCoefficients.load(c)
            except (OSError, costmodel.CoefficientError) as exc:
                missing.append(f"coefficient table {c}: {exc}")
        if missing:
            raise ConfigError("; ".join(missing))

    def topology_for(self, name: str, inputs: int, classes: int) -> Topology:
        if name in self.hidden:
            return Topology(inputs, int(self.hidden[name]), classes)
        if name in REFERENCE_SHAPES:
            ri, rc, macs = REFERENCE_SHAPES[name]
            if (ri, rc) != (inputs, classes):
                raise ConfigError(f"reference shape {ri}x{rc} does not match "
                                  f"data {inputs}x{classes}")
            return infer_topology(inputs, classes, macs)
        raise ConfigError("no reference shape; set 'hidden' for this dataset")

    def coefficient_tables(self) -> list[costmodel.TechCoefficients]:
        if not self.coefficients:
            return [costmodel.TechCoefficients.default()]
        return [costmodel.TechCoefficients.load(c) for c in self.coefficients]

    def fingerprint(self) -> dict:
        """Everything that determines the artifacts, independent of file locations."""
        datasets = []
        for m in self.datasets:
            schema = load_manifest(m)
            datasets.append({"name": schema.name, "manifest": _sha256(m),
                             "data": _sha256(schema.path) if schema.path.exists() else None})
        return {
            "datasets": datasets,
            "seed": self.seed,
            "fixed_point": asdict(self.fixed_point),
            "training": asdict(self.training),
            "pow2": asdict(self.pow2),
            "coefficients": [t.to_dict() for t in self.coefficient_tables()],
            "variants": list(self.variants),
            "hidden": dict(sorted(self.hidden.items())),
            "equivalence_samples": self.equivalence_samples,
            "format_version": VERSION,
        }

    def config_hash(self) -> str:
        text = json.dumps(self.fingerprint(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()[:16]


def load_config(path: str | Path | None, seed: int | None = None,
                out: str | Path | None = None) -> RunConfig:
    """Read a JSON run config; relative paths resolve against the config file."""
    doc, base = {}, Path.cwd()
    if path is not None:
        path = Path(path)
        try:
            doc = json.loads(path.read_text())
        except FileNotFoundError:
            raise ConfigError(f"config not found: {path}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {path} is not valid JSON: {exc}") from None
        base = path.parent
    known = {"datasets", "seed", "fixed_point", "training", "pow2", "coefficients",
             "variants", "hidden", "equivalence_samples", "out"}
    unknown = set(doc) - known
    if unknown:
        raise ConfigError(f"unknown config key(s): {sorted(unknown)}")
    try:
        training = dict(doc.get("training", {}))
        if "weight_clip" in training:
            training["weight_clip"] = tuple(training["weight_clip"])
        cfg = RunConfig(
            datasets=tuple((base / p).resolve() for p in doc.get("datasets", [])),
            seed=int(doc.get("seed", 0) if seed is None else seed),
            fixed_point=FixedPointConfig(**doc.get("fixed_point", {})),
            training=TrainingParams(**training),
            pow2=Pow2Config(**doc.get("pow2", {})),
            coefficients=tuple((base / p).resolve() for p in doc.get("coefficients", [])),
            variants=tuple(doc.get("variants", VARIANTS)),
            hidden={str(k): int(v) for k, v in doc.get("hidden", {}).items()},
            equivalence_samples=int(doc.get("equivalence_samples", 1000)),
            out=Path(out) if out is not None else (base / doc.get("out", "runs/default")),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid config: {exc}") from None
    return cfg


# ---------------------------------------------------------------- run context

def _dump(doc) -> str:
    return json.dumps(doc, sort_keys=True, indent=1) + "\n"


class Run:
    """One run directory bound to one config."""

    def __init__(self, config: RunConfig):
        config.validate()
        self.config = config
        self.out = Path(config.out)
        self.hash = config.config_hash()
        self.provenance = {"config_hash": self.hash, "seed": config.seed}
        self.schemas = [load_manifest(m) for m in config.datasets]

    # paths
    def ds_dir(self, name: str) -> Path:
        return self.out / name

    def var_dir(self, name: str, variant: str) -> Path:
        return self.out / name / VARIANT_DIRS[variant]

    def require(self, path: Path, stage: str) -> Path:
        if not path.exists():
            raise MissingArtifactError(
                f"missing artifact {path} (run the '{stage}' stage first)")
        return path

    def check_provenance(self, found: dict, path: Path) -> None:
        if found.get("config_hash") != self.hash:
            raise MissingArtifactError(
                f"{path} was produced under config hash {found.get('config_hash')}, "
                f"not {self.hash}; rerun the earlier stages")

    def write(self, path: Path, text: str) -> None:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)

    # manifest
    def manifest_path(self) -> Path:
        return self.out / "manifest.json"

    def read_manifest(self) -> dict:
        p = self.manifest_path()
        if p.exists():
            doc = json.loads(p.read_text())
            if doc.get("config_hash") == self.hash:
                return doc
        return {"format": RUN_FORMAT, "version": VERSION, "config_hash": self.hash,
                "seed": self.config.seed, "config": self.config.fingerprint(),
                "datasets": [s.name for s in self.schemas],
                "variants": list(self.config.variants), "stages": []}

    def record(self, stage: str) -> None:
        doc = self.read_manifest()
        if stage not in doc["stages"]:
            doc["stages"] = [s for s in STAGES if s in set(doc["stages"]) | {stage}]
        files = {}
        for p in sorted(self.out.rglob("*")):
            rel = p.relative_to(self.out).as_posix()
            if p.is_file() and rel not in ("manifest.json", "STALE"):
                files[rel] = _sha256(p)
        doc["artifacts"] = files
        self.write(self.manifest_path(), _dump(doc))
        stale = self.out / "STALE"
        if stale.exists() and stale.read_text().split("\n", 1)[0] == stage:
            stale.unlink()

    def mark_stale(self, stage: str, message: str) -> None:
        self.write(self.out / "STALE", f"{stage}\n{message}\n")

    # shared loaders
    def snapshot(self, name: str):
        d = self.ds_dir(name)
        meta = self.require(d / "data.json", "ingest")
        self.check_provenance(json.loads(meta.read_text()).get("provenance", {}), meta)
        return load_snapshot(d / "data.csv", meta)

    def model(self, name: str, variant: str, stage: str):
        p = self.require(self.var_dir(name, variant) / "model.json", stage)
        self.check_provenance(load_model_meta(p).get("provenance", {}), p)
        return load_model(p)

    def levels(self, snap) -> np.ndarray:
        return input_levels(snap.dataset.features, self.config.fixed_point)


# ---------------------------------------------------------------- stages

def _accuracy_doc(run: Run, model, snap, extra: dict | None = None) -> dict:
    lv, y = run.levels(snap), snap.dataset.labels
    fit, val = snap.split.validation_holdout()

    def acc(idx):
        idx = np.asarray(idx, dtype=np.int64)
        return float((model.forward_levels(lv[idx])[0] == y[idx]).mean()) if len(idx) else 0.0

    doc = {"dataset": snap.dataset.name, "kind": model.kind,
           "train_accuracy": acc(snap.split.train_indices),
           "validation_accuracy": acc(val), "test_accuracy": acc(snap.split.test_indices),
           "test_size": len(snap.split.test_indices), "provenance": run.provenance}
    doc.update(extra or {})
    return doc


def stage_ingest(run: Run) -> None:
    for schema in run.schemas:
        snap = prepare(schema, run.config.seed)
        d = run.ds_dir(schema.name)
        d.mkdir(parents=True, exist_ok=True)
        save_snapshot(snap, d / "data.csv", d / "data.json", run.provenance)
        log.info("ingest %s: %d rows", schema.name, len(snap.dataset))


def stage_train(run: Run) -> None:
    for schema in run.schemas:
        snap = run.snapshot(schema.name)
        ds = snap.dataset
        topo = run.config.topology_for(ds.name, ds.num_features, ds.num_classes)
        lv = run.levels(snap)
        fit, val = (np.asarray(i, dtype=np.int64) for i in snap.split.validation_holdout())
        fm, q = fit_baseline(lv[fit], ds.labels[fit], lv[val], ds.labels[val], topo,
                             run.config.fixed_point, run.config.training, run.config.seed)
        te = np.asarray(snap.split.test_indices, dtype=np.int64)
        float_acc = float((fm.predict(lv[te] / run.config.fixed_point.levels)
                           == ds.labels[te]).mean()) if len(te) else 0.0
        d = run.var_dir(ds.name, "baseline")
        d.mkdir(parents=True, exist_ok=True)
        save_model(q, d / "model.json", {"provenance": run.provenance, "dataset": ds.name})
        extra = {"float_test_accuracy": float_acc, "epochs_run": len(fm.history),
                 "reference_accuracy": REFERENCE_ACCURACY.get(ds.name)}
        run.write(d / "accuracy.json", _dump(_accuracy_doc(run, q, snap, extra)))
        log.info("train %s: topology %s", ds.name, topo)


def stage_hybridize(run: Run) -> None:
    for schema in run.schemas:
        snap = run.snapshot(schema.name)
        base = run.model(schema.name, "baseline", "train")
        hyb = to_hybrid(base)
        _, util = compute_unused_bits(hyb)
        d = run.var_dir(schema.name, "hybrid")
        d.mkdir(parents=True, exist_ok=True)
        save_model(hyb, d / "model.json", {"provenance": run.provenance, "dataset": schema.name})
        run.write(d / "accuracy.json", _dump(_accuracy_doc(
            run, hyb, snap, {"utilization": util.to_dict()})))


def stage_pow2(run: Run) -> None:
    cfg = run.config.pow2
    for schema in run.schemas:
        snap = run.snapshot(schema.name)
        hyb = run.model(schema.name, "hybrid", "hybridize")
        lv, y = run.levels(snap), snap.dataset.labels
        fit, val = (np.asarray(i, dtype=np.int64) for i in snap.split.validation_holdout())
        p2, stats = pow2_retrain(hyb, lv[fit], y[fit], lv[val], y[val], cfg, run.config.seed)
        floor = Fraction(str(stats.initial_accuracy)) - Fraction(str(cfg.accuracy_threshold))
        if Fraction(str(stats.final_accuracy)) < floor:
            raise StageError("pow2", f"{schema.name}: validation accuracy fell below the guard")
        d = run.var_dir(schema.name, "hybrid+pow2")
        d.mkdir(parents=True, exist_ok=True)
        save_model(p2, d / "model.json", {"provenance": run.provenance, "dataset": schema.name,
                                          "pow2": stats.to_dict()})
        run.write(d / "accuracy.json", _dump(_accuracy_doc(run, p2, snap,
                                                           {"pow2": stats.to_dict()})))


def _variant_models(run: Run, name: str):
    producer = {"baseline": "train", "hybrid": "hybridize", "hybrid+pow2": "pow2"}
    for v in run.config.variants:
        yield v, run.model(name, v, producer[v])


def stage_lower(run: Run) -> None:
    for schema in run.schemas:
        for v, model in _variant_models(run, schema.name):
            nl = lower_full(model, name=f"{schema.name}_{VARIANT_DIRS[v]}".replace("-", "_"))
            nl.meta["provenance"] = run.provenance
            save_netlist(nl, run.var_dir(schema.name, v) / "netlist.txt")


def _netlist(run: Run, name: str, variant: str):
    p = run.require(run.var_dir(name, variant) / "netlist.txt", "lower")
    nl = load_netlist(p)
    run.check_provenance(nl.meta.get("provenance", {}), p)
    return nl


def equivalence_plan(run: Run, model, samples: np.ndarray) -> list[Plan]:
    plans = []
    if (model.config.levels + 1) ** model.topology.inputs <= EXHAUSTIVE_LIMIT:
        plans.append(Plan.exhaustive())
    plans.append(Plan.randomized(run.config.seed, run.config.equivalence_samples, samples))
    return plans


def stage_simulate(run: Run) -> None:
    failures = []
    for schema in run.schemas:
        snap = run.snapshot(schema.name)
        lv = run.levels(snap)
        for v, model in _variant_models(run, schema.name):
            nl = _netlist(run, schema.name, v)
            reports = [check_equivalence(nl, model, plan)
                       for plan in equivalence_plan(run, model, lv)]
            doc = {"format": "hybrid-unary-equivalence-campaign", "version": VERSION,
                   "dataset": schema.name, "variant": v, "provenance": run.provenance,
                   "verdict": "pass" if all(r.passed for r in reports) else "fail",
                   "reports": [r.to_dict() for r in reports]}
            run.write(run.var_dir(schema.name, v) / "equivalence.json", _dump(doc))
            if doc["verdict"] != "pass":
                failures.append(f"{schema.name}/{v}")
    if failures:
        raise EquivalenceFailure("netlist does not match its model: " + ", ".join(failures))


def stage_cost(run: Run) -> None:
    tables = run.config.coefficient_tables()
    for schema in run.schemas:
        for v in run.config.variants:
            nl = _netlist(run, schema.name, v)
            for t in tables:
                rep = costmodel.estimate(nl, t)
                doc = rep.to_dict()
                doc["provenance"] = run.provenance
                doc["l1_multiplier_gates"] = nl.count(tag_prefix="l1.mul")
                run.write(run.var_dir(schema.name, v) / f"cost-{t.id}.json", _dump(doc))


def _read(run: Run, path: Path, stage: str) -> dict:
    doc = json.loads(run.require(path, stage).read_text())
    run.check_provenance(doc.get("provenance", {}), path)
    return doc


def collect(run: Run) -> list[dict]:
    """One row per (dataset, variant, coefficient table) from completed artifacts."""
    tables = run.config.coefficient_tables()
    rows = []
    for schema in run.schemas:
        per_table = {}
        for v in run.config.variants:
            d = run.var_dir(schema.name, v)
            acc = _read(run, d / "accuracy.json", "train")
            eq = _read(run, d / "equivalence.json", "simulate")
            model = run.model(schema.name, v, "train")
            for t in tables:
                cost = costmodel.CostReport.from_dict(_read(run, d / f"cost-{t.id}.json", "cost"))
                per_table.setdefault(t.id, {})[v] = cost
                t_ = model.topology
                rows.append({
                    "dataset": schema.name, "variant": v, "coefficients": t.id,
                    "inputs": t_.inputs, "hidden": t_.hidden, "classes": t_.classes,
                    "macs": t_.mac_count,
                    "test_accuracy": acc["test_accuracy"],
                    "reference_accuracy": REFERENCE_ACCURACY.get(schema.name),
                    "equivalence": eq["verdict"],
                    "area": cost.area, "power": cost.power,
                    "gates": sum(n for k, n in cost.histogram.items() if k in GATE_KINDS),
                    "adc_comparators": cost.histogram.get("ADC_CMP", 0),
                    "wires": cost.wires,
                    "pow2_converted": acc.get("pow2", {}).get("converted_fraction"),
                    "utilization": acc.get("utilization", {}).get("utilization"),
                })
        for t in tables:
            ref = per_table[t.id]["baseline"]
            for row in rows:
                if row["dataset"] == schema.name and row["coefficients"] == t.id:
                    c = per_table[t.id][row["variant"]]
                    row["area_reduction"] = costmodel.reduction(ref.area, c.area)
                    row["power_reduction"] = costmodel.reduction(ref.power, c.power)
    return rows


COLUMNS = ["dataset", "variant", "coefficients", "inputs", "hidden", "classes", "macs",
           "test_accuracy", "reference_accuracy", "equivalence", "area", "power",
           "area_reduction", "power_reduction", "gates", "adc_comparators", "wires",
           "pow2_converted", "utilization"]


def _fmt(v):
    if isinstance(v, Fraction):
        return f"{float(v):.6f}"
    if isinstance(v, float):
        return f"{v:.6f}"
    return "" if v is None else v


def summarize(rows: list[dict]) -> dict:
    """Per variant and coefficient table, means across datasets."""
    out = {}
    for row in rows:
        key = f"{row['variant']}@{row['coefficients']}"
        out.setdefault(key, []).append(row)
    means = {}
    for key, group in sorted(out.items()):
        means[key] = {
            "datasets": len(group),
            "mean_test_accuracy": float(np.mean([r["test_accuracy"] for r in group])),
            "mean_area_reduction": float(np.mean([float(r["area_reduction"]) for r in group])),
            "mean_power_reduction": float(np.mean([float(r["power_reduction"]) for r in group])),
        }
    return means


def _table(rows: list[dict]) -> str:
    head = ["dataset", "variant", "I-H-C", "MACs", "acc %", "ref %", "area", "power",
            "d_area %", "d_power %", "equiv"]
    lines = ["  ".join(f"{h:>12}" for h in head)]
    for r in rows:
        cells = [r["dataset"], r["variant"], f"{r['inputs']}-{r['hidden']}-{r['classes']}",
                 r["macs"], f"{100 * r['test_accuracy']:.1f}",
                 "" if r["reference_accuracy"] is None else f"{r['reference_accuracy']:.1f}",
                 f"{float(r['area']):.0f}", f"{float(r['power']):.0f}",
                 f"{100 * float(r['area_reduction']):.1f}",
                 f"{100 * float(r['power_reduction']):.1f}", r["equivalence"]]
        lines.append("  ".join(f"{str(c):>12}" for c in cells))
    return "\n".join(lines) + "\n"


def stage_report(run: Run) -> None:
    rows = collect(run)
    buf = io.StringIO()
    w = csv.DictWriter(buf, COLUMNS, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: _fmt(r.get(k)) for k in COLUMNS})
    run.write(run.out / "comparison.csv", buf.getvalue())
    summary = {"format": "hybrid-unary-summary", "version": VERSION,
               "provenance": run.provenance, "means": summarize(rows),
               "rows": [{k: _fmt(r.get(k)) for k in COLUMNS} for r in rows]}
    run.write(run.out / "summary.json", _dump(summary))
    lines = [f"coefficients: {t}\n" + _table([r for r in rows if r["coefficients"] == t])
             for t in dict.fromkeys(r["coefficients"] for r in rows)]
    run.write(run.out / "summary.txt", "\n".join(lines))


STAGE_FUNCS = {"ingest": stage_ingest, "train": stage_train, "hybridize": stage_hybridize,
               "pow2": stage_pow2, "lower": stage_lower, "simulate": stage_simulate,
               "cost": stage_cost, "report": stage_report}


def run_stage(run: Run, stage: str) -> None:
    """Run one stage; on failure the run directory is flagged stale."""
    try:
        STAGE_FUNCS[stage](run)
    except (ConfigError, EquivalenceFailure):
        run.mark_stale(stage, "stage did not complete")
        raise
    except StageError as exc:
        run.mark_stale(stage, str(exc))
        raise
    except Exception as exc:  # any other failure is reported against the stage
        run.mark_stale(stage, repr(exc))
        raise StageError(stage, repr(exc)) from exc
    run.record(stage)


def run_pipeline(config: RunConfig) -> Run:
    run = Run(config)
    for stage in STAGES:
        log.info("stage %s", stage)
        run_stage(run, stage)
    return run


def aggregate_reports(run_dirs: list[Path]) -> list[dict]:
    """Rows from several run directories; their config hashes must agree."""
    hashes = {}
    rows = []
    for d in run_dirs:
        m = Path(d) / "manifest.json"
        if not m.exists():
            raise MissingArtifactError(f"missing artifact {m}")
        doc = json.loads(m.read_text())
        hashes[str(d)] = doc.get("config_hash")
        rows.extend(json.loads((Path(d) / "summary.json").read_text())["rows"])
    if len(set(hashes.values())) > 1:
        raise ConfigError(f"refusing to aggregate runs with different config hashes: {hashes}")
    return rows


def export_hdl(run: Run, dataset: str | None = None) -> list[Path]:
    written = []
    for schema in run.schemas:
        if dataset and schema.name != dataset:
            continue
        for v in run.config.variants:
            nl = _netlist(run, schema.name, v)
            p = run.var_dir(schema.name, v) / f"{nl.name}.v"
            run.write(p, to_verilog(nl))
            written.append(p)
    return written
