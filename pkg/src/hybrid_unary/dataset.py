"""Tabular dataset ingestion, [0, 1] normalization and seeded splits.

Datasets are described by a JSON manifest::

    {
      "name": "balance_scale",
      "path": "../balance-scale.data",     # relative to the manifest
      "delimiter": ",",                    # ",", ";" or "whitespace"
      "header": false,                     # true: first row names columns
      "columns": ["class", "lw", ...],     # required when header is false
      "label": "class",
      "features": ["lw", "ld", "rw", "rd"],
      "classes": {"L": 0, "B": 1, "R": 2}
    }
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from sklearn.preprocessing import MinMaxScaler

TRAIN_FRACTION = (7, 10)
VALIDATION_FRACTION = (2, 10)


class IngestionError(ValueError):
    pass


@dataclass(frozen=True)
class DatasetSchema:
    name: str
    label: str
    features: tuple[str, ...]
    classes: dict[str, int]
    columns: tuple[str, ...] | None = None
    delimiter: str = ","
    header: bool = True
    path: Path | None = None


def load_manifest(path: str | Path) -> DatasetSchema:
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except FileNotFoundError:
        raise IngestionError(f"manifest not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise IngestionError(f"manifest {path} is not valid JSON: {exc}") from None
    for key in ("name", "path", "label", "features", "classes"):
        if key not in raw:
            raise IngestionError(f"manifest {path} lacks '{key}'")
    classes = {str(k): int(v) for k, v in raw["classes"].items()}
    if sorted(classes.values()) != list(range(len(classes))):
        raise IngestionError(f"manifest {path}: class indices must be 0..C-1")
    return DatasetSchema(
        name=raw["name"],
        label=raw["label"],
        features=tuple(raw["features"]),
        classes=classes,
        columns=tuple(raw["columns"]) if raw.get("columns") else None,
        delimiter=raw.get("delimiter", ","),
        header=bool(raw.get("header", True)),
        path=(path.parent / raw["path"]).resolve(),
    )


@dataclass(frozen=True, eq=False)
class Dataset:
    name: str
    features: np.ndarray
    labels: np.ndarray
    num_classes: int
    feature_names: tuple[str, ...] = ()

    def __post_init__(self):
        x = np.array(self.features, dtype=np.float64)
        y = np.array(self.labels, dtype=np.int64)
        if x.ndim != 2 or y.ndim != 1 or len(x) != len(y):
            raise IngestionError("features must be (n, d) and labels (n,)")
        if len(y) and (y.min() < 0 or y.max() >= self.num_classes):
            raise IngestionError("labels must lie in [0, num_classes)")
        x.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "features", x)
        object.__setattr__(self, "labels", y)
        if not self.feature_names:
            names = tuple(f"f{j}" for j in range(x.shape[1]))
            object.__setattr__(self, "feature_names", names)

    def __len__(self) -> int:
        return len(self.labels)

    @property
    def num_features(self) -> int:
        return self.features.shape[1]


def _rows(text: str, delimiter: str) -> list[list[str]]:
    if delimiter == "whitespace":
        return [line.split() for line in text.splitlines() if line.strip()]
    reader = csv.reader(io.StringIO(text), delimiter=delimiter)
    return [[c.strip() for c in row] for row in reader if any(c.strip() for c in row)]


def _label_index(cell: str, classes: dict[str, int]) -> int | None:
    if cell in classes:
        return classes[cell]
    try:
        value = float(cell)
    except ValueError:
        return None
    for key, idx in classes.items():
        try:
            if float(key) == value:
                return idx
        except ValueError:
            continue
    return None


def load_csv(path: str | Path | None, schema: DatasetSchema) -> Dataset:
    """Read a delimited text file into a Dataset, preserving row order."""
    path = Path(path if path is not None else schema.path)
    try:
        text = path.read_text()
    except FileNotFoundError:
        raise IngestionError(f"{schema.name}: data file not found: {path}") from None
    rows = _rows(text, schema.delimiter)
    if schema.header:
        if not rows:
            raise IngestionError(f"{schema.name}: {path} is empty")
        columns = tuple(c.strip().strip('"') for c in rows[0])
        rows = rows[1:]
    else:
        if schema.columns is None:
            raise IngestionError(f"{schema.name}: headerless file needs 'columns'")
        columns = schema.columns
    if not rows:
        raise IngestionError(f"{schema.name}: {path} has no data rows")

    index = {c: j for j, c in enumerate(columns)}
    for col in (schema.label, *schema.features):
        if col not in index:
            raise IngestionError(f"{schema.name}: column '{col}' not in {path}")

    feats = np.empty((len(rows), len(schema.features)), dtype=np.float64)
    labels = np.empty(len(rows), dtype=np.int64)
    first = 2 if schema.header else 1
    for r, row in enumerate(rows):
        lineno = r + first
        if len(row) != len(columns):
            raise IngestionError(
                f"{schema.name}: row {lineno} has {len(row)} cells, expected {len(columns)}"
            )
        for j, col in enumerate(schema.features):
            cell = row[index[col]]
            try:
                value = float(cell)
            except ValueError:
                raise IngestionError(
                    f"{schema.name}: row {lineno}, column '{col}': non-numeric cell {cell!r}"
                ) from None
            if not np.isfinite(value):
                raise IngestionError(
                    f"{schema.name}: row {lineno}, column '{col}': non-finite value"
                )
            feats[r, j] = value
        cell = row[index[schema.label]].strip('"')
        label = _label_index(cell, schema.classes)
        if label is None:
            raise IngestionError(
                f"{schema.name}: row {lineno}, column '{schema.label}': unknown label {cell!r}"
            )
        labels[r] = label
    return Dataset(schema.name, feats, labels, len(schema.classes), schema.features)


@dataclass(frozen=True)
class NormalizationParams:
    minimum: tuple[float, ...]
    maximum: tuple[float, ...]

    def apply(self, features: np.ndarray) -> np.ndarray:
        lo = np.asarray(self.minimum)
        hi = np.asarray(self.maximum)
        scaler = MinMaxScaler(clip=True)
        scaler.fit(np.vstack([lo, hi]))
        out = scaler.transform(np.asarray(features, dtype=np.float64))
        out[:, hi == lo] = 0.0
        return out


def normalize(
    dataset: Dataset, fit_indices: Sequence[int] | None = None
) -> tuple[Dataset, NormalizationParams]:
    """Min-max scale every column to [0, 1].

    Statistics come from ``fit_indices`` (the training rows) when given;
    every other row is clamped into range. Constant columns become 0.
    """
    x = dataset.features
    ref = x if fit_indices is None else x[np.asarray(fit_indices, dtype=np.int64)]
    params = NormalizationParams(
        tuple(float(v) for v in ref.min(axis=0)),
        tuple(float(v) for v in ref.max(axis=0)),
    )
    out = Dataset(
        dataset.name, params.apply(x), dataset.labels,
        dataset.num_classes, dataset.feature_names,
    )
    return out, params


@dataclass(frozen=True)
class Split:
    train_indices: tuple[int, ...]
    test_indices: tuple[int, ...]
    seed: int

    def validation_holdout(self) -> tuple[tuple[int, ...], tuple[int, ...]]:
        """Carve the validation slice (20 %) out of the training rows.

        Returns ``(fit, validation)``; both are disjoint subsets of
        ``train_indices`` and the slice is seeded from ``seed``.
        """
        train = np.asarray(self.train_indices, dtype=np.int64)
        num, den = VALIDATION_FRACTION
        n_val = (len(train) * num) // den
        rng = np.random.default_rng([self.seed, 1])
        perm = rng.permutation(len(train))
        val = np.sort(train[perm[:n_val]])
        fit = np.sort(train[perm[n_val:]])
        return tuple(int(i) for i in fit), tuple(int(i) for i in val)


def train_size(n: int) -> int:
    """round(0.7 n); on an exact tie the test share is floored."""
    num, den = TRAIN_FRACTION
    return (2 * num * n + den) // (2 * den)


def split(dataset: Dataset | int, seed: int) -> Split:
    n = dataset if isinstance(dataset, int) else len(dataset)
    if n <= 0:
        raise IngestionError("cannot split an empty dataset")
    perm = np.random.default_rng(seed).permutation(n)
    k = train_size(n)
    return Split(
        tuple(int(i) for i in np.sort(perm[:k])),
        tuple(int(i) for i in np.sort(perm[k:])),
        seed,
    )


@dataclass
class Snapshot:
    """Normalized dataset plus everything needed to reproduce it."""

    dataset: Dataset
    split: Split
    params: NormalizationParams
    classes: dict[str, int] = field(default_factory=dict)


def prepare(schema: DatasetSchema, seed: int) -> Snapshot:
    raw = load_csv(None, schema)
    sp = split(raw, seed)
    norm, params = normalize(raw, sp.train_indices)
    return Snapshot(norm, sp, params, dict(schema.classes))


SNAPSHOT_FORMAT = "hybrid-unary-dataset"
SNAPSHOT_VERSION = 1


def save_snapshot(snap: Snapshot, csv_path: Path, meta_path: Path,
                  provenance: dict | None = None) -> None:
    """CSV of normalized features + ``label`` column, and a JSON sidecar."""
    ds = snap.dataset
    lines = [",".join([*ds.feature_names, "label"])]
    for row, label in zip(ds.features, ds.labels):
        lines.append(",".join([*(repr(float(v)) for v in row), str(int(label))]))
    Path(csv_path).write_text("\n".join(lines) + "\n")
    meta = {
        "format": SNAPSHOT_FORMAT,
        "version": SNAPSHOT_VERSION,
        "name": ds.name,
        "num_classes": ds.num_classes,
        "classes": snap.classes,
        "feature_names": list(ds.feature_names),
        "min": list(snap.params.minimum),
        "max": list(snap.params.maximum),
        "seed": snap.split.seed,
        "train_indices": list(snap.split.train_indices),
        "test_indices": list(snap.split.test_indices),
    }
    if provenance:
        meta["provenance"] = provenance
    Path(meta_path).write_text(json.dumps(meta, indent=1) + "\n")


def load_snapshot(csv_path: Path, meta_path: Path) -> Snapshot:
    try:
        meta = json.loads(Path(meta_path).read_text())
        rows = _rows(Path(csv_path).read_text(), ",")
    except FileNotFoundError as exc:
        raise IngestionError(f"snapshot missing: {exc.filename}") from None
    if meta.get("format") != SNAPSHOT_FORMAT or meta.get("version") != SNAPSHOT_VERSION:
        raise IngestionError(f"{meta_path}: unsupported snapshot format")
    body = np.array([[float(c) for c in r] for r in rows[1:]], dtype=np.float64)
    ds = Dataset(
        meta["name"], body[:, :-1], body[:, -1].astype(np.int64),
        meta["num_classes"], tuple(meta["feature_names"]),
    )
    sp = Split(tuple(meta["train_indices"]), tuple(meta["test_indices"]), meta["seed"])
    params = NormalizationParams(tuple(meta["min"]), tuple(meta["max"]))
    return Snapshot(ds, sp, params, meta.get("classes", {}))
