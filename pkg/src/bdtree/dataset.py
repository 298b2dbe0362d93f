"""Classification datasets: CSV ingestion, synthetic generation, folds, and
the per-feature index of candidate split values.

Feature matrices are stored as float64; nominal cells hold dense category
ids assigned on load. Cells equal to the configured sentinel value are
flagged as "unimportant" and stored as NaN, which makes them compare False
against every split predicate (they always route to the right branch).
"""

from __future__ import annotations

import csv
import hashlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np


class SchemaError(ValueError):
    """Raised when a CSV file disagrees with its declared schema."""


@dataclass(frozen=True)
class Continuous:
    """Real-valued feature; split candidates are thresholds."""


@dataclass(frozen=True)
class Nominal:
    """Categorical feature with `categories` distinct values."""

    categories: int

    def __post_init__(self):
        if self.categories < 2:
            raise ValueError(f"nominal feature needs >= 2 categories, got {self.categories}")


FeatureKind = Continuous | Nominal


@dataclass(frozen=True)
class ColumnDecl:
    """One feature column of a CSV schema.

    kind is "continuous" or "nominal". For nominal columns, `count` closes
    the category set at a size and `vocab` additionally pins the id order;
    with neither, categories are open and assigned by first appearance.
    """

    name: str
    kind: str
    count: int | None = None
    vocab: tuple[str, ...] | None = None

    def __post_init__(self):
        if self.kind not in ("continuous", "nominal"):
            raise SchemaError(f"unknown column kind {self.kind!r}")
        if self.kind == "continuous" and (self.count is not None or self.vocab is not None):
            raise SchemaError("continuous columns take no categories field")


@dataclass(frozen=True)
class Schema:
    """Declaration for every CSV column; the label column comes last."""

    columns: tuple[ColumnDecl, ...]
    label_name: str = "class"
    label_vocab: tuple[str, ...] | None = None

    @property
    def n_features(self) -> int:
        return len(self.columns)


@dataclass(frozen=True, eq=False)
class Dataset:
    """An immutable classification dataset.

    x: (n, m) float64 matrix; nominal cells hold dense category ids.
    y: (n,) labels remapped to 1..class_count.
    """

    x: np.ndarray
    y: np.ndarray
    kinds: tuple[FeatureKind, ...]
    class_count: int
    sentinel: float | None = None
    sentinel_mask: np.ndarray | None = None
    label_names: tuple[str, ...] = ()
    category_names: tuple[tuple[str, ...] | None, ...] = ()
    column_names: tuple[str, ...] = ()

    def __post_init__(self):
        x = np.ascontiguousarray(self.x, dtype=np.float64)
        y = np.ascontiguousarray(self.y, dtype=np.int64)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        n, m = x.shape
        if n < 2:
            raise ValueError(f"need at least 2 rows, got {n}")
        if m < 1 or len(self.kinds) != m:
            raise ValueError("feature kinds must match matrix columns")
        if self.class_count < 2:
            raise ValueError("need at least 2 classes")
        if y.shape != (n,) or y.min() < 1 or y.max() > self.class_count:
            raise ValueError("labels must lie in 1..class_count")
        if self.sentinel_mask is None:
            object.__setattr__(self, "sentinel_mask", np.zeros((n, m), dtype=bool))
        if not self.label_names:
            object.__setattr__(self, "label_names", tuple(str(c) for c in range(1, self.class_count + 1)))
        if not self.category_names:
            object.__setattr__(self, "category_names", tuple(None for _ in range(m)))
        if not self.column_names:
            object.__setattr__(self, "column_names", tuple(f"x{j + 1}" for j in range(m)))
        for j, kind in enumerate(self.kinds):
            if isinstance(kind, Nominal):
                col = x[:, j]
                ok = ~np.isnan(col)
                if ok.any() and (col[ok].min() < 0 or col[ok].max() >= kind.categories):
                    raise ValueError(f"column {j}: category id outside declared count")
        for arr in (self.x, self.y, self.sentinel_mask):
            arr.flags.writeable = False

    @property
    def n_rows(self) -> int:
        return self.x.shape[0]

    @property
    def n_features(self) -> int:
        return self.x.shape[1]

    def take(self, indices) -> "Dataset":
        """Row subset sharing schema and label/category maps."""
        idx = np.asarray(indices, dtype=np.int64)
        return Dataset(
            x=self.x[idx].copy(),
            y=self.y[idx].copy(),
            kinds=self.kinds,
            class_count=self.class_count,
            sentinel=self.sentinel,
            sentinel_mask=self.sentinel_mask[idx].copy(),
            label_names=self.label_names,
            category_names=self.category_names,
            column_names=self.column_names,
        )

    def fingerprint(self) -> str:
        h = hashlib.sha256()
        h.update(self.x.tobytes())
        h.update(self.y.tobytes())
        h.update(self.sentinel_mask.tobytes())
        return h.hexdigest()

    def equals(self, other: "Dataset") -> bool:
        return (
            self.x.shape == other.x.shape
            and np.array_equal(self.x, other.x, equal_nan=True)
            and np.array_equal(self.y, other.y)
            and self.kinds == other.kinds
            and self.class_count == other.class_count
            and np.array_equal(self.sentinel_mask, other.sentinel_mask)
            and self.label_names == other.label_names
            and self.category_names == other.category_names
        )


@dataclass(frozen=True)
class FeatureIndex:
    """Distinct observed values per feature, the candidate split rules.

    `values[j]` is sorted ascending for continuous features and holds the
    observed category ids for nominal ones. Sentinel cells are excluded.
    """

    values: tuple[np.ndarray, ...]

    def distinct_count(self, feature: int) -> int:
        return len(self.values[feature])

    def value_range(self, feature: int) -> tuple[float, float]:
        v = self.values[feature]
        return float(v[0]), float(v[-1])


@dataclass(frozen=True)
class FoldPlan:
    """Cross-validation split: `folds[i]` is the (train, test) index pair."""

    fold_count: int
    seed: int
    folds: tuple[tuple[np.ndarray, np.ndarray], ...]


def feature_index(d: Dataset) -> FeatureIndex:
    cols = []
    for j in range(d.n_features):
        col = d.x[:, j]
        col = col[~np.isnan(col)]
        if col.size == 0:
            raise ValueError(f"feature {j} has no non-sentinel values")
        cols.append(np.unique(col))
    return FeatureIndex(values=tuple(cols))


def gen_xor3(n: int, seed: int) -> Dataset:
    """Two uniform inputs whose sign product defines the class, plus one
    Gaussian noise input that carries no label information."""
    if n < 4:
        raise ValueError(f"need n >= 4, got {n}")
    rng = np.random.default_rng(seed)
    x1 = rng.uniform(-0.5, 0.5, size=n)
    x2 = rng.uniform(-0.5, 0.5, size=n)
    x3 = rng.normal(0.0, 0.2, size=n)
    y = np.where(x1 * x2 > 0, 1, 2).astype(np.int64)
    return Dataset(
        x=np.column_stack([x1, x2, x3]),
        y=y,
        kinds=(Continuous(), Continuous(), Continuous()),
        class_count=2,
        label_names=("1", "2"),
        column_names=("x1", "x2", "x3"),
    )


def kfold_split(d: Dataset, k: int, seed: int) -> FoldPlan:
    n = d.n_rows
    if k < 2 or k > n:
        raise ValueError(f"fold count must be in 2..{n}, got {k}")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(n)
    folds = []
    for part in np.array_split(perm, k):
        test = np.sort(part)
        mask = np.ones(n, dtype=bool)
        mask[test] = False
        folds.append((np.flatnonzero(mask), test))
    return FoldPlan(fold_count=k, seed=seed, folds=tuple(folds))


def read_schema(path) -> Schema:
    """Parse a sidecar of `name,kind[,categories]` lines, label line last.

    The categories field of a nominal column is either a closed count or a
    `|`-joined vocabulary that also pins the category-id order. The label
    line is `name,label[,vocab]`.
    """
    lines = [ln.strip() for ln in Path(path).read_text().splitlines() if ln.strip()]
    if len(lines) < 2:
        raise SchemaError("schema needs at least one feature line and a label line")
    columns = []
    for i, ln in enumerate(lines[:-1], start=1):
        fields = [f.strip() for f in ln.split(",")]
        if len(fields) < 2:
            raise SchemaError(f"schema line {i}: expected `name,kind[,categories]`")
        name, kind = fields[0], fields[1].lower()
        count, vocab = None, None
        if len(fields) >= 3 and fields[2]:
            if kind != "nominal":
                raise SchemaError(f"schema line {i}: categories given for non-nominal column")
            if "|" in fields[2]:
                vocab = tuple(fields[2].split("|"))
                count = len(vocab)
            else:
                count = int(fields[2])
        columns.append(ColumnDecl(name=name, kind=kind, count=count, vocab=vocab))
    last = [f.strip() for f in lines[-1].split(",")]
    if len(last) < 2 or last[1].lower() != "label":
        raise SchemaError("last schema line must declare the label column")
    label_vocab = tuple(last[2].split("|")) if len(last) >= 3 and last[2] else None
    return Schema(columns=tuple(columns), label_name=last[0], label_vocab=label_vocab)


def write_schema(path, d: Dataset) -> None:
    """Write the sidecar matching `d`, with explicit category vocabularies
    so a reload reproduces the dataset exactly."""
    lines = []
    for j, kind in enumerate(d.kinds):
        name = d.column_names[j]
        if isinstance(kind, Continuous):
            lines.append(f"{name},continuous")
        else:
            vocab = d.category_names[j]
            spec = "|".join(vocab) if vocab else str(kind.categories)
            lines.append(f"{name},nominal,{spec}")
    lines.append(f"class,label,{'|'.join(d.label_names)}")
    Path(path).write_text("\n".join(lines) + "\n")


def _token_is_sentinel(token: str, sentinel: float | None) -> bool:
    if sentinel is None:
        return False
    try:
        return float(token) == sentinel
    except ValueError:
        return False


def load_csv(path, schema: Schema, sentinel: float | None = None, has_header: bool = False) -> Dataset:
    """Load a CSV whose last column is the class label.

    Labels and open nominal categories are remapped to dense ids in order
    of first appearance; a declared vocabulary pins the order instead and
    makes any other token an error, and a declared count caps how many
    distinct categories may appear.
    """
    m = schema.n_features
    cat_maps: list[dict[str, int] | None] = []
    for col in schema.columns:
        if col.kind == "continuous":
            cat_maps.append(None)
        elif col.vocab is not None:
            cat_maps.append({tok: i for i, tok in enumerate(col.vocab)})
        else:
            cat_maps.append({})
    label_map: dict[str, int] = (
        {tok: i + 1 for i, tok in enumerate(schema.label_vocab)} if schema.label_vocab else {}
    )

    rows, labels, mask_rows = [], [], []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        for row_no, row in enumerate(reader, start=1):
            if has_header and row_no == 1:
                continue
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != m + 1:
                raise SchemaError(f"row {row_no}: expected {m + 1} columns, got {len(row)}")
            vals = np.empty(m, dtype=np.float64)
            flags = np.zeros(m, dtype=bool)
            for j, col in enumerate(schema.columns):
                tok = row[j].strip()
                if _token_is_sentinel(tok, sentinel):
                    vals[j] = np.nan
                    flags[j] = True
                    continue
                if cat_maps[j] is None:
                    try:
                        vals[j] = float(tok)
                    except ValueError:
                        raise SchemaError(f"row {row_no}: column {j + 1} is not numeric: {tok!r}") from None
                else:
                    cmap = cat_maps[j]
                    if tok not in cmap:
                        if col.vocab is not None:
                            raise SchemaError(f"row {row_no}: unknown category {tok!r} in column {j + 1}")
                        if col.count is not None and len(cmap) >= col.count:
                            raise SchemaError(f"row {row_no}: unknown category {tok!r} in column {j + 1}")
                        cmap[tok] = len(cmap)
                    vals[j] = cmap[tok]
            tok = row[m].strip()
            try:
                fractional = not float(tok).is_integer()
            except ValueError:
                fractional = False  # non-numeric labels are categorical by nature
            if fractional:
                raise SchemaError(f"row {row_no}: label column non-categorical value {tok!r}")
            if tok not in label_map:
                if schema.label_vocab is not None:
                    raise SchemaError(f"row {row_no}: unknown label {tok!r}")
                label_map[tok] = len(label_map) + 1
            labels.append(label_map[tok])
            rows.append(vals)
            mask_rows.append(flags)

    if not rows:
        raise SchemaError("no data rows found")
    if len(label_map) < 2:
        raise SchemaError("label column has fewer than 2 classes")
    x = np.vstack(rows)
    y = np.asarray(labels, dtype=np.int64)
    kinds, cat_names = [], []
    for j, col in enumerate(schema.columns):
        if col.kind == "continuous":
            kinds.append(Continuous())
            cat_names.append(None)
        else:
            cmap = cat_maps[j]
            count = col.count if col.count is not None else max(len(cmap), 2)
            kinds.append(Nominal(categories=count))
            cat_names.append(tuple(sorted(cmap, key=cmap.get)))
    label_names = tuple(sorted(label_map, key=label_map.get))
    return Dataset(
        x=x,
        y=y,
        kinds=tuple(kinds),
        class_count=len(label_names),
        sentinel=sentinel,
        sentinel_mask=np.vstack(mask_rows),
        label_names=label_names,
        category_names=tuple(cat_names),
        column_names=tuple(c.name for c in schema.columns),
    )


def save_csv(d: Dataset, path) -> None:
    """Write rows with shortest round-trip float formatting; flagged cells
    are written back as the sentinel value."""
    sentinel_tok = repr(d.sentinel) if d.sentinel is not None else ""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        for i in range(d.n_rows):
            row = []
            for j, kind in enumerate(d.kinds):
                if d.sentinel_mask[i, j]:
                    row.append(sentinel_tok)
                elif isinstance(kind, Nominal):
                    names = d.category_names[j]
                    cid = int(d.x[i, j])
                    row.append(names[cid] if names else str(cid))
                else:
                    row.append(repr(float(d.x[i, j])))
            row.append(d.label_names[d.y[i] - 1])
            writer.writerow(row)


def dataset_schema(d: Dataset) -> Schema:
    """Schema describing `d`, with pinned vocabularies for exact reload."""
    columns = []
    for j, kind in enumerate(d.kinds):
        if isinstance(kind, Continuous):
            columns.append(ColumnDecl(name=d.column_names[j], kind="continuous"))
        else:
            vocab = d.category_names[j]
            columns.append(
                ColumnDecl(
                    name=d.column_names[j],
                    kind="nominal",
                    count=kind.categories,
                    vocab=vocab if vocab else None,
                )
            )
    return Schema(columns=tuple(columns), label_name="class", label_vocab=d.label_names)
