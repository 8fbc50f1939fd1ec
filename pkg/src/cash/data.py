"""Dataset ingestion, train/test splitting and stratified fold construction."""

from __future__ import annotations

import csv
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import (
    ConfigError,
    DataError,
    EmptyFile,
    KTooLarge,
    MissingLabelColumn,
    MissingValue,
    ParseError,
    RaggedRow,
    TooFewInstances,
    UnsupportedAttributeType,
)

NUMERIC = "numeric"
CATEGORICAL = "categorical"
MISSING_TOKEN = "?"

_DECIMAL = re.compile(r"^[+-]?(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?$")


@dataclass(frozen=True)
class Attribute:
    name: str
    kind: str
    levels: tuple[str, ...] = ()

    @property
    def n_levels(self) -> int:
        return len(self.levels)

    @property
    def is_categorical(self) -> bool:
        return self.kind == CATEGORICAL


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Dataset:
    """Labeled instances.

    Categorical attribute values are stored as level codes in the float
    ``features`` matrix; ``attributes`` says which columns those are.
    Arrays are read-only so instances can be shared between workers.
    """

    features: np.ndarray
    labels: np.ndarray
    attributes: tuple[Attribute, ...]
    class_names: tuple[str, ...]
    name: str = "dataset"

    def __post_init__(self):
        X = np.asarray(self.features, dtype=float)
        if X.ndim != 2:
            X = X.reshape(len(self.labels), -1)
        y = np.asarray(self.labels, dtype=np.int64)
        if X.shape[0] != y.shape[0]:
            raise DataError(f"{X.shape[0]} feature rows but {y.shape[0]} labels")
        if X.shape[1] != len(self.attributes):
            raise DataError("attribute metadata does not match feature columns")
        if y.size and (y.min() < 0 or y.max() >= len(self.class_names)):
            raise DataError("label index out of range")
        for j, attr in enumerate(self.attributes):
            if attr.is_categorical and X.shape[0]:
                col = X[:, j]
                if np.any(col < 0) or np.any(col >= attr.n_levels) or np.any(col != np.floor(col)):
                    raise DataError(f"attribute {attr.name!r} has codes outside its levels")
        object.__setattr__(self, "features", _frozen(X))
        object.__setattr__(self, "labels", _frozen(y))
        object.__setattr__(self, "attributes", tuple(self.attributes))
        object.__setattr__(self, "class_names", tuple(self.class_names))

    @property
    def n_instances(self) -> int:
        return self.labels.shape[0]

    @property
    def n_attributes(self) -> int:
        return len(self.attributes)

    @property
    def n_classes(self) -> int:
        return len(self.class_names)

    @property
    def categorical_mask(self) -> np.ndarray:
        return np.array([a.is_categorical for a in self.attributes], dtype=bool)

    def class_counts(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.n_classes)

    def subset(self, indices) -> "Dataset":
        idx = np.asarray(indices, dtype=np.int64)
        return Dataset(self.features[idx], self.labels[idx], self.attributes,
                       self.class_names, self.name)

    def with_columns(self, columns) -> "Dataset":
        cols = [int(c) for c in columns]
        return Dataset(self.features[:, cols], self.labels,
                       tuple(self.attributes[c] for c in cols), self.class_names, self.name)

    def __len__(self):
        return self.n_instances


@dataclass(frozen=True, eq=False)
class FoldPlan:
    k: int
    fold_of: np.ndarray = field(repr=False)

    def __post_init__(self):
        object.__setattr__(self, "fold_of", _frozen(np.asarray(self.fold_of, dtype=np.int64)))

    def valid_indices(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.fold_of == fold)

    def train_indices(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.fold_of != fold)

    def fold_sizes(self) -> np.ndarray:
        return np.bincount(self.fold_of, minlength=self.k)


def _check_classes(ds: Dataset) -> Dataset:
    if ds.n_instances == 0:
        raise EmptyFile(f"{ds.name}: no data rows")
    if len(np.unique(ds.labels)) < 2:
        raise TooFewInstances(f"{ds.name}: need at least 2 distinct classes")
    return ds


def _encode_columns(names, rows, label_idx, dataset_name):
    """Turn string rows into a Dataset; non-decimal columns become categorical."""
    n_cols = len(names)
    attrs, columns = [], []
    for j in range(n_cols):
        if j == label_idx:
            continue
        raw = [r[j] for r in rows]
        if all(_DECIMAL.match(v.strip()) for v in raw):
            attrs.append(Attribute(names[j], NUMERIC))
            columns.append([float(v) for v in raw])
        else:
            levels: dict[str, int] = {}
            codes = [levels.setdefault(v, len(levels)) for v in raw]
            attrs.append(Attribute(names[j], CATEGORICAL, tuple(levels)))
            columns.append(codes)
    classes: dict[str, int] = {}
    labels = [classes.setdefault(r[label_idx], len(classes)) for r in rows]
    X = np.array(columns, dtype=float).T if columns else np.zeros((len(rows), 0))
    return Dataset(X.reshape(len(rows), len(attrs)), np.array(labels), tuple(attrs),
                   tuple(classes), dataset_name)


def load_csv(path, label_column: str | int = -1, has_header: bool = True) -> Dataset:
    """Read a comma-separated file.

    Columns whose every value is a plain decimal number are numeric; all
    others are categorical with levels in order of first appearance.  Class
    labels are likewise indexed in order of first appearance.
    """
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        rows, lines = [], []
        for row in reader:
            if not row or all(not v.strip() for v in row):
                continue
            rows.append([v.strip() for v in row])
            lines.append(reader.line_num)
    if not rows:
        raise EmptyFile(str(path))
    if has_header:
        names = rows[0]
        rows, lines = rows[1:], lines[1:]
    else:
        names = [f"a{j}" for j in range(len(rows[0]))]
    width = len(names)
    for row, line in zip(rows, lines):
        if len(row) != width:
            raise RaggedRow(line, width, len(row))
        if MISSING_TOKEN in row:
            raise MissingValue(f"line {line}: missing values are not supported")
    if not rows:
        raise EmptyFile(f"{path}: header only")

    if isinstance(label_column, str):
        if label_column not in names:
            raise MissingLabelColumn(label_column)
        label_idx = names.index(label_column)
    else:
        if not -width <= label_column < width:
            raise MissingLabelColumn(str(label_column))
        label_idx = label_column % width
    return _check_classes(_encode_columns(names, rows, label_idx, path.stem))


def _fmt_number(v: float) -> str:
    return repr(float(v))


def write_csv(data: Dataset, path, label_name: str = "class") -> None:
    """Write ``data`` with a header row; the label goes in the last column."""
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([a.name for a in data.attributes] + [label_name])
        for x, y in zip(data.features, data.labels):
            row = [a.levels[int(v)] if a.is_categorical else _fmt_number(v)
                   for a, v in zip(data.attributes, x)]
            w.writerow(row + [data.class_names[y]])


def _arff_tokens(text: str) -> list[str]:
    reader = csv.reader([text], quotechar="'", skipinitialspace=True)
    out = []
    for tok in next(reader):
        tok = tok.strip()
        if len(tok) >= 2 and tok[0] == tok[-1] == '"':
            tok = tok[1:-1]
        out.append(tok)
    return out


def _split_attribute_line(rest: str, line_no: int):
    rest = rest.strip()
    if rest[:1] in ("'", '"'):
        q = rest[0]
        end = rest.find(q, 1)
        if end < 0:
            raise ParseError(line_no, "unterminated attribute name")
        return rest[1:end], rest[end + 1:].strip()
    parts = rest.split(None, 1)
    if len(parts) != 2:
        raise ParseError(line_no, "attribute without type")
    return parts[0], parts[1].strip()


def load_arff(path) -> Dataset:
    """Read the numeric/nominal subset of the ARFF format.

    The label is the attribute named ``class`` if there is one, otherwise
    the last attribute.  Nominal levels keep their declaration order.
    """
    path = Path(path)
    text = path.read_text().splitlines()
    relation = path.stem
    decls: list[Attribute] = []
    rows: list[list[str]] = []
    lines: list[int] = []
    in_data = False
    for line_no, raw in enumerate(text, start=1):
        line = raw.strip()
        if not line or line.startswith("%"):
            continue
        if not in_data:
            low = line.lower()
            if low.startswith("@relation"):
                relation = line[len("@relation"):].strip().strip("'\"") or relation
            elif low.startswith("@attribute"):
                name, typ = _split_attribute_line(line[len("@attribute"):], line_no)
                tl = typ.lower()
                if typ.startswith("{"):
                    if not typ.endswith("}"):
                        raise ParseError(line_no, "unterminated nominal specification")
                    levels = tuple(t for t in _arff_tokens(typ[1:-1]) if t != "")
                    if len(set(levels)) != len(levels) or not levels:
                        raise ParseError(line_no, "empty or duplicate nominal levels")
                    decls.append(Attribute(name, CATEGORICAL, levels))
                elif tl in ("numeric", "real", "integer"):
                    decls.append(Attribute(name, NUMERIC))
                elif tl.split()[0] in ("string", "date", "relational"):
                    raise UnsupportedAttributeType(f"{name}: {typ}")
                else:
                    raise ParseError(line_no, f"unknown attribute type {typ!r}")
            elif low.startswith("@data"):
                in_data = True
            else:
                raise ParseError(line_no, "unexpected header line")
        else:
            if line.startswith("{"):
                raise ParseError(line_no, "sparse rows are not supported")
            row = _arff_tokens(line)
            if len(row) != len(decls):
                raise ParseError(line_no, f"expected {len(decls)} values, found {len(row)}")
            if MISSING_TOKEN in row:
                raise MissingValue(f"line {line_no}: missing values are not supported")
            rows.append(row)
            lines.append(line_no)
    if not decls:
        raise EmptyFile(f"{path}: no attributes")
    if not in_data or not rows:
        raise EmptyFile(f"{path}: no data section")

    names = [a.name.lower() for a in decls]
    label_idx = names.index("class") if "class" in names else len(decls) - 1
    if not decls[label_idx].is_categorical:
        raise UnsupportedAttributeType("label attribute must be nominal")

    n = len(rows)
    X = np.zeros((n, len(decls) - 1))
    labels = np.zeros(n, dtype=np.int64)
    attrs = [a for j, a in enumerate(decls) if j != label_idx]
    for i, (row, line_no) in enumerate(zip(rows, lines)):
        col = 0
        for j, (attr, v) in enumerate(zip(decls, row)):
            if attr.is_categorical:
                try:
                    code = attr.levels.index(v)
                except ValueError:
                    raise ParseError(line_no, f"{v!r} is not a level of {attr.name}") from None
            else:
                if not _DECIMAL.match(v):
                    raise ParseError(line_no, f"{v!r} is not numeric")
                code = float(v)
            if j == label_idx:
                labels[i] = code
            else:
                X[i, col] = code
                col += 1
    ds = Dataset(X, labels, tuple(attrs), decls[label_idx].levels, relation)
    return _check_classes(ds)


def load_dataset(path, fmt: str | None = None, label_column: str | int = -1) -> Dataset:
    fmt = (fmt or Path(path).suffix.lstrip(".")).lower()
    if fmt == "csv":
        return load_csv(path, label_column=label_column)
    if fmt == "arff":
        return load_arff(path)
    raise ConfigError(f"unknown dataset format {fmt!r}")


def _largest_remainder(quotas: np.ndarray, total: int) -> np.ndarray:
    base = np.floor(quotas).astype(np.int64)
    rest = total - int(base.sum())
    if rest > 0:
        # stable sort keeps lower class indices first among equal remainders
        order = np.argsort(-(quotas - base), kind="stable")
        base[order[:rest]] += 1
    return base


def split_train_test(data: Dataset, test_fraction: float, seed: int) -> tuple[Dataset, Dataset]:
    """Stratified random split into (train, test).

    The test size is ``round(test_fraction * n)``; per-class test counts are
    allocated by largest remainder and then repaired so that every class
    with at least two instances lands on both sides.
    """
    if not 0.0 < test_fraction < 1.0:
        raise ConfigError("test_fraction must lie in (0, 1)")
    n = data.n_instances
    if n < 2:
        raise TooFewInstances("need at least 2 instances to split")
    n_test = min(max(int(math.floor(test_fraction * n + 0.5)), 1), n - 1)

    counts = data.class_counts()
    take = _largest_remainder(test_fraction * counts.astype(float), n_test)
    take = np.minimum(take, counts)
    # repair: each class with >= 2 members gets >= 1 on each side
    for _ in range(2 * len(counts)):
        need_test = [c for c in range(len(counts)) if counts[c] >= 2 and take[c] == 0]
        need_train = [c for c in range(len(counts)) if counts[c] >= 2 and take[c] == counts[c]]
        if not need_test and not need_train:
            break
        for c in need_test:
            donors = [d for d in range(len(counts)) if take[d] >= 2 or (take[d] >= 1 and counts[d] < 2)]
            if not donors:
                break
            d = max(donors, key=lambda d: (take[d], -d))
            take[d] -= 1
            take[c] += 1
        for c in need_train:
            receivers = [d for d in range(len(counts)) if counts[d] - take[d] >= 2]
            if not receivers:
                break
            d = max(receivers, key=lambda d: (counts[d] - take[d], -d))
            take[c] -= 1
            take[d] += 1

    rng = np.random.default_rng(seed)
    test_idx, train_idx = [], []
    for c in range(len(counts)):
        members = rng.permutation(np.flatnonzero(data.labels == c))
        test_idx.append(members[:take[c]])
        train_idx.append(members[take[c]:])
    test_idx = np.sort(np.concatenate(test_idx))
    train_idx = np.sort(np.concatenate(train_idx))
    return data.subset(train_idx), data.subset(test_idx)


def stratified_folds(data: Dataset, k: int, seed: int) -> FoldPlan:
    """Stratified k-fold plan.

    Instances are shuffled within each class, the classes are concatenated
    in index order and fold ids are dealt round-robin along that sequence.
    Overall fold sizes and per-class fold counts then differ by at most one.
    """
    if k < 2:
        raise ConfigError("k must be at least 2")
    n = data.n_instances
    if k > n:
        raise KTooLarge(f"k={k} exceeds {n} instances")
    rng = np.random.default_rng(seed)
    order = np.concatenate([rng.permutation(np.flatnonzero(data.labels == c))
                            for c in range(data.n_classes)])
    fold_of = np.empty(n, dtype=np.int64)
    fold_of[order] = np.arange(n) % k
    return FoldPlan(k, fold_of)


def make_dataset(X: Sequence, y: Sequence, name: str = "dataset",
                 categorical: dict[int, int] | None = None) -> Dataset:
    """Build a Dataset from in-memory arrays.

    ``categorical`` maps column index to level count for columns that hold
    integer codes; every other column is numeric.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    y = np.asarray(y, dtype=np.int64)
    categorical = categorical or {}
    attrs = tuple(
        Attribute(f"a{j}", CATEGORICAL, tuple(str(v) for v in range(categorical[j])))
        if j in categorical else Attribute(f"a{j}", NUMERIC)
        for j in range(X.shape[1])
    )
    n_classes = int(y.max()) + 1 if y.size else 0
    return Dataset(X, y, attrs, tuple(str(c) for c in range(n_classes)), name)
