"""Dataset loading: libsvm and CSV parsers and a synthetic generator."""
import csv
import io
import math
import os
from dataclasses import dataclass

import numpy as np
from scipy import sparse

from .numkit import DesignMatrix

TASKS = ("classification", "regression")
DATA_DIR_ENV = "SFWKIT_DATA_DIR"


class ParseError(ValueError):
    """Malformed input; ``line`` (and ``column`` for CSV) locate the problem."""

    def __init__(self, message, line=None, column=None):
        where = ""
        if line is not None:
            where = f"line {line}"
            if column is not None:
                where += f", column {column}"
            where += ": "
        super().__init__(where + message)
        self.line = line
        self.column = column


@dataclass(frozen=True, eq=False)
class Dataset:
    X: DesignMatrix
    y: np.ndarray
    name: str = "data"
    task: str = "classification"

    def __post_init__(self):
        if self.task not in TASKS:
            raise ValueError(f"unknown task {self.task!r}")
        X = DesignMatrix.from_any(self.X)
        y = np.array(self.y, dtype=np.float64).ravel()
        if y.size != X.n:
            raise ValueError(f"{y.size} targets for {X.n} rows")
        if self.task == "classification" and not np.all(np.abs(y) == 1.0):
            raise ValueError("classification targets must be in {-1, +1}")
        y.setflags(write=False)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)

    @property
    def n(self):
        return self.X.n

    @property
    def d(self):
        return self.X.d

    def __repr__(self):
        return f"Dataset({self.name!r}, {self.task}, {self.X!r})"


def _text_lines(stream):
    data = stream.read()
    if isinstance(data, bytes):
        try:
            data = data.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ParseError(f"input is not UTF-8 ({exc})") from exc
    return data.splitlines()


def parse_libsvm(stream, n_features=None, task=None, name="libsvm"):
    """Read ``label idx:val ...`` lines (1-based, strictly ascending indices).

    Labels drawn from {0, 1} or {-1, +1} give a classification dataset with
    targets in {-1, +1}; any other label set is read as regression. ``task``
    forces the interpretation. ``n_features`` fixes d (default: largest index).
    Blank lines and ``#`` comments are skipped; explicit zero values are dropped.
    """
    labels, indptr, cols, vals = [], [0], [], []
    max_index = 0
    for lineno, raw in enumerate(_text_lines(stream), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        try:
            labels.append(float(tokens[0]))
        except ValueError:
            raise ParseError(f"bad label {tokens[0]!r}", lineno) from None
        if not math.isfinite(labels[-1]):
            raise ParseError(f"non-finite label {tokens[0]!r}", lineno)
        prev = 0
        for tok in tokens[1:]:
            idx_s, sep, val_s = tok.partition(":")
            try:
                idx, val = int(idx_s), float(val_s)
            except ValueError:
                raise ParseError(f"bad feature token {tok!r}", lineno) from None
            if not sep:
                raise ParseError(f"bad feature token {tok!r}", lineno)
            if idx < 1:
                raise ParseError(f"feature index {idx} is not 1-based", lineno)
            if idx <= prev:
                raise ParseError("feature indices must be strictly ascending", lineno)
            if not math.isfinite(val):
                raise ParseError(f"non-finite value in {tok!r}", lineno)
            prev = idx
            if val != 0.0:
                cols.append(idx - 1)
                vals.append(val)
        max_index = max(max_index, prev)
        indptr.append(len(cols))
    d = max_index if n_features is None else int(n_features)
    if max_index > d:
        raise ParseError(f"feature index {max_index} exceeds n_features={d}")
    y = np.array(labels)
    task = task or _infer_task(y)
    if task == "classification":
        y = _map_labels(y)
    X = DesignMatrix.from_csr(indptr, cols, vals, (len(labels), d))
    return Dataset(X, y, name, task)


def _infer_task(y):
    values = set(np.unique(y).tolist())
    if values and (values <= {0.0, 1.0} or values <= {-1.0, 1.0}):
        return "classification"
    return "regression"


def _map_labels(y):
    values = set(np.unique(y).tolist())
    if values <= {-1.0, 1.0}:
        return y
    if values <= {0.0, 1.0}:
        return np.where(y > 0, 1.0, -1.0)
    raise ValueError("classification labels must be in {0, 1} or {-1, +1}")


def serialize_libsvm(dataset):
    """Inverse of :func:`parse_libsvm` (values written with full precision)."""
    X = dataset.X.to_scipy()
    out = io.StringIO()
    for i in range(dataset.n):
        lo, hi = X.indptr[i], X.indptr[i + 1]
        label = dataset.y[i]
        parts = ["%d" % label if dataset.task == "classification" else repr(float(label))]
        parts += [f"{j + 1}:{float(v)!r}" for j, v in zip(X.indices[lo:hi].tolist(), X.data[lo:hi].tolist())]
        out.write(" ".join(parts) + "\n")
    return out.getvalue()


def parse_csv(stream, target=-1, name="csv"):
    """Numeric CSV with a header row; ``target`` is a column index or name.

    The other columns form a dense regression design matrix.
    """
    rows = list(csv.reader(_text_lines(stream)))
    if not rows:
        raise ParseError("empty file: a header row is required")
    header = [h.strip() for h in rows[0]]
    if isinstance(target, str) and not target.lstrip("-").isdigit():
        if target not in header:
            raise ParseError(f"no column named {target!r}", 1)
        k = header.index(target)
    else:
        k = int(target)
        if not -len(header) <= k < len(header):
            raise ParseError(f"target column {k} out of range for {len(header)} columns", 1)
        k %= len(header)
    table = []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(header):
            raise ParseError(f"expected {len(header)} cells, found {len(row)}", lineno)
        values = []
        for col, cell in enumerate(row, start=1):
            try:
                v = float(cell)
            except ValueError:
                raise ParseError(f"non-numeric cell {cell!r}", lineno, col) from None
            if not math.isfinite(v):
                raise ParseError(f"non-finite cell {cell!r}", lineno, col)
            values.append(v)
        table.append(values)
    A = np.array(table, dtype=np.float64).reshape(len(table), len(header))
    y = A[:, k]
    X = np.delete(A, k, axis=1)
    return Dataset(DesignMatrix.from_dense(X), y, name, "regression")


def synth_dataset(seed, n, d, density=1.0, task="classification", noise=0.1, support=None):
    """Reproducible synthetic problem with a planted sparse weight vector.

    Features are standard Gaussian, each entry kept with probability
    ``density`` (CSR storage unless ``density == 1``). The planted weights
    have ``support`` nonzeros (default max(1, d // 5)). Classification labels
    are sign(X w*) with sign(0) = +1; regression targets are
    X w* + noise * N(0, 1).
    """
    if not 0.0 < density <= 1.0:
        raise ValueError("density must lie in (0, 1]")
    if task not in TASKS:
        raise ValueError(f"unknown task {task!r}")
    if n < 0 or d < 1:
        raise ValueError("need n >= 0 and d >= 1")
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((n, d))
    if density < 1.0:
        A[rng.random((n, d)) >= density] = 0.0
    k = max(1, d // 5) if support is None else int(support)
    w_star = np.zeros(d)
    w_star[rng.choice(d, size=min(k, d), replace=False)] = rng.standard_normal(min(k, d))
    z = A @ w_star
    if task == "classification":
        y = np.where(z >= 0, 1.0, -1.0)
    else:
        y = z + noise * rng.standard_normal(n)
    X = DesignMatrix.from_dense(A) if density == 1.0 else DesignMatrix.from_any(sparse.csr_matrix(A))
    return Dataset(X, y, f"synth-{n}x{d}-s{seed}", task)


def parse_synth_spec(spec):
    """``"n=683,d=10,density=1,task=classification,seed=0"`` -> keyword dict."""
    out = {"seed": 0, "n": 100, "d": 10, "density": 1.0, "task": "classification"}
    casts = {"seed": int, "n": int, "d": int, "density": float, "task": str, "noise": float, "support": int}
    for item in filter(None, (s.strip() for s in spec.split(","))):
        key, sep, value = item.partition("=")
        key = key.strip()
        if not sep or key not in casts:
            raise ValueError(f"bad synthetic spec item {item!r}; keys are {sorted(casts)}")
        try:
            out[key] = casts[key](value.strip())
        except ValueError:
            raise ValueError(f"bad value for {key!r}: {value!r}") from None
    return out


def resolve_path(path):
    """Relative paths are looked up under $SFWKIT_DATA_DIR when it is set."""
    root = os.environ.get(DATA_DIR_ENV)
    if root and not os.path.isabs(path) and not os.path.exists(path):
        return os.path.join(root, path)
    return path


def load_dataset(source, fmt, target=-1, n_features=None):
    """Dataset from a file path (libsvm/csv) or a synthetic spec string."""
    if fmt == "synth":
        return synth_dataset(**parse_synth_spec(source))
    if fmt not in ("libsvm", "csv"):
        raise ValueError(f"unknown data format {fmt!r}")
    path = resolve_path(source)
    try:
        with open(path, "rb") as fh:
            name = os.path.basename(path)
            if fmt == "libsvm":
                return parse_libsvm(fh, n_features=n_features, name=name)
            return parse_csv(fh, target=target, name=name)
    except OSError as exc:
        raise OSError(f"cannot read dataset {path!r}: {exc.strerror or exc}") from exc
