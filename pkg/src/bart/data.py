"""Dataset ingestion, encoding, response scaling, cutpoint grids, and fixture simulation.

A :class:`Dataset` owns the predictor matrix, the (transformed) response, and
one ascending cutpoint grid per predictor.  For regression the response is
shifted and rescaled to the interval [-0.5, 0.5]; binary responses are kept
as 0/1 and no scaling record exists.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import DataError, DegenerateLabelsError, DegenerateResponseError, SchemaError
from .trees import grid_positions

DEFAULT_MAX_CUTPOINTS = 100


@dataclass(frozen=True)
class Column:
    """Provenance of one predictor column.

    ``kind`` is "numeric" for columns parsed as reals and "indicator" for a
    0/1 column produced by one-hot encoding level ``level`` of the original
    categorical column ``source``.
    """

    name: str
    kind: str = "numeric"
    source: str | None = None
    level: str | None = None


@dataclass(frozen=True)
class Dataset:
    """Immutable training data: predictors, response, and per-variable cutpoint grids."""

    x: np.ndarray
    y: np.ndarray
    y_raw: np.ndarray
    grids: tuple
    columns: tuple
    response_name: str
    scaling: tuple | None
    mode: str = "regression"

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def p(self) -> int:
        return self.x.shape[1]

    @property
    def column_names(self) -> tuple:
        return tuple(c.name for c in self.columns)

    @cached_property
    def cut_positions(self) -> np.ndarray:
        """Grid position of every cell; routing compares these integers to cutpoint indices."""
        return grid_positions(self.x, self.grids)

    def available_splits(self, rows, min_leaf: int = 1):
        """Per-variable interval [lo, hi] of cutpoint indices that leave at least
        ``min_leaf`` of the given rows on each side.  Empty iff lo > hi.

        Cut c is available iff min_leaf <= #{rows: pos <= c} <= len(rows) - min_leaf;
        the row counts are monotone in c, so the available set is a contiguous
        index interval given by order statistics of the positions.
        """
        k = len(rows)
        p = self.p
        if k < 2 * min_leaf:
            return np.zeros(p, dtype=np.int64), np.full(p, -1, dtype=np.int64)
        pos = self.cut_positions[rows, :]
        if min_leaf == 1:
            lo = pos.min(axis=0)
            hi = pos.max(axis=0) - 1
        else:
            pos = np.sort(pos, axis=0)
            lo = pos[min_leaf - 1, :].copy()
            hi = pos[k - min_leaf, :] - 1
        return lo, hi

    def split_counts(self, rows, min_leaf: int = 1) -> np.ndarray:
        """Number of available cutpoints per variable for the given rows."""
        lo, hi = self.available_splits(rows, min_leaf)
        return np.maximum(hi - lo + 1, 0)


def scale_response(y_raw: np.ndarray):
    """Affine map of the response onto [-0.5, 0.5]; returns (scaled, (y_min, y_max))."""
    y_raw = np.asarray(y_raw, dtype=float)
    y_min, y_max = float(np.min(y_raw)), float(np.max(y_raw))
    if not y_max > y_min:
        raise DegenerateResponseError("response is constant; nothing to fit")
    return (y_raw - y_min) / (y_max - y_min) - 0.5, (y_min, y_max)


def inverse_scale(value, scaling):
    """Exact inverse of :func:`scale_response` (applies to points and interval ends alike)."""
    y_min, y_max = scaling
    return (np.asarray(value) + 0.5) * (y_max - y_min) + y_min


def build_cutpoints(values: np.ndarray, max_cutpoints: int = DEFAULT_MAX_CUTPOINTS) -> np.ndarray:
    """Ascending grid of admissible split thresholds for one predictor column.

    Midpoints of consecutive distinct values are used when there are at most
    ``max_cutpoints`` of them; otherwise the grid is thinned to empirical
    quantiles.  Every grid value splits the column into two nonempty sides;
    a constant column yields an empty grid (the variable is never splittable).
    """
    values = np.asarray(values, dtype=float)
    uniq = np.unique(values)
    if len(uniq) < 2:
        return np.empty(0)
    mids = (uniq[1:] + uniq[:-1]) / 2.0
    if len(mids) <= max_cutpoints:
        return mids
    probs = np.linspace(0.0, 1.0, max_cutpoints + 2)[1:-1]
    grid = np.unique(np.quantile(values, probs))
    grid = grid[(grid > uniq[0]) & (grid < uniq[-1])]
    if len(grid) == 0:
        # pathological tie structure; fall back to thinned midpoints
        idx = np.linspace(0, len(mids) - 1, max_cutpoints).round().astype(int)
        grid = np.unique(mids[idx])
    return grid


def make_dataset(
    x,
    y_raw,
    *,
    mode: str = "regression",
    max_cutpoints: int = DEFAULT_MAX_CUTPOINTS,
    columns=None,
    response_name: str = "y",
) -> Dataset:
    """Assemble a Dataset from numeric arrays, building grids and scaling the response."""
    x = np.ascontiguousarray(x, dtype=float)
    y_raw = np.asarray(y_raw, dtype=float)
    if x.ndim != 2:
        raise DataError("predictor matrix must be 2-dimensional")
    if x.shape[0] != y_raw.shape[0]:
        raise DataError(f"{x.shape[0]} predictor rows but {len(y_raw)} responses")
    if x.shape[0] == 0:
        raise DataError("empty dataset")
    if not np.isfinite(x).all():
        raise DataError("predictors contain non-finite values")
    if not np.isfinite(y_raw).all():
        raise DataError("response contains non-finite values")

    if columns is None:
        columns = tuple(Column(f"x{v + 1}") for v in range(x.shape[1]))
    else:
        columns = tuple(columns)
    if len(columns) != x.shape[1]:
        raise DataError("column metadata does not match predictor count")

    if mode == "regression":
        y, scaling = scale_response(y_raw)
    elif mode == "probit":
        labels = np.unique(y_raw)
        if not np.isin(labels, (0.0, 1.0)).all():
            raise DataError("probit mode requires a 0/1 response")
        if len(labels) < 2:
            raise DegenerateLabelsError("both classes must be present")
        y, scaling = y_raw.astype(float), None
    else:
        raise DataError(f"unknown mode {mode!r}")

    grids = tuple(build_cutpoints(x[:, v], max_cutpoints) for v in range(x.shape[1]))
    return Dataset(
        x=x,
        y=y,
        y_raw=y_raw,
        grids=grids,
        columns=columns,
        response_name=response_name,
        scaling=scaling,
        mode=mode,
    )


def _parse_table(path):
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: file is empty") from None
        header = [h.strip() for h in header]
        rows = []
        for i, row in enumerate(reader, start=1):
            if len(row) == 0:
                continue
            if len(row) != len(header):
                raise DataError(f"{path}: row {i} has {len(row)} fields, expected {len(header)}")
            rows.append([cell.strip() for cell in row])
    if not rows:
        raise DataError(f"{path}: no data rows")
    return header, rows


def _classify_column(name, cells, path):
    """Return float values for a numeric column or None for a categorical one.

    A column where only some cells parse as numbers is treated as a data entry
    error rather than silently encoded.
    """
    parsed = []
    failures = []
    for i, cell in enumerate(cells, start=1):
        if cell == "":
            raise DataError(f"{path}: row {i}, column {name!r}: missing value")
        try:
            parsed.append(float(cell))
        except ValueError:
            parsed.append(None)
            failures.append(i)
    if not failures:
        return np.array(parsed, dtype=float)
    if len(failures) < len(cells):
        raise DataError(
            f"{path}: row {failures[0]}, column {name!r}: "
            f"non-numeric value {cells[failures[0] - 1]!r} in a numeric column"
        )
    return None


def load_csv(
    path,
    response: str,
    mode: str = "regression",
    *,
    max_cutpoints: int = DEFAULT_MAX_CUTPOINTS,
    response_transform: str | None = None,
) -> Dataset:
    """Load a headered CSV into a Dataset.

    Numeric columns are parsed as reals; non-numeric columns are one-hot
    encoded into one 0/1 indicator per level.  Rows with missing or
    unparseable cells abort the load with an error naming the row and column.
    ``response_transform`` optionally applies ``log`` or ``sqrt`` to the raw
    response before scaling (regression only).
    """
    header, rows = _parse_table(path)
    if response not in header:
        raise DataError(f"{path}: response column {response!r} not found")
    r_idx = header.index(response)

    y_cells = [row[r_idx] for row in rows]
    y_raw = _classify_column(response, y_cells, path)
    if y_raw is None:
        raise DataError(f"{path}: response column {response!r} is not numeric")
    if mode == "probit" and not np.isin(y_raw, (0.0, 1.0)).all():
        bad = int(np.flatnonzero(~np.isin(y_raw, (0.0, 1.0)))[0])
        raise DataError(
            f"{path}: row {bad + 1}, column {response!r}: "
            f"probit mode requires a 0/1 response, found {y_raw[bad]!r}"
        )
    if response_transform is not None:
        if mode != "regression":
            raise DataError("response transforms only apply to regression")
        if response_transform == "log":
            if np.any(y_raw <= 0):
                raise DataError("log transform requires a strictly positive response")
            y_raw = np.log(y_raw)
        elif response_transform == "sqrt":
            if np.any(y_raw < 0):
                raise DataError("sqrt transform requires a nonnegative response")
            y_raw = np.sqrt(y_raw)
        else:
            raise DataError(f"unknown response transform {response_transform!r}")

    blocks = []
    columns = []
    for j, name in enumerate(header):
        if j == r_idx:
            continue
        cells = [row[j] for row in rows]
        values = _classify_column(name, cells, path)
        if values is not None:
            blocks.append(values)
            columns.append(Column(name))
        else:
            for level in sorted(set(cells)):
                indicator = np.array([1.0 if c == level else 0.0 for c in cells])
                blocks.append(indicator)
                columns.append(Column(f"{name}={level}", kind="indicator", source=name, level=level))
    if not blocks:
        raise DataError(f"{path}: no predictor columns")
    x = np.column_stack(blocks)
    return make_dataset(
        x, y_raw, mode=mode, max_cutpoints=max_cutpoints, columns=columns, response_name=response
    )


def load_prediction_matrix(path, columns, response_name: str) -> np.ndarray:
    """Re-encode a CSV into the predictor matrix of an already-trained model.

    The file must carry every raw column the model was trained on (numeric
    columns by name, categorical sources behind indicator columns), in the
    same relative order; the response column, if present, is ignored.
    Categorical levels unseen at training time cannot be represented and are
    rejected.
    """
    header, rows = _parse_table(path)
    required = []
    for col in columns:
        raw = col.name if col.kind == "numeric" else col.source
        if raw not in required:
            required.append(raw)
    missing = [c for c in required if c not in header]
    if missing:
        raise SchemaError(f"{path}: missing columns: {', '.join(missing)}")
    positions = [header.index(c) for c in required]
    if positions != sorted(positions):
        raise SchemaError(
            f"{path}: columns out of order; the model expects {', '.join(required)}"
        )

    raw_cells = {c: [row[header.index(c)] for row in rows] for c in required}
    known_levels: dict[str, set] = {}
    for col in columns:
        if col.kind == "indicator":
            known_levels.setdefault(col.source, set()).add(col.level)
    for source, levels in known_levels.items():
        unseen = sorted(set(raw_cells[source]) - levels)
        if unseen:
            raise SchemaError(
                f"{path}: column {source!r} has levels unseen at training time: "
                f"{', '.join(unseen)}"
            )

    blocks = []
    for col in columns:
        if col.kind == "numeric":
            values = _classify_column(col.name, raw_cells[col.name], path)
            if values is None:
                raise SchemaError(f"{path}: column {col.name!r} must be numeric")
            blocks.append(values)
        else:
            cells = raw_cells[col.source]
            blocks.append(np.array([1.0 if c == col.level else 0.0 for c in cells]))
    x = np.column_stack(blocks)
    if not np.isfinite(x).all():
        raise DataError(f"{path}: predictors contain non-finite values")
    return x


def friedman_function(x: np.ndarray) -> np.ndarray:
    """The five-variable benchmark surface; variables beyond the fifth are inert."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    return (
        10.0 * np.sin(np.pi * x[:, 0] * x[:, 1])
        + 20.0 * (x[:, 2] - 0.5) ** 2
        + 10.0 * x[:, 3]
        + 5.0 * x[:, 4]
    )


def generate_friedman(rng, n: int, p: int, sigma: float, *, max_cutpoints: int = DEFAULT_MAX_CUTPOINTS):
    """Simulate the Friedman benchmark: x ~ Uniform(0,1)^p, y = f(x) + N(0, sigma^2).

    Returns ``(dataset, f)`` where ``f`` holds the noiseless surface values, so
    estimates can be scored against the truth.
    """
    if p < 5:
        raise DataError("the Friedman surface needs at least 5 predictors")
    if isinstance(rng, (int, np.integer)):
        rng = np.random.default_rng(rng)
    x = rng.uniform(size=(n, p))
    f = friedman_function(x)
    y = f + sigma * rng.standard_normal(n) if sigma > 0 else f.copy()
    return make_dataset(x, y, max_cutpoints=max_cutpoints), f
