"""
Contains labeled-CSV loading and segment composition of benchmark streams.

A labeled CSV has a header row, numeric feature columns and one integer label
column.  A segment recipe describes how points drawn from several such pools
are concatenated into a stream whose segment boundaries are the ground-truth
change points.
"""

import collections.abc
import dataclasses
import json
import logging
import os
import pathlib
import typing

import numpy
import pandas

from exmart import datatypes, interfaces, utils

logger = logging.getLogger(__name__)

PathLike = typing.Union[str, os.PathLike]


def _line_of(frame: pandas.DataFrame, position: int) -> int:
    # frame index is the 0-based data line, header occupies line 1
    return int(frame.index[position]) + 2


def _read_table(path: PathLike) -> pandas.DataFrame:
    try:
        frame = pandas.read_csv(
            path,
            dtype=str,
            keep_default_na=False,
            na_filter=False,
            skip_blank_lines=False,
            skipinitialspace=True,
        )
    except pandas.errors.EmptyDataError as err:
        raise interfaces.StreamFormatError(
            f"{path}: file is empty, a header row is required"
        ) from err
    except pandas.errors.ParserError as err:
        raise interfaces.StreamFormatError(f"{path}: {err}") from err
    if frame.empty:
        return frame
    # blank lines are kept by the parser so the index tracks file lines
    empty = {c: frame[c].isna() | (frame[c].str.strip() == "") for c in frame}
    blank = pandas.DataFrame(empty).all(axis=1)
    return frame.loc[~blank]


def _numeric_column(
    frame: pandas.DataFrame, column: str, path: PathLike
) -> interfaces.FloatArray:
    raw = frame[column]
    missing = raw.isna() | (raw.astype(str).str.strip() == "")
    if missing.any():
        row = int(numpy.flatnonzero(missing.to_numpy())[0])
        raise interfaces.StreamFormatError(
            f"{path}: line {_line_of(frame, row)}: missing value in column "
            f"{column!r}"
        )
    values = pandas.to_numeric(raw, errors="coerce")
    bad = values.isna().to_numpy()
    if bad.any():
        row = int(numpy.flatnonzero(bad)[0])
        raise interfaces.StreamFormatError(
            f"{path}: line {_line_of(frame, row)}: non-numeric value "
            f"{raw.iloc[row]!r} in column {column!r}"
        )
    return values.to_numpy(dtype=numpy.float64)


def _label_column(
    frame: pandas.DataFrame, column: str, path: PathLike
) -> interfaces.IntArray:
    values = _numeric_column(frame, column, path)
    not_int = ~numpy.isfinite(values) | (values != numpy.round(values))
    if not_int.any():
        row = int(numpy.flatnonzero(not_int)[0])
        raise interfaces.StreamFormatError(
            f"{path}: line {_line_of(frame, row)}: label {values[row]!r} is "
            "not an integer"
        )
    return values.astype(numpy.int64)


def _frame_to_pool(
    frame: pandas.DataFrame,
    label_column: str,
    path: PathLike,
    exclude: collections.abc.Collection[str] = (),
) -> datatypes.PointPool:
    if label_column not in frame.columns:
        raise interfaces.StreamFormatError(
            f"{path}: line 1: unknown label column {label_column!r}; "
            f"columns are {list(frame.columns)}"
        )
    feature_columns = [
        c for c in frame.columns if c != label_column and c not in exclude
    ]
    n = len(frame)
    if n == 0:
        return datatypes.PointPool(
            numpy.zeros((0, len(feature_columns))),
            numpy.zeros(0, dtype=numpy.int64),
        )
    labels = _label_column(frame, label_column, path)
    features = numpy.empty((n, len(feature_columns)))
    for j, column in enumerate(feature_columns):
        features[:, j] = _numeric_column(frame, column, path)
    return datatypes.PointPool(features, labels)


def load_labeled_csv(
    path: PathLike, label_column: str = "label"
) -> datatypes.PointPool:
    """
    Load a pool of labeled points from a CSV file.

    Parameters
    ----------
    path : str | os.PathLike
        CSV file with a header row.
    label_column : str (default: "label")
        Column holding integer class labels; every other column is a
        feature.

    Returns
    -------
    exmart.datatypes.PointPool
        Points in file order.  A header-only file gives an empty pool.

    Raises
    ------
    exmart.interfaces.StreamFormatError
        On ragged rows, missing or non-numeric values or an unknown label
        column.  The message names the offending line.
    """
    frame = _read_table(path)
    pool = _frame_to_pool(frame, label_column, path)
    logger.info(
        "Loaded %d points of dimension %d from %s", len(pool), pool.dim, path
    )
    return pool


def load_csv_stream(
    path: PathLike,
    label_column: str = "label",
    segment_column: str = "segment",
) -> datatypes.StreamSpec:
    """
    Load a stream from a CSV file, with optional ground truth.

    If `segment_column` is present, a change point is placed at every point
    whose segment value differs from that of its predecessor, and the column
    is not used as a feature.
    """
    frame = _read_table(path)
    has_segments = segment_column in frame.columns
    pool = _frame_to_pool(
        frame,
        label_column,
        path,
        exclude=(segment_column,) if has_segments else (),
    )
    change_points: tuple[int, ...] = ()
    if has_segments and len(frame) > 1:
        segments = frame[segment_column].astype(str).to_numpy()
        changed = numpy.flatnonzero(segments[1:] != segments[:-1])
        change_points = tuple(int(i) + 2 for i in changed)
    return datatypes.StreamSpec(pool, change_points)


def write_labeled_csv(
    data: typing.Union[datatypes.StreamSpec, datatypes.PointPool],
    path: PathLike,
    label_column: str = "label",
    segments: bool = False,
) -> None:
    """
    Write points as a labeled CSV with header ``f1,...,fm,<label_column>``.

    Parameters
    ----------
    data : exmart.datatypes.StreamSpec | exmart.datatypes.PointPool
        Points to write.
    path : str | os.PathLike
        Destination file.
    label_column : str (default: "label")
        Name of the label column.
    segments : bool (default: False)
        Append a ``segment`` column numbering the segments of a stream.
    """
    pool = data.pool if isinstance(data, datatypes.StreamSpec) else data
    columns = {
        f"f{j + 1}": pool.features[:, j] for j in range(pool.features.shape[1])
    }
    frame = pandas.DataFrame(columns)
    frame[label_column] = pool.labels
    if segments:
        change_points = (
            data.change_points if isinstance(data, datatypes.StreamSpec) else ()
        )
        seg = numpy.zeros(len(pool), dtype=numpy.int64)
        for c in change_points:
            seg[c - 1 :] += 1
        frame["segment"] = seg
    frame.to_csv(path, index=False)


@typing.final
@dataclasses.dataclass(frozen=True, slots=True)
class PoolDraw:
    """
    Points drawn from one pool for one segment.

    Parameters
    ----------
    pool : str
        Name of the source pool.
    count : int
        Number of points, drawn without replacement in pool order.
    relabel_to : typing.Optional[int] (default: None)
        Label given to every drawn point; labels are kept if None.
    """

    pool: str
    count: int
    relabel_to: typing.Optional[int] = None

    def __post_init__(self) -> None:
        if self.count < 1:
            raise interfaces.ConfigurationError(
                f"Draw from pool {self.pool!r} must have a positive count, "
                f"got {self.count}"
            )


@typing.final
@dataclasses.dataclass(frozen=True, slots=True)
class Segment:
    draws: tuple[PoolDraw, ...]
    shuffle: bool = True

    def __post_init__(self) -> None:
        object.__setattr__(self, "draws", tuple(self.draws))
        if not self.draws:
            raise interfaces.ConfigurationError("Segment has no draws")

    @property
    def size(self) -> int:
        return sum(draw.count for draw in self.draws)


@typing.final
@dataclasses.dataclass(frozen=True, slots=True)
class SegmentRecipe:
    """
    Declarative composition of a stream from named point pools.

    Parameters
    ----------
    sources : collections.abc.Mapping[str, exmart.datatypes.PointPool]
        Named pools.
    schedule : tuple[Segment, ...]
        Segments in stream order.
    shuffle_sources : bool (default: False)
        Permute every pool with the seed before drawing from it.
    """

    sources: collections.abc.Mapping[str, datatypes.PointPool]
    schedule: tuple[Segment, ...]
    shuffle_sources: bool = False

    def __post_init__(self) -> None:
        object.__setattr__(self, "schedule", tuple(self.schedule))
        if not self.schedule:
            raise interfaces.ConfigurationError("Recipe has no segments")
        for i, segment in enumerate(self.schedule):
            for draw in segment.draws:
                if draw.pool not in self.sources:
                    raise interfaces.ConfigurationError(
                        f"Segment {i + 1} draws from unknown pool "
                        f"{draw.pool!r}"
                    )
        dims = {pool.dim for pool in self.sources.values() if len(pool) > 0}
        if len(dims) > 1:
            raise interfaces.StreamFormatError(
                f"Source pools have different dimensions {sorted(dims)}"
            )

    @property
    def segment_sizes(self) -> tuple[int, ...]:
        return tuple(segment.size for segment in self.schedule)

    @property
    def change_points(self) -> tuple[int, ...]:
        return tuple(
            int(c) + 1 for c in numpy.cumsum(self.segment_sizes)[:-1]
        )


def compose_stream(
    recipe: SegmentRecipe, seed: int, replica: int = 0
) -> datatypes.StreamSpec:
    """
    Compose a stream by drawing segments from the recipe's pools.

    Draws take consecutive unused points of a pool.  Relabeling happens
    before the segment is shuffled.

    Parameters
    ----------
    recipe : SegmentRecipe
        Pools and schedule.
    seed : int
        Root seed of the shuffles.
    replica : int (default: 0)
        Replica index mixed into the seed.

    Returns
    -------
    exmart.datatypes.StreamSpec
        Stream whose change points are the first indices of every segment
        after the first.

    Raises
    ------
    exmart.interfaces.StreamFormatError
        If a pool runs out of points.
    """
    pools = dict(recipe.sources)
    if recipe.shuffle_sources:
        pool_rng = utils.derive_rng(seed, replica, utils.SeedPurpose.SHUFFLE, 1)
        for name in sorted(pools):
            pool = pools[name]
            pools[name] = pool.take(pool_rng.permutation(len(pool)))
    rng = utils.derive_rng(seed, replica, utils.SeedPurpose.SHUFFLE, 0)
    cursors = dict.fromkeys(pools, 0)
    segments = []
    for i, segment in enumerate(recipe.schedule):
        parts = []
        for draw in segment.draws:
            pool = pools[draw.pool]
            start = cursors[draw.pool]
            remaining = len(pool) - start
            if draw.count > remaining:
                raise interfaces.StreamFormatError(
                    f"Pool {draw.pool!r} exhausted in segment {i + 1}: "
                    f"needs {draw.count} points, {remaining} remain "
                    f"(short by {draw.count - remaining})"
                )
            part = pool[start : start + draw.count]
            cursors[draw.pool] = start + draw.count
            if draw.relabel_to is not None:
                part = part.with_labels(
                    numpy.full(draw.count, draw.relabel_to, dtype=numpy.int64)
                )
            parts.append(part)
        combined = datatypes.concat_pools(parts)
        if segment.shuffle:
            combined = combined.take(rng.permutation(len(combined)))
        segments.append(combined)
    stream = datatypes.StreamSpec(
        datatypes.concat_pools(segments), recipe.change_points
    )
    logger.info(
        "Composed stream of %d points with change points %s",
        len(stream),
        list(stream.change_points),
    )
    return stream


def _require(
    mapping: collections.abc.Mapping[str, typing.Any], key: str, where: str
) -> typing.Any:
    if key not in mapping:
        raise interfaces.StreamFormatError(f"{where}: missing key {key!r}")
    return mapping[key]


def _load_source(
    spec: collections.abc.Mapping[str, typing.Any],
    name: str,
    base: pathlib.Path,
) -> datatypes.PointPool:
    where = f"source {name!r}"
    path = base / str(_require(spec, "path", where))
    pool = load_labeled_csv(path, spec.get("label_column", "label"))
    labels = spec.get("labels")
    if labels is not None:
        wanted = numpy.asarray(labels, dtype=numpy.int64)
        keep = numpy.isin(pool.labels, wanted)
        pool = pool.take(numpy.flatnonzero(keep))
    offset = int(spec.get("offset", 0))
    limit = spec.get("limit")
    stop = len(pool) if limit is None else offset + int(limit)
    return pool[offset:stop]


def load_recipe(path: PathLike) -> SegmentRecipe:
    """
    Read a segment recipe from a JSON document.

    Source paths are resolved relative to the recipe file.  The document
    layout is::

        {
          "sources": {
            "<name>": {"path": "...csv", "label_column": "label",
                       "labels": [..], "offset": 0, "limit": null}
          },
          "shuffle_sources": false,
          "repeat": 1,
          "segments": [
            {"draws": [{"pool": "<name>", "count": 1000,
                        "relabel_to": null}],
             "shuffle": true}
          ]
        }

    ``labels``, ``offset``, ``limit``, ``relabel_to``, ``shuffle``,
    ``shuffle_sources`` and ``repeat`` are optional.  ``repeat`` concatenates
    the segment list with itself; draws keep advancing through the pools.
    """
    recipe_path = pathlib.Path(path)
    try:
        document = json.loads(recipe_path.read_text())
    except json.JSONDecodeError as err:
        raise interfaces.StreamFormatError(
            f"{path}: line {err.lineno}: invalid JSON ({err.msg})"
        ) from err
    if not isinstance(document, dict):
        raise interfaces.StreamFormatError(f"{path}: expected a JSON object")
    base = recipe_path.parent
    where = str(path)
    sources = {
        str(name): _load_source(spec, str(name), base)
        for name, spec in _require(document, "sources", where).items()
    }
    segments = []
    for i, seg in enumerate(_require(document, "segments", where)):
        draws = tuple(
            PoolDraw(
                str(_require(d, "pool", f"segment {i + 1}")),
                int(_require(d, "count", f"segment {i + 1}")),
                None if d.get("relabel_to") is None else int(d["relabel_to"]),
            )
            for d in _require(seg, "draws", f"segment {i + 1}")
        )
        segments.append(Segment(draws, bool(seg.get("shuffle", True))))
    repeat = int(document.get("repeat", 1))
    if repeat < 1:
        raise interfaces.ConfigurationError(
            f"{path}: repeat must be positive, got {repeat}"
        )
    return SegmentRecipe(
        sources,
        tuple(segments) * repeat,
        bool(document.get("shuffle_sources", False)),
    )


def load_recipe_stream(
    path: PathLike, seed: int, replica: int = 0
) -> datatypes.StreamSpec:
    """Compose the stream described by a recipe file."""
    return compose_stream(load_recipe(path), seed, replica)
