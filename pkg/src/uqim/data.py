"""Dataset containers, CSV ingestion and run configuration.

Containers are frozen dataclasses holding read-only numpy arrays, so they can
be shared freely across threads.  CSV parsing reports the exact row and
column of the first offending cell; data rows are numbered from 1 (the
header is row 0).
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError, DomainError, ValidationError

DATASET_KINDS = ("experimental", "simulated")


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class PairedDataset:
    """Input/output pairs (X_i, Y_i) with a provenance tag.

    Parameters
    ----------
    inputs : (n, d) array
    outputs : (n,) array
    kind : {"experimental", "simulated"}
    """

    inputs: np.ndarray
    outputs: np.ndarray
    kind: str
    input_names: tuple[str, ...] = ()
    output_name: str = "y"

    def __post_init__(self):
        inputs = np.atleast_2d(np.asarray(self.inputs, dtype=float))
        if inputs.ndim != 2:
            raise DataError("inputs must be a 2-d array of shape (n, d)")
        outputs = np.asarray(self.outputs, dtype=float).ravel()
        if inputs.shape[0] != outputs.shape[0]:
            raise DataError(
                f"row mismatch: {inputs.shape[0]} input rows vs "
                f"{outputs.shape[0]} outputs"
            )
        if inputs.shape[0] < 1:
            raise DataError("dataset needs at least one row")
        if self.kind not in DATASET_KINDS:
            raise DataError(f"unknown dataset kind {self.kind!r}")
        if not np.all(np.isfinite(inputs)) or not np.all(np.isfinite(outputs)):
            raise DataError("dataset contains non-finite values")
        names = tuple(self.input_names) or tuple(
            f"x{j + 1}" for j in range(inputs.shape[1])
        )
        if len(names) != inputs.shape[1]:
            raise DataError(
                f"{len(names)} input names for {inputs.shape[1]} columns"
            )
        object.__setattr__(self, "inputs", _readonly(inputs))
        object.__setattr__(self, "outputs", _readonly(outputs))
        object.__setattr__(self, "input_names", names)

    @property
    def n(self) -> int:
        return self.inputs.shape[0]

    @property
    def dim(self) -> int:
        return self.inputs.shape[1]


@dataclass(frozen=True)
class InputSample:
    """Bare input points (no outputs), e.g. a Monte Carlo design."""

    points: np.ndarray
    names: tuple[str, ...] = ()

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        if pts.ndim != 2 or pts.shape[0] < 1:
            raise DataError("input sample must be a nonempty (n, d) array")
        if not np.all(np.isfinite(pts)):
            raise DataError("input sample contains non-finite values")
        names = tuple(self.names) or tuple(
            f"x{j + 1}" for j in range(pts.shape[1])
        )
        if len(names) != pts.shape[1]:
            raise DataError(f"{len(names)} names for {pts.shape[1]} columns")
        object.__setattr__(self, "points", _readonly(pts))
        object.__setattr__(self, "names", names)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]


def _read_rows(path) -> tuple[list[str], list[list[str]]]:
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    with fh:
        rows = [row for row in csv.reader(fh) if row and any(c.strip() for c in row)]
    if not rows:
        raise DataError(f"{path}: file is empty")
    return [c.strip() for c in rows[0]], rows[1:]


def _cell(raw: str, row: int, col: str, path) -> float:
    try:
        return float(raw)
    except ValueError:
        raise DataError(
            f"{path}: non-numeric value {raw.strip()!r} at row {row}, "
            f"column {col!r}"
        ) from None


def _columns(path, wanted: list[str]) -> tuple[list[list[str]], list[int]]:
    header, body = _read_rows(path)
    missing = [c for c in wanted if c not in header]
    if missing:
        raise DataError(f"{path}: missing columns {missing} (header: {header})")
    if not body:
        raise DataError(f"{path}: no data rows")
    idx = [header.index(c) for c in wanted]
    for i, row in enumerate(body, start=1):
        if len(row) != len(header):
            raise DataError(
                f"{path}: row {i} has {len(row)} fields, expected {len(header)}"
            )
    return body, idx


def parse_dataset(path, input_columns, output_column, kind="experimental"):
    """Parse a CSV file with a header row into a :class:`PairedDataset`."""
    input_columns = list(input_columns)
    body, idx = _columns(path, input_columns + [output_column])
    raw = np.empty((len(body), len(idx)))
    names = input_columns + [output_column]
    for i, row in enumerate(body, start=1):
        for j, col in zip(idx, names):
            raw[i - 1, names.index(col)] = _cell(row[j], i, col, path)
    return PairedDataset(
        inputs=raw[:, :-1],
        outputs=raw[:, -1],
        kind=kind,
        input_names=tuple(input_columns),
        output_name=output_column,
    )


def parse_inputs(path, columns=None) -> InputSample:
    """Parse a CSV of input points; ``columns=None`` takes every column."""
    if columns is None:
        header, body = _read_rows(path)
        if not body:
            raise DataError(f"{path}: no data rows")
        columns = header
    body, idx = _columns(path, list(columns))
    pts = np.empty((len(body), len(idx)))
    for i, row in enumerate(body, start=1):
        for k, j in enumerate(idx):
            pts[i - 1, k] = _cell(row[j], i, columns[k], path)
    return InputSample(points=pts, names=tuple(columns))


def _format(x: float) -> str:
    # repr of a Python float is the shortest string that round-trips bitwise
    return repr(float(x))


def write_dataset(dataset: PairedDataset, path) -> None:
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(list(dataset.input_names) + [dataset.output_name])
        for x, y in zip(dataset.inputs, dataset.outputs):
            out.writerow([_format(v) for v in x] + [_format(y)])


def write_inputs(sample: InputSample, path) -> None:
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(list(sample.names))
        for x in sample.points:
            out.writerow([_format(v) for v in x])


_UINT64_MAX = 2**64 - 1


@dataclass
class RunConfig:
    """Pipeline configuration: seed, sample sizes and per-method blocks.

    ``methods`` maps a method name (CLI subcommand) to an opaque dict of
    parameters interpreted by that method.
    """

    seed: int = 0
    l_n: int | None = None
    n1: int | None = None
    n2: int | None = None
    threads: int | None = None
    out_dir: str | None = None
    methods: dict = field(default_factory=dict)

    _SCALARS = ("seed", "l_n", "n1", "n2", "threads", "out_dir")

    def validate(self) -> None:
        problems = []
        if not isinstance(self.seed, int) or not 0 <= self.seed <= _UINT64_MAX:
            problems.append(f"seed: must be an integer in [0, 2^64-1], got {self.seed!r}")
        for name in ("l_n", "n1", "n2"):
            v = getattr(self, name)
            if v is not None and (not isinstance(v, int) or v < 1):
                problems.append(f"{name}: must be a positive integer, got {v!r}")
        if self.threads is not None and (
            not isinstance(self.threads, int) or self.threads < 1
        ):
            problems.append(f"threads: must be a positive integer, got {self.threads!r}")
        if self.out_dir is not None and not isinstance(self.out_dir, str):
            problems.append(f"out_dir: must be a string, got {self.out_dir!r}")
        if not isinstance(self.methods, dict):
            problems.append("methods: must be an object")
        else:
            for key, block in self.methods.items():
                if not isinstance(block, dict):
                    problems.append(f"methods.{key}: must be an object")
        if problems:
            raise ValidationError(
                "invalid configuration: " + "; ".join(problems),
                fields=[p.split(":", 1)[0] for p in problems],
            )

    @classmethod
    def from_dict(cls, obj: dict) -> "RunConfig":
        if not isinstance(obj, dict):
            raise ValidationError("configuration root must be a JSON object")
        known = {k: obj[k] for k in cls._SCALARS if k in obj}
        methods = {
            k: v for k, v in obj.items() if k not in cls._SCALARS
        }
        cfg = cls(methods=methods, **known)
        cfg.validate()
        return cfg

    @classmethod
    def from_json(cls, path) -> "RunConfig":
        try:
            with open(path) as fh:
                obj = json.load(fh)
        except OSError as exc:
            raise DataError(f"cannot read {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise DataError(f"{path}: invalid JSON ({exc})") from exc
        return cls.from_dict(obj)

    def to_dict(self) -> dict:
        out = {k: getattr(self, k) for k in self._SCALARS if getattr(self, k) is not None}
        out.update(self.methods)
        return out

    def to_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")


def check_probability(name: str, value: float, open_ends=(True, True)) -> float:
    """Validate a scalar lies in (0,1) (or the closed variants)."""
    v = float(value)
    lo_ok = v > 0.0 if open_ends[0] else v >= 0.0
    hi_ok = v < 1.0 if open_ends[1] else v <= 1.0
    if not (math.isfinite(v) and lo_ok and hi_ok):
        bounds = f"{'(' if open_ends[0] else '['}0, 1{')' if open_ends[1] else ']'}"
        raise DomainError(f"{name} must lie in {bounds}, got {value}")
    return v
