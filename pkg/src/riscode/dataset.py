"""Grid sampling, label generation, normalization, splitting, and file I/O.

A dataset is built by running the greedy traversal at every point of a
regular lattice over the user-position box and storing the encoded optimal
codebook as the label.  Coordinates are normalized to [-1, +1]^3 using the
box bounds (not the data extent), so off-grid inference points normalize
consistently.

File format (line-oriented text, version tag "riscode-dataset v1"):

    riscode-dataset v1
    <meta as one JSON object, includes sample_count>
    <x> <y> <z> <label bit string> <power_dbm>      (one line per sample)

Raw coordinates and powers are written with shortest round-trip float
representation, so save -> load is lossless and regeneration with the same
meta is byte-identical.
"""

import json
from dataclasses import dataclass

import numpy as np

from .codebook import EncodedLabel, encode
from .errors import EmptyPartition, ParseError, VersionMismatch
from .fieldsim import ScenarioGeometry
from .oracle import greedy_traversal

__all__ = [
    "GridSpec",
    "Sample",
    "DatasetMeta",
    "Dataset",
    "grid_points",
    "normalize",
    "denormalize",
    "generate",
    "split",
    "save",
    "load",
]

_FORMAT_TAG = "riscode-dataset"
_FORMAT_VERSION = 1


def _point3(values, name: str) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64).reshape(-1)
    if arr.shape != (3,):
        raise ValueError(f"{name} must be a 3-vector")
    return arr


@dataclass(eq=False)
class GridSpec:
    """Axis-aligned sampling box with per-axis point counts."""

    box_min: np.ndarray
    box_max: np.ndarray
    counts: tuple

    def __post_init__(self):
        self.box_min = _point3(self.box_min, "box_min")
        self.box_max = _point3(self.box_max, "box_max")
        self.counts = tuple(int(c) for c in self.counts)
        if len(self.counts) != 3 or any(c < 1 for c in self.counts):
            raise ValueError(f"counts must be 3 positive integers, got {self.counts}")
        if not np.all(self.box_max > self.box_min):
            raise ValueError("box_max must exceed box_min on every axis")
        self.box_min.setflags(write=False)
        self.box_max.setflags(write=False)

    @property
    def total_points(self) -> int:
        return self.counts[0] * self.counts[1] * self.counts[2]

    def to_dict(self) -> dict:
        return {
            "box_min": [float(v) for v in self.box_min],
            "box_max": [float(v) for v in self.box_max],
            "counts": list(self.counts),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "GridSpec":
        try:
            return cls(data["box_min"], data["box_max"], data["counts"])
        except KeyError as exc:
            raise ParseError(f"grid spec missing key {exc}") from exc

    def __eq__(self, other) -> bool:
        return isinstance(other, GridSpec) and self.to_dict() == other.to_dict()


@dataclass(eq=False)
class Sample:
    """One (coordinate, optimal-codebook label) pair.

    ``power_dbm`` is the received power of the decoded label at
    ``coord_raw`` -- a provenance/debug field, recomputable from the rest.
    """

    coord_raw: np.ndarray
    coord_norm: np.ndarray
    label: EncodedLabel
    power_dbm: float

    def __post_init__(self):
        self.coord_raw = _point3(self.coord_raw, "coord_raw")
        self.coord_norm = _point3(self.coord_norm, "coord_norm")

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, Sample)
            and np.array_equal(self.coord_raw, other.coord_raw)
            and np.array_equal(self.coord_norm, other.coord_norm)
            and self.label == other.label
            and self.power_dbm == other.power_dbm
        )


@dataclass(eq=False)
class DatasetMeta:
    """Provenance of a dataset: geometry, lattice, seed, and split plan."""

    geometry: ScenarioGeometry
    grid: GridSpec
    seed: int
    split_fractions: tuple = (0.8, 0.1, 0.1)

    def __post_init__(self):
        self.seed = int(self.seed)
        if self.seed < 0:
            raise ValueError("seed must be a non-negative integer")
        fr = tuple(float(f) for f in self.split_fractions)
        if len(fr) != 3 or any(f < 0 or f > 1 for f in fr):
            raise ValueError("split_fractions must be 3 values in [0, 1]")
        if abs(sum(fr) - 1.0) > 1e-9:
            raise ValueError(f"split_fractions must sum to 1, got {sum(fr)}")
        self.split_fractions = fr

    def to_dict(self) -> dict:
        return {
            "geometry": self.geometry.to_dict(),
            "grid": self.grid.to_dict(),
            "seed": self.seed,
            "split_fractions": list(self.split_fractions),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "DatasetMeta":
        try:
            return cls(
                geometry=ScenarioGeometry.from_dict(data["geometry"]),
                grid=GridSpec.from_dict(data["grid"]),
                seed=data["seed"],
                split_fractions=tuple(data["split_fractions"]),
            )
        except KeyError as exc:
            raise ParseError(f"dataset meta missing key {exc}") from exc

    def __eq__(self, other) -> bool:
        return isinstance(other, DatasetMeta) and self.to_dict() == other.to_dict()


@dataclass(eq=False)
class Dataset:
    meta: DatasetMeta
    samples: list

    def __len__(self) -> int:
        return len(self.samples)

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, Dataset)
            and self.meta == other.meta
            and self.samples == other.samples
        )


def grid_points(grid: GridSpec) -> np.ndarray:
    """Lattice points including both box faces per axis, shape (K, 3).

    An axis with count 1 collapses to the box center.  Enumeration order is
    fixed for reproducibility: x varies fastest, z slowest.
    """
    axes = []
    for lo, hi, n in zip(grid.box_min, grid.box_max, grid.counts):
        axes.append(np.array([(lo + hi) / 2.0]) if n == 1 else np.linspace(lo, hi, n))
    zz, yy, xx = np.meshgrid(axes[2], axes[1], axes[0], indexing="ij")
    return np.stack([xx.reshape(-1), yy.reshape(-1), zz.reshape(-1)], axis=1)


def normalize(coords, grid: GridSpec) -> np.ndarray:
    """Affine map of raw coordinates from the box to [-1, +1]^3."""
    arr = np.asarray(coords, dtype=np.float64)
    return 2.0 * (arr - grid.box_min) / (grid.box_max - grid.box_min) - 1.0


def denormalize(coords, grid: GridSpec) -> np.ndarray:
    arr = np.asarray(coords, dtype=np.float64)
    return grid.box_min + (arr + 1.0) / 2.0 * (grid.box_max - grid.box_min)


def generate(meta: DatasetMeta) -> Dataset:
    """Label every grid point with its greedy-traversal optimal codebook.

    Samples follow grid enumeration order; fully deterministic.  Oracle or
    geometry errors are re-raised with the offending point index attached.
    """
    samples = []
    for k, point in enumerate(grid_points(meta.grid)):
        try:
            result = greedy_traversal(meta.geometry, point)
            label = encode(result.codebook)
        except Exception as exc:
            raise type(exc)(f"at grid point {k} {tuple(point)}: {exc}") from exc
        samples.append(
            Sample(
                coord_raw=point,
                coord_norm=normalize(point, meta.grid),
                label=label,
                power_dbm=result.power_dbm,
            )
        )
    return Dataset(meta=meta, samples=samples)


def split(dataset: Dataset, meta: DatasetMeta | None = None):
    """Seeded shuffle then partition into (train, val, test) sample lists.

    Partition sizes are the rounded cumulative fractions, so they always
    sum to the dataset size.  Raises EmptyPartition when a nonzero fraction
    receives zero samples.
    """
    meta = meta or dataset.meta
    n = len(dataset.samples)
    f1, f2, _ = meta.split_fractions
    cut1 = int(np.floor(f1 * n + 0.5))
    cut2 = int(np.floor((f1 + f2) * n + 0.5))
    perm = np.random.default_rng(meta.seed).permutation(n)
    parts = (perm[:cut1], perm[cut1:cut2], perm[cut2:])
    for name, frac, part in zip(("train", "val", "test"), meta.split_fractions, parts):
        if frac > 0 and part.size == 0:
            raise EmptyPartition(f"{name} fraction {frac} yields zero of {n} samples")
    train, val, test = ([dataset.samples[i] for i in part] for part in parts)
    return train, val, test


def save(dataset: Dataset, path) -> None:
    meta = dataset.meta.to_dict()
    meta["sample_count"] = len(dataset.samples)
    lines = [f"{_FORMAT_TAG} v{_FORMAT_VERSION}", json.dumps(meta, sort_keys=True)]
    for s in dataset.samples:
        x, y, z = (repr(float(c)) for c in s.coord_raw)
        lines.append(f"{x} {y} {z} {s.label.to_bitstring()} {repr(float(s.power_dbm))}")
    with open(path, "w", encoding="ascii") as fh:
        fh.write("\n".join(lines) + "\n")


def load(path) -> Dataset:
    """Parse a dataset file; coord_norm is rebuilt from the grid bounds.

    Externally produced files (e.g. measured data) load as long as they
    follow the schema; sample coordinates need not lie on the grid.
    """
    with open(path, "r", encoding="ascii") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise ParseError(f"{path}: empty file")
    tag = lines[0].split()
    if len(tag) != 2 or tag[0] != _FORMAT_TAG:
        raise VersionMismatch(f"{path}: unrecognized format tag {lines[0]!r}")
    if tag[1] != f"v{_FORMAT_VERSION}":
        raise VersionMismatch(f"{path}: unsupported version {tag[1]!r}")
    if len(lines) < 2:
        raise ParseError(f"{path}: missing meta header line")
    try:
        header = json.loads(lines[1])
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: bad meta JSON: {exc}") from exc
    if "sample_count" not in header:
        raise ParseError(f"{path}: meta header missing sample_count")
    count = int(header.pop("sample_count"))
    meta = DatasetMeta.from_dict(header)
    n_bits = meta.geometry.rows + meta.geometry.cols - 1

    records = [ln for ln in lines[2:] if ln.strip()]
    if len(records) != count:
        raise ParseError(
            f"{path}: expected {count} sample records, found {len(records)} "
            f"(file truncated at record {len(records)})"
        )
    samples = []
    for k, line in enumerate(records):
        fields = line.split()
        if len(fields) != 5:
            raise ParseError(f"{path}: record {k}: expected 5 fields, got {len(fields)}")
        try:
            coord = np.array([float(fields[0]), float(fields[1]), float(fields[2])])
            if len(fields[3]) != n_bits:
                raise ValueError(f"label needs {n_bits} bits, got {len(fields[3])}")
            label = EncodedLabel.from_bitstring(
                fields[3], meta.geometry.rows, meta.geometry.cols
            )
            power = float(fields[4])
        except ValueError as exc:
            raise ParseError(f"{path}: record {k}: {exc}") from exc
        samples.append(
            Sample(
                coord_raw=coord,
                coord_norm=normalize(coord, meta.grid),
                label=label,
                power_dbm=power,
            )
        )
    return Dataset(meta=meta, samples=samples)
