"""Partially connected analog beam matrices: group-wise narrow beams and baselines."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .array import UpaGeometry, VerticalPrior, steering_z


@dataclass(frozen=True)
class SubIntervalPartition:
    """Uniform split of the prior interval (sine domain) into ``g`` sub-intervals."""

    edges: np.ndarray

    @classmethod
    def uniform(cls, prior: VerticalPrior, g: int) -> "SubIntervalPartition":
        if g < 1:
            raise ValueError("g must be >= 1")
        return cls(np.linspace(prior.sin_lo, prior.sin_hi, g + 1))

    def __post_init__(self):
        if np.any(np.diff(self.edges) <= 0):
            raise ValueError("sub-interval edges must be strictly increasing")

    @property
    def g(self) -> int:
        return len(self.edges) - 1

    @property
    def centers(self) -> np.ndarray:
        return 0.5 * (self.edges[:-1] + self.edges[1:])

    def label(self, sin_phi) -> np.ndarray:
        """Index of the sub-interval containing each sine value (edges clipped)."""
        idx = np.searchsorted(self.edges, sin_phi, side="right") - 1
        return np.clip(idx, 0, self.g - 1)


@dataclass(frozen=True)
class GroupingPattern:
    """Binary ``n_y x g`` assignment of antenna columns to groups."""

    s: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.s)
        if s.ndim != 2:
            raise ValueError("pattern must be a 2-D matrix")
        if not np.isin(s, (0, 1)).all():
            raise ValueError("pattern entries must be 0 or 1")
        if np.any(s.sum(axis=1) > 1):
            raise ValueError("each antenna column may belong to at most one group")
        if np.any(s.sum(axis=0) < 1):
            raise ValueError("every group needs at least one antenna column")
        object.__setattr__(self, "s", s.astype(np.int8))

    @property
    def n_y(self) -> int:
        return self.s.shape[0]

    @property
    def g(self) -> int:
        return self.s.shape[1]

    def column_groups(self) -> np.ndarray:
        """Group index per antenna column, -1 for unassigned columns."""
        out = np.full(self.n_y, -1)
        rows, cols = np.nonzero(self.s)
        out[rows] = cols
        return out

    @classmethod
    def from_labels(cls, labels, g: int) -> "GroupingPattern":
        labels = np.asarray(labels)
        s = np.zeros((len(labels), g), dtype=np.int8)
        assigned = labels >= 0
        s[np.nonzero(assigned)[0], labels[assigned]] = 1
        return cls(s)

    @classmethod
    def uniform(cls, n_y: int, g: int) -> "GroupingPattern":
        """Contiguous blocks of adjacent columns, one block per group."""
        labels = np.empty(n_y, dtype=int)
        for k, block in enumerate(np.array_split(np.arange(n_y), g)):
            labels[block] = k
        return cls.from_labels(labels, g)

    @classmethod
    def random(cls, n_y: int, g: int, rng) -> "GroupingPattern":
        """Every column assigned to a uniformly drawn group, no group left empty."""
        rng = np.random.default_rng(rng)
        if g > n_y:
            raise ValueError("more groups than antenna columns")
        while True:
            labels = rng.integers(0, g, n_y)
            if len(np.unique(labels)) == g:
                return cls.from_labels(labels, g)


@dataclass(frozen=True)
class AnalogBeamMatrix:
    """Block-diagonal constant-modulus analog combiner.

    ``vectors[k]`` is the length-M compression vector of RF chain ``k``, which
    drives antennas ``k*M ... k*M + M - 1`` (column ``k // T``, vertical block
    ``k % T``).  Rows belonging to unassigned antenna columns are zero and
    marked inactive.
    """

    geom: UpaGeometry
    vectors: np.ndarray
    active: np.ndarray
    group_vectors: np.ndarray | None = None
    pattern: GroupingPattern | None = None
    dense: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        geom = self.geom
        if self.vectors.shape != (geom.n_rf, geom.m):
            raise ValueError(f"expected {(geom.n_rf, geom.m)} compression vectors, got {self.vectors.shape}")
        dense = np.zeros((geom.n_rf, geom.n_r), dtype=complex)
        for k in range(geom.n_rf):
            if self.active[k]:
                dense[k, k * geom.m:(k + 1) * geom.m] = self.vectors[k]
        object.__setattr__(self, "dense", dense)

    @property
    def is_group_wise(self) -> bool:
        return self.pattern is not None

    @property
    def row_column(self) -> np.ndarray:
        """Antenna column driven by each RF chain."""
        return np.arange(self.geom.n_rf) // self.geom.t

    @property
    def row_block(self) -> np.ndarray:
        """Vertical block index (0..T-1) of each RF chain within its column."""
        return np.arange(self.geom.n_rf) % self.geom.t

    def group_rows(self, g: int) -> np.ndarray:
        """Indices of the nonzero rows of the g-th group's beam matrix."""
        if self.pattern is None:
            raise ValueError("beam matrix is not group-wise")
        cols = np.nonzero(self.pattern.s[:, g])[0]
        return np.nonzero(np.isin(self.row_column, cols))[0]

    def group_block(self, g: int) -> np.ndarray:
        """W_g: T x N_z block diagonal repetition of the group's narrow beam."""
        geom = self.geom
        return np.kron(np.eye(geom.t), self.group_vectors[g][None, :])

    def group_dense(self, g: int) -> np.ndarray:
        """F_g: the g-th group's contribution to the dense matrix."""
        return np.kron(np.diag(self.pattern.s[:, g]), self.group_block(g))

    def support_mask(self) -> np.ndarray:
        """Boolean PC-HBF connectivity mask (RF chain k to its M antennas)."""
        geom = self.geom
        mask = np.zeros((geom.n_rf, geom.n_r), dtype=bool)
        for k in range(geom.n_rf):
            mask[k, k * geom.m:(k + 1) * geom.m] = True
        return mask


def narrow_beam(center_sin: float, m: int) -> np.ndarray:
    """Phase-only compression vector whose response peaks (value ``m``) at ``center_sin``."""
    if m < 1:
        raise ValueError("m must be >= 1")
    if abs(center_sin) > 1:
        raise ValueError("center_sin must lie in [-1, 1]")
    return np.conj(steering_z(center_sin, m))


def build_group_beam_matrix(
    partition: SubIntervalPartition, pattern: GroupingPattern, geom: UpaGeometry
) -> AnalogBeamMatrix:
    """Group-wise narrow beam: every column of group g uses a beam at the g-th sub-interval center."""
    if pattern.g != partition.g:
        raise ValueError(f"pattern has {pattern.g} groups but partition has {partition.g}")
    if pattern.n_y != geom.n_y:
        raise ValueError("pattern rows must equal n_y")
    group_vectors = np.stack([narrow_beam(c, geom.m) for c in partition.centers])
    col_group = pattern.column_groups()
    row_group = col_group[np.arange(geom.n_rf) // geom.t]
    active = row_group >= 0
    vectors = np.zeros((geom.n_rf, geom.m), dtype=complex)
    vectors[active] = group_vectors[row_group[active]]
    return AnalogBeamMatrix(geom, vectors, active, group_vectors, pattern)


def wide_beam_matrix(prior: VerticalPrior, geom: UpaGeometry) -> AnalogBeamMatrix:
    """Every RF chain uses one phase-only beam aimed at the prior's center."""
    v = narrow_beam(prior.center, geom.m)
    return AnalogBeamMatrix(geom, np.tile(v, (geom.n_rf, 1)), np.ones(geom.n_rf, dtype=bool))


def random_beam_matrix(geom: UpaGeometry, rng_seed=None) -> AnalogBeamMatrix:
    rng = np.random.default_rng(rng_seed)
    phases = rng.uniform(0.0, 2 * np.pi, (geom.n_rf, geom.m))
    return AnalogBeamMatrix(geom, np.exp(1j * phases), np.ones(geom.n_rf, dtype=bool))


def write_beam_csv(beam: AnalogBeamMatrix, path) -> None:
    rows, cols = np.nonzero(beam.dense)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(("row", "col", "re", "im"))
        for r, c in zip(rows, cols):
            z = beam.dense[r, c]
            writer.writerow((r, c, repr(float(z.real)), repr(float(z.imag))))


def read_beam_csv(path, geom: UpaGeometry) -> np.ndarray:
    dense = np.zeros((geom.n_rf, geom.n_r), dtype=complex)
    with open(path, newline="") as fh:
        for rec in csv.DictReader(fh):
            dense[int(rec["row"]), int(rec["col"])] = complex(float(rec["re"]), float(rec["im"]))
    return dense


def write_pattern_csv(pattern: GroupingPattern, path, header: dict | None = None) -> None:
    """0/1 matrix, one antenna column per line, optional ``# key=value`` header lines."""
    with open(path, "w", newline="") as fh:
        for key, value in (header or {}).items():
            fh.write(f"# {key}={value}\n")
        writer = csv.writer(fh)
        for row in pattern.s:
            writer.writerow(int(x) for x in row)


def read_pattern_csv(path) -> tuple[GroupingPattern, dict]:
    header = {}
    rows = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                key, _, value = line[1:].strip().partition("=")
                header[key.strip()] = value.strip()
            else:
                rows.append([int(x) for x in line.split(",")])
    return GroupingPattern(np.array(rows)), header
