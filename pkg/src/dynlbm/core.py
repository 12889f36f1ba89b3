"""Domain types and sufficient statistics for the non-stationary Poisson LBM.

Axis convention used throughout the package: 0 = rows (node set A, labels
``c``), 1 = columns (node set B, labels ``w``), 2 = time intervals
(labels ``y``).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping

import numpy as np
from scipy.special import gammaln

ROW, COL, TIME = 0, 1, 2
AXES = (ROW, COL, TIME)
AXIS_NAMES = ("row", "col", "time")


class ContractError(ValueError):
    """Raised when inputs violate a documented precondition."""


def axis_index(dim) -> int:
    if isinstance(dim, str):
        try:
            return AXIS_NAMES.index(dim)
        except ValueError:
            raise ContractError(f"unknown dimension {dim!r}") from None
    if dim not in AXES:
        raise ContractError(f"unknown dimension {dim!r}")
    return int(dim)


@dataclass(frozen=True)
class EventRecord:
    row: int
    col: int
    interval: int
    count: int

    def __post_init__(self):
        if min(self.row, self.col, self.interval) < 0:
            raise ContractError(f"negative index in {self}")
        if self.count < 0:
            raise ContractError(f"negative count in {self}")


@dataclass(frozen=True)
class Hyperparams:
    """Gamma(a, b) prior on block rates, symmetric Dirichlet concentrations
    for the row/column/time partitions, and the interval width."""

    a: float = 1.0
    b: float = 1.0
    alpha: float = 1.0
    delta: float = 1.0
    gamma: float = 1.0
    delta_t: float = 1.0

    def __post_init__(self):
        for name in ("a", "b", "alpha", "delta", "gamma", "delta_t"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v > 0):
                raise ContractError(f"hyperparameter {name} must be > 0, got {v!r}")

    def concentration(self, axis: int) -> float:
        return (self.alpha, self.delta, self.gamma)[axis]


class CountTensor:
    """Immutable sparse N x M x U tensor of interaction counts.

    Stored in coordinate form with duplicate coordinates summed and zeros
    dropped. ``log_factorial_constant`` is sum(log(n!)) over all cells.
    """

    def __init__(self, shape, rows, cols, intervals, counts):
        n, m, u = (int(s) for s in shape)
        if min(n, m, u) < 1:
            raise ContractError(f"tensor dimensions must be positive, got {(n, m, u)}")
        rows = np.asarray(rows, dtype=np.int64).ravel()
        cols = np.asarray(cols, dtype=np.int64).ravel()
        intervals = np.asarray(intervals, dtype=np.int64).ravel()
        counts = np.asarray(counts, dtype=np.int64).ravel()
        if not (len(rows) == len(cols) == len(intervals) == len(counts)):
            raise ContractError("coordinate arrays have different lengths")
        if len(counts):
            if counts.min() < 0:
                raise ContractError("counts must be non-negative")
            for arr, bound, name in ((rows, n, "row"), (cols, m, "col"), (intervals, u, "interval")):
                if arr.min() < 0 or arr.max() >= bound:
                    raise ContractError(f"{name} index out of range [0, {bound})")

        flat = (rows * m + cols) * u + intervals
        keys, inverse = np.unique(flat, return_inverse=True)
        summed = np.bincount(inverse, weights=counts, minlength=len(keys))
        summed = np.rint(summed).astype(np.int64)
        keep = summed > 0
        keys, summed = keys[keep], summed[keep]

        self._shape = (n, m, u)
        self._rows = keys // (m * u)
        self._cols = (keys // u) % m
        self._intervals = keys % u
        self._counts = summed
        for arr in (self._rows, self._cols, self._intervals, self._counts):
            arr.setflags(write=False)
        self._total = int(summed.sum())
        self._log_factorial_constant = float(gammaln(summed + 1.0).sum())

    @classmethod
    def from_entries(cls, shape, entries: Mapping[tuple[int, int, int], int]) -> "CountTensor":
        if not entries:
            return cls(shape, [], [], [], [])
        coords = np.array(list(entries.keys()), dtype=np.int64).reshape(-1, 3)
        counts = np.fromiter(entries.values(), dtype=np.int64, count=len(entries))
        return cls(shape, coords[:, 0], coords[:, 1], coords[:, 2], counts)

    @classmethod
    def from_records(cls, shape, records: Iterable[EventRecord]) -> "CountTensor":
        recs = list(records)
        return cls(
            shape,
            [r.row for r in recs],
            [r.col for r in recs],
            [r.interval for r in recs],
            [r.count for r in recs],
        )

    @classmethod
    def from_dense(cls, array) -> "CountTensor":
        array = np.asarray(array)
        if array.ndim != 3:
            raise ContractError("dense tensor must be three-dimensional")
        if np.any(array < 0) or np.any(array != np.rint(array)):
            raise ContractError("dense tensor must hold non-negative integers")
        r, c, t = np.nonzero(array)
        return cls(array.shape, r, c, t, array[r, c, t])

    @property
    def shape(self) -> tuple[int, int, int]:
        return self._shape

    @property
    def n_rows(self) -> int:
        return self._shape[0]

    @property
    def n_cols(self) -> int:
        return self._shape[1]

    @property
    def n_intervals(self) -> int:
        return self._shape[2]

    @property
    def coords(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return self._rows, self._cols, self._intervals

    @property
    def counts(self) -> np.ndarray:
        return self._counts

    @property
    def nnz(self) -> int:
        return len(self._counts)

    @property
    def total(self) -> int:
        return self._total

    @property
    def log_factorial_constant(self) -> float:
        return self._log_factorial_constant

    @property
    def entries(self) -> dict[tuple[int, int, int], int]:
        return {
            (int(i), int(j), int(u)): int(n)
            for i, j, u, n in zip(self._rows, self._cols, self._intervals, self._counts)
        }

    def records(self) -> list[EventRecord]:
        return [EventRecord(i, j, u, n) for (i, j, u), n in self.entries.items()]

    def dense(self) -> np.ndarray:
        out = np.zeros(self._shape, dtype=np.int64)
        out[self._rows, self._cols, self._intervals] = self._counts
        return out

    def interval_totals(self) -> np.ndarray:
        return np.bincount(self._intervals, weights=self._counts, minlength=self.n_intervals).astype(np.int64)

    def __eq__(self, other):
        if not isinstance(other, CountTensor):
            return NotImplemented
        return (
            self._shape == other._shape
            and np.array_equal(self._rows, other._rows)
            and np.array_equal(self._cols, other._cols)
            and np.array_equal(self._intervals, other._intervals)
            and np.array_equal(self._counts, other._counts)
        )

    __hash__ = None

    def __repr__(self):
        return f"CountTensor(shape={self._shape}, nnz={self.nnz}, total={self._total})"


def _compact(labels) -> tuple[np.ndarray, np.ndarray]:
    labels = np.asarray(labels, dtype=np.int64).ravel()
    if labels.size == 0:
        raise ContractError("label vector must be non-empty")
    if labels.min() < 0:
        raise ContractError("labels must be non-negative")
    used, compacted = np.unique(labels, return_inverse=True)
    return compacted.astype(np.int64), np.bincount(compacted, minlength=len(used)).astype(np.int64)


class TriPartition:
    """Row, column and time labels with their cluster sizes.

    Labels passed to the constructor are compacted to 0..Q-1 in order of
    their original values, so no empty cluster is ever retained.
    """

    def __init__(self, c, w, y):
        self.labels = []
        self.sizes = []
        for lab in (c, w, y):
            compacted, sizes = _compact(lab)
            self.labels.append(compacted)
            self.sizes.append(sizes)

    @property
    def c(self) -> np.ndarray:
        return self.labels[ROW]

    @property
    def w(self) -> np.ndarray:
        return self.labels[COL]

    @property
    def y(self) -> np.ndarray:
        return self.labels[TIME]

    @property
    def K(self) -> int:
        return len(self.sizes[ROW])

    @property
    def G(self) -> int:
        return len(self.sizes[COL])

    @property
    def D(self) -> int:
        return len(self.sizes[TIME])

    @property
    def sizes_A(self) -> np.ndarray:
        return self.sizes[ROW]

    @property
    def sizes_B(self) -> np.ndarray:
        return self.sizes[COL]

    @property
    def sizes_C(self) -> np.ndarray:
        return self.sizes[TIME]

    @property
    def counts(self) -> tuple[int, int, int]:
        return self.K, self.G, self.D

    @property
    def shape(self) -> tuple[int, int, int]:
        return tuple(len(lab) for lab in self.labels)

    def __eq__(self, other):
        if not isinstance(other, TriPartition):
            return NotImplemented
        return all(np.array_equal(a, b) for a, b in zip(self.labels, other.labels))

    __hash__ = None

    def __repr__(self):
        return f"TriPartition(K={self.K}, G={self.G}, D={self.D}, shape={self.shape})"

    def copy(self) -> "TriPartition":
        return TriPartition(*(lab.copy() for lab in self.labels))

    def check(self) -> None:
        for axis in AXES:
            lab, sizes = self.labels[axis], self.sizes[axis]
            if len(sizes) == 0 or np.any(sizes < 1):
                raise ContractError(f"empty cluster on {AXIS_NAMES[axis]} axis")
            if lab.min() < 0 or lab.max() >= len(sizes):
                raise ContractError(f"label out of range on {AXIS_NAMES[axis]} axis")
            if not np.array_equal(np.bincount(lab, minlength=len(sizes)), sizes):
                raise ContractError(f"cluster sizes out of sync on {AXIS_NAMES[axis]} axis")

    def relabeled(self, perms) -> "TriPartition":
        """Apply one permutation per axis (``perm[old] = new``)."""
        return TriPartition(*(np.asarray(p)[lab] for p, lab in zip(perms, self.labels)))


@dataclass
class BlockStats:
    """Block totals S[k, g, d] together with the cluster sizes giving R."""

    S: np.ndarray
    sizes: list[np.ndarray]

    @property
    def R(self) -> np.ndarray:
        a, b, c = self.sizes
        return a[:, None, None] * b[None, :, None] * c[None, None, :]

    def copy(self) -> "BlockStats":
        return BlockStats(self.S.copy(), [s.copy() for s in self.sizes])


def _check_dims(tensor: CountTensor, part: TriPartition) -> None:
    if part.shape != tensor.shape:
        raise ContractError(f"partition shape {part.shape} does not match tensor shape {tensor.shape}")


def block_stats(tensor: CountTensor, part: TriPartition) -> BlockStats:
    _check_dims(tensor, part)
    K, G, D = part.counts
    r, c, t = tensor.coords
    key = (part.c[r] * G + part.w[c]) * D + part.y[t]
    S = np.bincount(key, weights=tensor.counts, minlength=K * G * D)
    S = np.rint(S).astype(np.int64).reshape(K, G, D)
    return BlockStats(S, [s.copy() for s in part.sizes])


def all_profiles(tensor: CountTensor, part: TriPartition, axis: int) -> np.ndarray:
    """Counts of every element of ``axis`` aggregated by the other two partitions.

    Returns an array of shape (n_axis, Q1, Q2) where Q1, Q2 are the cluster
    counts of the remaining axes in increasing axis order.
    """
    axis = axis_index(axis)
    _check_dims(tensor, part)
    coords = tensor.coords
    o1, o2 = (ax for ax in AXES if ax != axis)
    q1, q2 = len(part.sizes[o1]), len(part.sizes[o2])
    n = tensor.shape[axis]
    key = (coords[axis] * q1 + part.labels[o1][coords[o1]]) * q2 + part.labels[o2][coords[o2]]
    prof = np.bincount(key, weights=tensor.counts, minlength=n * q1 * q2)
    return np.rint(prof).astype(np.int64).reshape(n, q1, q2)


def _single_profile(tensor: CountTensor, part: TriPartition, axis: int, idx: int) -> np.ndarray:
    _check_dims(tensor, part)
    if not 0 <= idx < tensor.shape[axis]:
        raise ContractError(f"{AXIS_NAMES[axis]} index {idx} out of range [0, {tensor.shape[axis]})")
    coords = tensor.coords
    sel = coords[axis] == idx
    o1, o2 = (ax for ax in AXES if ax != axis)
    q1, q2 = len(part.sizes[o1]), len(part.sizes[o2])
    key = part.labels[o1][coords[o1][sel]] * q2 + part.labels[o2][coords[o2][sel]]
    prof = np.bincount(key, weights=tensor.counts[sel], minlength=q1 * q2)
    return np.rint(prof).astype(np.int64).reshape(q1, q2)


def row_profile(tensor: CountTensor, part: TriPartition, i: int) -> np.ndarray:
    """G x D counts of row ``i`` by column cluster and time cluster."""
    return _single_profile(tensor, part, ROW, i)


def col_profile(tensor: CountTensor, part: TriPartition, j: int) -> np.ndarray:
    """K x D counts of column ``j`` by row cluster and time cluster."""
    return _single_profile(tensor, part, COL, j)


def interval_profile(tensor: CountTensor, part: TriPartition, u: int) -> np.ndarray:
    """K x G counts of interval ``u`` by row cluster and column cluster."""
    return _single_profile(tensor, part, TIME, u)


def profile(tensor: CountTensor, part: TriPartition, dim, idx: int) -> np.ndarray:
    return _single_profile(tensor, part, axis_index(dim), idx)
