"""Domain types, dataset I/O, subset selection, and the shared RNG contract."""

from __future__ import annotations

import abc
import csv
import math
from dataclasses import dataclass
from itertools import combinations
from typing import Iterator
from zlib import crc32

import numpy as np

# Exact subset enumeration is refused above this many subsets.
ENUMERATION_CAP = 10_000_000


class ValidationError(ValueError):
    """An argument or input violates a documented precondition."""


class MalformedInputError(ValidationError):
    """An input file could not be parsed; the message carries row/column context."""


class CapacityError(RuntimeError):
    """A requested exact enumeration exceeds the configured subset cap."""


def rng_stream(seed: int, *path: int | str) -> np.random.Generator:
    """Derive a named, counter-based random stream from a user seed.

    Streams are value-like: the same (seed, path) always yields the same
    stream regardless of thread scheduling or call order. Parallel tasks
    should each derive one child stream, keyed by task index.
    """
    keys = tuple(crc32(p.encode()) if isinstance(p, str) else int(p) for p in path)
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=keys)
    return np.random.Generator(np.random.Philox(ss))


def as_rng(rng: int | np.random.Generator) -> np.random.Generator:
    """Accept either a seed or a ready stream and return a stream."""
    if isinstance(rng, np.random.Generator):
        return rng
    return rng_stream(int(rng))


def draw_seed(rng: int | np.random.Generator) -> int:
    """Normalize a seed-or-stream argument to a recordable 63-bit seed."""
    if isinstance(rng, np.random.Generator):
        return int(rng.integers(0, 2**63 - 1))
    return int(rng)


@dataclass(frozen=True)
class SubsetMask:
    """A fixed-size selection of record indices out of an n-record dataset."""

    n: int
    indices: tuple[int, ...]

    def __post_init__(self) -> None:
        idx = tuple(int(i) for i in self.indices)
        if any(i < 0 or i >= self.n for i in idx):
            raise ValidationError(f"mask indices out of range for n={self.n}")
        if len(set(idx)) != len(idx):
            raise ValidationError("mask indices must be distinct")
        if tuple(sorted(idx)) != idx:
            idx = tuple(sorted(idx))
        object.__setattr__(self, "indices", idx)

    @property
    def k(self) -> int:
        return len(self.indices)

    def contains(self, record_id: int) -> bool:
        return record_id in self.indices

    def complement(self) -> "SubsetMask":
        chosen = set(self.indices)
        return SubsetMask(self.n, tuple(i for i in range(self.n) if i not in chosen))

    def as_bool(self) -> np.ndarray:
        out = np.zeros(self.n, dtype=bool)
        out[list(self.indices)] = True
        return out


@dataclass(frozen=True)
class DatasetTable:
    """Immutable numeric table of private records, one record per row.

    Records are float64, all entries finite, and the array is locked against
    writes after construction so tables can be shared across threads.
    """

    records: np.ndarray

    def __post_init__(self) -> None:
        arr = np.array(self.records, dtype=float)
        if arr.ndim == 1:
            arr = arr[:, None]
        if arr.ndim != 2 or arr.shape[1] < 1:
            raise ValidationError("records must form a rectangular table")
        if arr.shape[0] < 2:
            raise ValidationError("a dataset needs at least 2 records")
        if not np.isfinite(arr).all():
            bad = np.argwhere(~np.isfinite(arr))[0]
            raise ValidationError(
                f"non-finite value at row {bad[0] + 1}, column {bad[1] + 1}"
            )
        arr.setflags(write=False)
        object.__setattr__(self, "records", arr)

    @property
    def n(self) -> int:
        return self.records.shape[0]

    @property
    def n_columns(self) -> int:
        return self.records.shape[1]

    @property
    def ids(self) -> np.ndarray:
        """Stable record indices 0..n-1, following row order."""
        return np.arange(self.n)

    def rows(self, mask: SubsetMask) -> np.ndarray:
        if mask.n != self.n:
            raise ValidationError("mask length does not match dataset size")
        return self.records[list(mask.indices)]

    def subset(self, mask: SubsetMask) -> "DatasetTable":
        """A new table holding only the masked records (ids renumbered)."""
        return DatasetTable(self.rows(mask))


class BaseAlgorithm(abc.ABC):
    """Deterministic map from a block of records to a parameter vector.

    Determinism is required: the exact attacker and the moment enumerations
    both assume that the same subset always yields the same output.
    """

    @abc.abstractmethod
    def __call__(self, rows: np.ndarray) -> np.ndarray:
        """Evaluate on a (k, n_columns) block and return a 1-D output."""

    def evaluate_subsets(self, data: DatasetTable, index_matrix: np.ndarray) -> np.ndarray:
        """Evaluate on many subsets at once; rows of index_matrix are subsets.

        The generic path loops; subclasses override with a vectorized version
        when the statistic allows it.
        """
        return np.stack(
            [as_theta(self(data.records[list(ix)])) for ix in index_matrix]
        )


class MeanQuery(BaseAlgorithm):
    """Column-wise mean of the selected records."""

    def __call__(self, rows: np.ndarray) -> np.ndarray:
        return np.asarray(rows, dtype=float).mean(axis=0)

    def evaluate_subsets(self, data: DatasetTable, index_matrix: np.ndarray) -> np.ndarray:
        return data.records[index_matrix].mean(axis=1)


def as_theta(value: object) -> np.ndarray:
    """Coerce a base-algorithm output to a finite 1-D float vector."""
    theta = np.atleast_1d(np.asarray(value, dtype=float)).ravel()
    if theta.size == 0:
        raise ValidationError("base algorithm produced an empty output")
    if not np.isfinite(theta).all():
        raise ValidationError("base algorithm produced non-finite output")
    return theta


@dataclass(frozen=True)
class PrivacyBudget:
    """Privacy level of a mechanism: either a membership bound or a DP bound.

    kind="mip" carries eta in (0, 1/2] plus the moment order used for noise
    calibration; kind="dp" carries a positive epsilon.
    """

    kind: str
    eta: float | None = None
    epsilon: float | None = None
    moment_order: int | None = None

    def __post_init__(self) -> None:
        if self.kind == "mip":
            if self.eta is None or self.epsilon is not None:
                raise ValidationError("mip budget must set eta (and only eta)")
            if not (0.0 < self.eta <= 0.5):
                raise ValidationError("eta must lie in (0, 1/2]")
            if self.moment_order is None or int(self.moment_order) < 2:
                raise ValidationError("mip budget needs a moment order >= 2")
        elif self.kind == "dp":
            if self.epsilon is None or self.eta is not None:
                raise ValidationError("dp budget must set epsilon (and only epsilon)")
            if not (self.epsilon > 0 and math.isfinite(self.epsilon)):
                raise ValidationError("epsilon must be positive and finite")
        else:
            raise ValidationError(f"unknown budget kind {self.kind!r}")


@dataclass(frozen=True)
class MechanismOutput:
    """A released vector together with reproducibility metadata."""

    theta_hat: np.ndarray
    mechanism_id: str
    seed: int
    noise_scale: float
    profile: "object | None" = None

    def __post_init__(self) -> None:
        theta = as_theta(self.theta_hat)
        theta.setflags(write=False)
        object.__setattr__(self, "theta_hat", theta)

    @property
    def d(self) -> int:
        return self.theta_hat.size


def load_dataset(path: str, fmt: str = "csv") -> DatasetTable:
    """Load a headerless CSV of decimal reals, one record per row.

    Raises MalformedInputError with row/column position on parse failures and
    ValidationError on non-finite entries.
    """
    if fmt != "csv":
        raise ValidationError(f"unsupported dataset format {fmt!r}")
    rows: list[list[float]] = []
    with open(path, newline="") as handle:
        for i, record in enumerate(csv.reader(handle)):
            if not record:
                continue
            parsed = []
            for j, cell in enumerate(record):
                try:
                    value = float(cell)
                except ValueError:
                    raise MalformedInputError(
                        f"cannot parse {cell!r} at row {i + 1}, column {j + 1}"
                    ) from None
                if not math.isfinite(value):
                    raise ValidationError(
                        f"non-finite value at row {i + 1}, column {j + 1}"
                    )
                parsed.append(value)
            if rows and len(parsed) != len(rows[0]):
                raise MalformedInputError(
                    f"row {i + 1} has {len(parsed)} columns, expected {len(rows[0])}"
                )
            rows.append(parsed)
    if not rows:
        raise MalformedInputError(f"empty dataset file: {path}")
    return DatasetTable(np.array(rows, dtype=float))


def random_half_split(
    data: DatasetTable, rng: int | np.random.Generator
) -> tuple[SubsetMask, SubsetMask]:
    """Uniformly draw a size-floor(n/2) training mask; holdout is the rest."""
    if data.n < 2:
        raise ValidationError("need at least 2 records to split")
    rng = as_rng(rng)
    k = data.n // 2
    chosen = rng.choice(data.n, size=k, replace=False)
    train = SubsetMask(data.n, tuple(int(i) for i in chosen))
    return train, train.complement()


def enumerate_subsets(
    n: int, k: int, cap: int = ENUMERATION_CAP
) -> Iterator[SubsetMask]:
    """Yield every size-k subset of range(n) in lexicographic order."""
    if not (0 <= k <= n):
        raise ValidationError(f"need 0 <= k <= n, got n={n}, k={k}")
    total = math.comb(n, k)
    if total > cap:
        raise CapacityError(f"C({n},{k}) = {total} exceeds the enumeration cap {cap}")
    for combo in combinations(range(n), k):
        yield SubsetMask(n, combo)


def subset_count(n: int, k: int) -> int:
    return math.comb(n, k)


def subset_index_matrix(n: int, k: int, cap: int = ENUMERATION_CAP) -> np.ndarray:
    """All size-k subsets as a (C(n,k), k) integer array, lexicographic order."""
    if not (0 <= k <= n):
        raise ValidationError(f"need 0 <= k <= n, got n={n}, k={k}")
    total = math.comb(n, k)
    if total > cap:
        raise CapacityError(f"C({n},{k}) = {total} exceeds the enumeration cap {cap}")
    if k == 0:
        return np.zeros((1, 0), dtype=np.int64)
    return np.array(list(combinations(range(n), k)), dtype=np.int64)
