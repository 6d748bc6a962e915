"""Central-moment estimation, exact sensitivity, and the adversarial dataset.

Moment bounds drive the noise calibration; sensitivity drives the Laplace-DP
baseline. Both are computed exactly by subset enumeration at small scale, and
the adversarial reciprocal-sum dataset shows the two quantities diverging:
its subset variance stays O(1) while the sensitivity grows like 2^(n/3).
"""

from __future__ import annotations

import math
import warnings

import numpy as np

from .core import (
    ENUMERATION_CAP,
    BaseAlgorithm,
    CapacityError,
    DatasetTable,
    ValidationError,
    as_rng,
    as_theta,
    random_half_split,
    subset_count,
    subset_index_matrix,
)
from .noise import MomentProfile

SIGMA_FLOOR = 1e-12


class DegenerateMomentWarning(UserWarning):
    """A coordinate showed zero empirical central moment and was floored."""


def _require_even_order(M: int) -> int:
    M = int(M)
    if M < 2 or M % 2 != 0:
        raise ValidationError(
            f"moment order must be an even integer >= 2, got {M} "
            "(signed deviations to an odd power have no real root)"
        )
    return M


def _floored_sigma(moments: np.ndarray, M: int, floor: float) -> np.ndarray:
    sigma = np.maximum(moments, 0.0) ** (1.0 / M)
    low = sigma < floor
    if low.any():
        warnings.warn(
            f"{int(low.sum())} coordinate(s) have (near-)zero central moment; "
            f"flooring sigma at {floor:g}",
            DegenerateMomentWarning,
            stacklevel=3,
        )
        sigma = np.maximum(sigma, floor)
    return sigma


def estimate_moments(
    data: DatasetTable,
    alg: BaseAlgorithm,
    B: int,
    M: int,
    rng: int | np.random.Generator,
    bias_correction: bool = False,
    floor: float = SIGMA_FLOOR,
) -> MomentProfile:
    """Plug-in M-th central moments of alg over B random half-splits of data.

    Each replicate evaluates alg on the train half of a fresh split, so when
    data is itself a training half the replicates run at a quarter of the
    original size. sigma_j is the 1/M-th root of the plug-in average; with
    bias_correction=True and M=2 the average uses 1/(B-1) instead of 1/B.
    """
    M = _require_even_order(M)
    if int(B) < 2:
        raise ValidationError("need at least B=2 replicates")
    rng = as_rng(rng)
    thetas = []
    for _ in range(int(B)):
        train, _ = random_half_split(data, rng)
        thetas.append(as_theta(alg(data.rows(train))))
    outputs = np.stack(thetas)
    centered = np.abs(outputs - outputs.mean(axis=0)) ** M
    denom = int(B) - 1 if (bias_correction and M == 2) else int(B)
    moments = centered.sum(axis=0) / denom
    return MomentProfile(_floored_sigma(moments, M, floor), M)


def subset_output_values(
    data: DatasetTable,
    alg: BaseAlgorithm,
    k: int,
    cap: int = ENUMERATION_CAP,
) -> np.ndarray:
    """alg evaluated on every size-k subset, lexicographic order, shape (C, d)."""
    index = subset_index_matrix(data.n, k, cap)
    values = alg.evaluate_subsets(data, index)
    values = np.asarray(values, dtype=float)
    if values.ndim == 1:
        values = values[:, None]
    return values


def subset_output_moments(
    data: DatasetTable,
    alg: BaseAlgorithm,
    k: int,
    M: int,
    central: bool = True,
    cap: int = ENUMERATION_CAP,
) -> np.ndarray:
    """Exact per-coordinate M-th moments over all size-k subsets.

    central=True averages |theta - mean|^M (M must be even); central=False
    averages signed theta^M for any integer M >= 1, so M=1 is the plain mean.
    """
    values = subset_output_values(data, alg, k, cap)
    if central:
        M = _require_even_order(M)
        return np.abs(values - values.mean(axis=0)).__pow__(M).mean(axis=0)
    if int(M) < 1:
        raise ValidationError("raw moment order must be >= 1")
    return (values ** int(M)).mean(axis=0)


def exact_moments(
    data: DatasetTable,
    alg: BaseAlgorithm,
    k: int,
    M: int,
    central: bool = True,
    cap: int = ENUMERATION_CAP,
    floor: float = SIGMA_FLOOR,
) -> MomentProfile:
    """Exact moment profile by full enumeration of size-k subsets.

    The profile's positivity invariant restricts this wrapper to orders that
    admit a real root (even M >= 2); use subset_output_moments directly for
    raw or odd-order diagnostics.
    """
    M = _require_even_order(M)
    moments = subset_output_moments(data, alg, k, M, central=central, cap=cap)
    if not central and (moments <= 0).any():
        raise ValidationError(
            "raw moments are not positive; a moment profile cannot represent them"
        )
    return MomentProfile(_floored_sigma(moments, M, floor), M)


def sensitivity_exact(
    data: DatasetTable,
    alg: BaseAlgorithm,
    k: int,
    norm: str = "abs",
    profile: MomentProfile | None = None,
    cap: int = ENUMERATION_CAP,
) -> float:
    """Exact max output change over all adjacent size-k subsets.

    Two subsets are adjacent when they share exactly k-1 records. norm="abs"
    measures the change as an L1 difference (plain absolute difference for
    scalar outputs); norm="sigma_norm" uses the weighted M-norm and needs a
    profile.
    """
    from .noise import sigma_norm_rows

    if norm not in ("abs", "sigma_norm"):
        raise ValidationError("norm must be 'abs' or 'sigma_norm'")
    if norm == "sigma_norm" and profile is None:
        raise ValidationError("sigma_norm sensitivity needs a moment profile")
    n = data.n
    if n > 63:
        raise CapacityError("exact sensitivity supports at most 63 records")
    if k == 0 or k == n:
        return 0.0
    index = subset_index_matrix(n, k, cap)
    values = alg.evaluate_subsets(data, index)
    if values.ndim == 1:
        values = values[:, None]
    bits = (np.uint64(1) << index.astype(np.uint64)).sum(axis=1)
    order = np.argsort(bits)
    bits = bits[order]
    values = values[order]

    def pair_distance(a: np.ndarray, b: np.ndarray) -> np.ndarray:
        if norm == "abs":
            return np.abs(a - b).sum(axis=1)
        return sigma_norm_rows(a - b, profile)

    best = 0.0
    # Each unordered adjacent pair is visited once: remove a, add b with a < b.
    for a in range(n):
        has_a = (bits >> np.uint64(a)) & np.uint64(1) == 1
        for b in range(a + 1, n):
            swap = has_a & ((bits >> np.uint64(b)) & np.uint64(1) == 0)
            if not swap.any():
                continue
            neighbor = bits[swap] - (np.uint64(1) << np.uint64(a)) + (np.uint64(1) << np.uint64(b))
            pos = np.searchsorted(bits, neighbor)
            dist = pair_distance(values[swap], values[pos])
            best = max(best, float(dist.max()))
    return best


class ReciprocalSum(BaseAlgorithm):
    """Scalar statistic 1 / (sum of the selected records)."""

    def __call__(self, rows: np.ndarray) -> np.ndarray:
        total = float(np.asarray(rows, dtype=float).sum())
        if total == 0:
            raise ValidationError("subset sums to zero; reciprocal undefined")
        return np.array([1.0 / total])

    def evaluate_subsets(self, data: DatasetTable, index_matrix: np.ndarray) -> np.ndarray:
        sums = data.records[index_matrix, 0].sum(axis=1)
        if (sums == 0).any():
            raise ValidationError("a subset sums to zero; reciprocal undefined")
        return (1.0 / sums)[:, None]


def build_pathological_dataset(n: int) -> DatasetTable:
    """Scalar dataset where subset variance is tiny but sensitivity explodes.

    Records are the powers 2^0 .. 2^(n-2) plus one balancing value A chosen
    so that a single size-n/2 subset sums to sqrt(p), p = 1 / C(n, n/2). The
    companion statistic is ReciprocalSum: that one subset maps to 1/sqrt(p)
    while every other subset lands in (0, 1].
    """
    n = int(n)
    if n < 4 or n % 2 != 0:
        raise ValidationError("n must be an even integer >= 4")
    p = 1.0 / subset_count(n, n // 2)
    balance = math.sqrt(p) - (2.0 ** (n // 2 - 1) - 1.0)
    records = [2.0**i for i in range(n - 1)] + [balance]
    return DatasetTable(np.array(records))


def pathological_special_mask_indices(n: int) -> tuple[int, ...]:
    """Indices of the unique subset whose reciprocal sum is 1/sqrt(p)."""
    return tuple(range(n // 2 - 1)) + (n - 1,)


def pathological_sensitivity_bound(n: int) -> float:
    """Analytic lower bound on the exact sensitivity: 1/sqrt(p) - 1.

    The special subset evaluates to 1/sqrt(p) and every adjacent subset
    evaluates inside (0, 1], so the true sensitivity is at least this value.
    """
    if n < 4 or n % 2 != 0:
        raise ValidationError("n must be an even integer >= 4")
    return math.sqrt(subset_count(n, n // 2)) - 1.0


def pathological_variance_hybrid(
    n: int,
    rng: int | np.random.Generator,
    samples: int = 20_000,
) -> float:
    """Variance of ReciprocalSum over random half subsets, beyond the cap.

    The special subset contributes p * (1/sqrt(p) - mean)^2 exactly; the
    remaining mass is estimated by sampling non-special subsets, whose
    outputs provably lie in (0, 1], which keeps the remainder term bounded.
    """
    n = int(n)
    if n < 4 or n % 2 != 0:
        raise ValidationError("n must be an even integer >= 4")
    rng = as_rng(rng)
    data = build_pathological_dataset(n)
    k = n // 2
    p = 1.0 / subset_count(n, k)
    special_value = 1.0 / math.sqrt(p)
    special = set(pathological_special_mask_indices(n))

    draws = np.empty(samples)
    filled = 0
    while filled < samples:
        block = min(samples - filled, 4096)
        picks = np.argsort(rng.random((block, n)), axis=1)[:, :k]
        sums = data.records[picks, 0].sum(axis=1)
        keep = np.array(
            [set(row.tolist()) != special for row in picks], dtype=bool
        )
        vals = 1.0 / sums[keep]
        take = min(vals.size, samples - filled)
        draws[filled : filled + take] = vals[:take]
        filled += take

    rest_mean = float(draws.mean())
    mean = p * special_value + (1.0 - p) * rest_mean
    rest_second = float(((draws - mean) ** 2).mean())
    return p * (special_value - mean) ** 2 + (1.0 - p) * rest_second
