"""Release mechanisms evaluated through the membership game.

A Mechanism couples a sampling procedure over training masks with, where
available, a conditional density (or PMF) of its output given the mask. The
density is only required up to a constant shared across masks: the attacker
uses ratios, which the shared constant cancels.
"""

from __future__ import annotations

import abc
import math
from itertools import combinations
from typing import Iterator

import numpy as np

from .core import (
    ENUMERATION_CAP,
    BaseAlgorithm,
    DatasetTable,
    MechanismOutput,
    PrivacyBudget,
    SubsetMask,
    ValidationError,
    as_rng,
    as_theta,
    draw_seed,
    enumerate_subsets,
    random_half_split,
    rng_stream,
)
from .moments import estimate_moments
from .noise import (
    DEFAULT_SCALE_NUMERATOR,
    MomentProfile,
    NoiseSpec,
    sample_mip_noise,
    sigma_norm_rows,
)

MEDIAN_POOL_LIMIT = 4_000_000


class Mechanism(abc.ABC):
    """A randomized release procedure over uniformly drawn training masks."""

    def __init__(
        self,
        data: DatasetTable,
        k: int | None = None,
        budget: PrivacyBudget | None = None,
        mechanism_id: str = "mechanism",
        cap: int = ENUMERATION_CAP,
    ) -> None:
        self.data = data
        self.k = data.n // 2 if k is None else int(k)
        if not (0 <= self.k <= data.n):
            raise ValidationError("mask size out of range")
        self.budget = budget
        self.mechanism_id = mechanism_id
        self.cap = cap
        self._masks: list[SubsetMask] | None = None
        self._membership: dict[int, np.ndarray] = {}

    @property
    def masks(self) -> list[SubsetMask]:
        """All candidate training masks in lexicographic order (cached)."""
        if self._masks is None:
            self._masks = list(enumerate_subsets(self.data.n, self.k, self.cap))
        return self._masks

    @property
    def mask_count(self) -> int:
        return len(self.masks)

    def membership(self, target_id: int) -> np.ndarray:
        """Boolean vector: membership of target_id per candidate mask."""
        target_id = int(target_id)
        if not (0 <= target_id < self.data.n):
            raise ValidationError(f"target id {target_id} out of range")
        if target_id not in self._membership:
            self._membership[target_id] = np.array(
                [m.contains(target_id) for m in self.masks], dtype=bool
            )
        return self._membership[target_id]

    @abc.abstractmethod
    def sample(self, mask: SubsetMask, rng: np.random.Generator) -> object:
        """Run the mechanism once on the given training mask."""

    def sample_by_index(self, index: int, rng: np.random.Generator) -> object:
        return self.sample(self.masks[index], rng)

    # Density surface (optional per mechanism).

    @property
    def has_density(self) -> bool:
        return False

    def log_density_all(self, output: object) -> np.ndarray:
        """Relative log density of the output under every candidate mask."""
        raise NotImplementedError(f"{self.mechanism_id} exposes no conditional density")

    def conditional_density(self, output: object, mask: SubsetMask) -> float:
        """Relative density of producing output from this mask."""
        index = self.masks.index(mask)
        return float(np.exp(self.log_density_all(output)[index]))

    def enumerate_outputs(self, mask: SubsetMask) -> Iterator[tuple[object, float]]:
        """(output, probability) pairs, for mechanisms with finite ranges."""
        raise NotImplementedError(f"{self.mechanism_id} has no finite output range")

    @property
    def enumerable(self) -> bool:
        return False


class AdditiveNoiseMechanism(Mechanism):
    """theta(mask) plus independent additive noise.

    Subclasses define the noise draw and, when available, the relative log
    density of a residual. The per-mask base outputs are tabulated once so
    posterior computations are vectorized over all masks.
    """

    def __init__(
        self,
        data: DatasetTable,
        alg: BaseAlgorithm,
        k: int | None = None,
        budget: PrivacyBudget | None = None,
        mechanism_id: str = "additive",
        cap: int = ENUMERATION_CAP,
    ) -> None:
        super().__init__(data, k=k, budget=budget, mechanism_id=mechanism_id, cap=cap)
        self.alg = alg
        self._theta_table: np.ndarray | None = None

    @property
    def theta_table(self) -> np.ndarray:
        if self._theta_table is None:
            from .core import subset_index_matrix

            index = subset_index_matrix(self.data.n, self.k, self.cap)
            values = self.alg.evaluate_subsets(self.data, index)
            if values.ndim == 1:
                values = values[:, None]
            self._theta_table = np.asarray(values, dtype=float)
        return self._theta_table

    @property
    def d(self) -> int:
        return self.theta_table.shape[1]

    @abc.abstractmethod
    def draw_noise(self, rng: np.random.Generator) -> np.ndarray: ...

    def sample(self, mask: SubsetMask, rng: np.random.Generator) -> np.ndarray:
        return as_theta(self.alg(self.data.rows(mask))) + self.draw_noise(rng)

    def sample_by_index(self, index: int, rng: np.random.Generator) -> np.ndarray:
        return self.theta_table[index] + self.draw_noise(rng)

    def residual_log_density_rows(self, residuals: np.ndarray) -> np.ndarray:
        raise NotImplementedError(f"{self.mechanism_id} exposes no conditional density")

    def log_density_all(self, output: np.ndarray) -> np.ndarray:
        output = as_theta(output)
        return self.residual_log_density_rows(output[None, :] - self.theta_table)

    def residual_cdf(self, x: np.ndarray) -> np.ndarray:
        """CDF of the scalar noise; available only for d = 1 mechanisms."""
        raise NotImplementedError


def _laplace_cdf(x: np.ndarray, scale: float) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return np.where(x < 0, 0.5 * np.exp(x / scale), 1.0 - 0.5 * np.exp(-x / scale))


class MipNoiseMechanism(AdditiveNoiseMechanism):
    """The membership-privacy wrapper with a fixed moment profile.

    variant="density_exact" exposes the closed-form conditional density
    proportional to exp(-||output - theta(mask)|| / c); the literal sampling
    recipe keeps the same direction law but a signed Laplace radius, whose
    joint density has no closed form for d > 1.
    """

    def __init__(
        self,
        data: DatasetTable,
        alg: BaseAlgorithm,
        eta: float,
        profile: MomentProfile,
        variant: str = "density_exact",
        constant: float = DEFAULT_SCALE_NUMERATOR,
        k: int | None = None,
        cap: int = ENUMERATION_CAP,
    ) -> None:
        budget = PrivacyBudget(kind="mip", eta=eta, moment_order=profile.order)
        super().__init__(
            data, alg, k=k, budget=budget, mechanism_id=f"mip_{variant}", cap=cap
        )
        self.spec = NoiseSpec.from_eta(eta, profile, variant=variant, constant=constant)

    @property
    def has_density(self) -> bool:
        return self.spec.variant == "density_exact"

    def draw_noise(self, rng: np.random.Generator) -> np.ndarray:
        return sample_mip_noise(self.spec, rng)

    def residual_log_density_rows(self, residuals: np.ndarray) -> np.ndarray:
        if not self.has_density:
            raise NotImplementedError(
                "the literal sampling variant has no closed-form density; "
                "use variant='density_exact'"
            )
        return -sigma_norm_rows(residuals, self.spec.profile) / self.spec.scale

    def residual_cdf(self, x: np.ndarray) -> np.ndarray:
        if self.d != 1:
            raise NotImplementedError("residual CDF is only available for d = 1")
        # In one dimension both radius laws reduce to Laplace noise. The unit
        # direction has weighted norm 1, i.e. coordinate magnitude sigma, so
        # the coordinate-scale Laplace parameter is c * sigma.
        return _laplace_cdf(x, self.spec.scale * float(self.spec.profile.sigma[0]))


class LaplaceDpMechanism(AdditiveNoiseMechanism):
    """Per-coordinate Laplace noise at scale sensitivity / epsilon."""

    def __init__(
        self,
        data: DatasetTable,
        alg: BaseAlgorithm,
        epsilon: float,
        sensitivity: float,
        k: int | None = None,
        cap: int = ENUMERATION_CAP,
    ) -> None:
        if not (epsilon > 0 and math.isfinite(epsilon)):
            raise ValidationError("epsilon must be positive and finite")
        if not (sensitivity > 0 and math.isfinite(sensitivity)):
            raise ValidationError("sensitivity must be positive and finite")
        budget = PrivacyBudget(kind="dp", epsilon=epsilon)
        super().__init__(data, alg, k=k, budget=budget, mechanism_id="laplace_dp", cap=cap)
        self.scale = sensitivity / epsilon

    @property
    def has_density(self) -> bool:
        return True

    def draw_noise(self, rng: np.random.Generator) -> np.ndarray:
        return rng.laplace(0.0, self.scale, self.d)

    def residual_log_density_rows(self, residuals: np.ndarray) -> np.ndarray:
        return -np.abs(residuals).sum(axis=1) / self.scale

    def residual_cdf(self, x: np.ndarray) -> np.ndarray:
        if self.d != 1:
            raise NotImplementedError("residual CDF is only available for d = 1")
        return _laplace_cdf(x, self.scale)


class SubsetPublisherMechanism(Mechanism):
    """Publishes each training record independently with probability p.

    The released object is a frozenset of record ids. The PMF is exact:
    p^|S| (1-p)^(k-|S|) when S is inside the mask, zero otherwise. For small
    p the membership game barely beats guessing, yet adjacent masks can have
    an infinite PMF ratio, so no finite DP level holds.
    """

    def __init__(
        self,
        data: DatasetTable,
        p: float,
        k: int | None = None,
        cap: int = ENUMERATION_CAP,
    ) -> None:
        if not (0.0 <= p <= 1.0):
            raise ValidationError("publish probability must lie in [0, 1]")
        super().__init__(data, k=k, budget=None, mechanism_id="subset_publisher", cap=cap)
        self.p = float(p)

    @property
    def has_density(self) -> bool:
        return True

    def sample(self, mask: SubsetMask, rng: np.random.Generator) -> frozenset[int]:
        keep = rng.random(mask.k) < self.p
        return frozenset(i for i, kept in zip(mask.indices, keep) if kept)

    def sample_bits(self, mask: SubsetMask, rng: np.random.Generator, size: int) -> np.ndarray:
        """Many draws at once, encoded as bitmasks over the mask's positions."""
        keep = rng.random((int(size), mask.k)) < self.p
        return keep @ (1 << np.arange(mask.k))

    def pmf(self, released: frozenset[int], mask: SubsetMask) -> float:
        if not released.issubset(mask.indices):
            return 0.0
        m = len(released)
        return self.p**m * (1.0 - self.p) ** (mask.k - m)

    def log_density_all(self, output: frozenset[int]) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return np.log(np.array([self.pmf(output, m) for m in self.masks]))

    def conditional_density(self, output: frozenset[int], mask: SubsetMask) -> float:
        return self.pmf(output, mask)

    @property
    def enumerable(self) -> bool:
        return True

    def enumerate_outputs(self, mask: SubsetMask) -> Iterator[tuple[frozenset[int], float]]:
        if mask.k > 20:
            raise ValidationError("output enumeration supports masks up to k = 20")
        for size in range(mask.k + 1):
            weight = self.p**size * (1.0 - self.p) ** (mask.k - size)
            if weight == 0.0:
                continue
            for combo in combinations(mask.indices, size):
                yield frozenset(combo), weight


class BinaryReleaseMechanism(Mechanism):
    """Two-record, singleton-mask mechanism that attains the DP-to-MIP bound.

    On the dataset {0, 1} with k = 1 it releases the training mask with
    probability p = 1 / (1 + e^(-epsilon)) and the complement otherwise. The
    PMF ratio across the two masks is exactly e^epsilon, and the optimal
    attacker's accuracy is exactly p.
    """

    def __init__(self, epsilon: float, data: DatasetTable | None = None) -> None:
        if not (epsilon > 0 and math.isfinite(epsilon)):
            raise ValidationError("epsilon must be positive and finite")
        if data is None:
            data = DatasetTable(np.array([[0.0], [1.0]]))
        if data.n != 2:
            raise ValidationError("the binary release mechanism needs exactly 2 records")
        budget = PrivacyBudget(kind="dp", epsilon=epsilon)
        super().__init__(data, k=1, budget=budget, mechanism_id="binary_tight_dp")
        self.epsilon = float(epsilon)
        self.p = 1.0 / (1.0 + math.exp(-epsilon))

    @property
    def has_density(self) -> bool:
        return True

    def sample(self, mask: SubsetMask, rng: np.random.Generator) -> frozenset[int]:
        if rng.random() < self.p:
            return frozenset(mask.indices)
        return frozenset(mask.complement().indices)

    def pmf(self, released: frozenset[int], mask: SubsetMask) -> float:
        if len(released) != 1:
            return 0.0
        return self.p if released == frozenset(mask.indices) else 1.0 - self.p

    def log_density_all(self, output: frozenset[int]) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return np.log(np.array([self.pmf(output, m) for m in self.masks]))

    def conditional_density(self, output: frozenset[int], mask: SubsetMask) -> float:
        return self.pmf(output, mask)

    @property
    def enumerable(self) -> bool:
        return True

    def enumerate_outputs(self, mask: SubsetMask) -> Iterator[tuple[frozenset[int], float]]:
        yield frozenset(mask.indices), self.p
        yield frozenset(mask.complement().indices), 1.0 - self.p


class PostprocessedMechanism(Mechanism):
    """A data-independent transform applied to a scalar additive mechanism.

    Supported transforms: identity projection, invertible affine maps, and
    quantization to three levels. Affine maps keep the base density (the
    Jacobian is shared across masks); quantization exposes exact interval
    probabilities through the base residual CDF.
    """

    def __init__(
        self,
        base: AdditiveNoiseMechanism,
        kind: str,
        coeffs: tuple[float, float] | None = None,
        edges: tuple[float, float] | None = None,
    ) -> None:
        if base.d != 1:
            raise ValidationError("post-processing transforms support scalar outputs")
        if kind not in ("identity", "affine", "quantize3"):
            raise ValidationError("kind must be identity, affine, or quantize3")
        super().__init__(
            base.data,
            k=base.k,
            budget=base.budget,
            mechanism_id=f"{base.mechanism_id}+{kind}",
            cap=base.cap,
        )
        self.base = base
        self.kind = kind
        if kind == "affine":
            if coeffs is None or coeffs[0] == 0:
                raise ValidationError("affine transform needs coeffs (a, b) with a != 0")
            self.coeffs = (float(coeffs[0]), float(coeffs[1]))
        if kind == "quantize3":
            if edges is None or not edges[0] < edges[1]:
                raise ValidationError("quantize3 needs increasing edges (lo, hi)")
            self.edges = (float(edges[0]), float(edges[1]))

    def transform(self, value: np.ndarray) -> object:
        x = float(np.asarray(value).ravel()[0])
        if self.kind == "identity":
            return np.array([x])
        if self.kind == "affine":
            a, b = self.coeffs
            return np.array([a * x + b])
        lo, hi = self.edges
        return 0 if x <= lo else (1 if x <= hi else 2)

    def sample(self, mask: SubsetMask, rng: np.random.Generator) -> object:
        return self.transform(self.base.sample(mask, rng))

    def sample_by_index(self, index: int, rng: np.random.Generator) -> object:
        return self.transform(self.base.sample_by_index(index, rng))

    @property
    def has_density(self) -> bool:
        return self.base.has_density

    def log_density_all(self, output: object) -> np.ndarray:
        if self.kind == "identity":
            return self.base.log_density_all(output)
        if self.kind == "affine":
            a, b = self.coeffs
            x = float(np.asarray(output).ravel()[0])
            return self.base.log_density_all(np.array([(x - b) / a]))
        level = int(output)
        cuts = (-np.inf, self.edges[0], self.edges[1], np.inf)
        theta = self.base.theta_table[:, 0]
        upper = self.base.residual_cdf(cuts[level + 1] - theta)
        lower = self.base.residual_cdf(cuts[level] - theta)
        with np.errstate(divide="ignore"):
            return np.log(np.maximum(upper - lower, 0.0))


def privatize_mip(
    data: DatasetTable,
    alg: BaseAlgorithm,
    eta: float,
    M: int,
    rng: int | np.random.Generator,
    B: int = 64,
    variant: str = "paper_literal",
    profile: MomentProfile | None = None,
    constant: float = DEFAULT_SCALE_NUMERATOR,
    estimate_on: str = "train",
    bias_correction: bool = False,
) -> MechanismOutput:
    """One private release: split, bound moments, add calibrated noise.

    The dataset is split in half; the release is alg(train) plus noise with
    radius scale (constant / eta) ** (1 + 2/M). When no profile is supplied
    the moments are estimated from B further half-splits of the train half
    (estimate_on="train", the literal pipeline) or of the full dataset
    (estimate_on="full", matching the scale at which the release is made).
    """
    if estimate_on not in ("train", "full"):
        raise ValidationError("estimate_on must be 'train' or 'full'")
    seed = draw_seed(rng)
    train, _ = random_half_split(data, rng_stream(seed, "split"))
    if profile is None:
        source = data.subset(train) if estimate_on == "train" else data
        profile = estimate_moments(
            source, alg, B, M, rng_stream(seed, "estimate"), bias_correction=bias_correction
        )
    elif profile.order != int(M):
        raise ValidationError("profile order does not match M")
    spec = NoiseSpec.from_eta(eta, profile, variant=variant, constant=constant)
    theta = as_theta(alg(data.rows(train)))
    if theta.size != profile.d:
        raise ValidationError("profile dimension does not match the output")
    noise = sample_mip_noise(spec, rng_stream(seed, "noise"))
    return MechanismOutput(theta + noise, f"mip_{variant}", seed, spec.scale, profile)


def privatize_laplace_dp(
    data: DatasetTable,
    alg: BaseAlgorithm,
    epsilon: float,
    sensitivity: float,
    rng: int | np.random.Generator,
) -> MechanismOutput:
    """One DP release: split, then add per-coordinate Laplace(sensitivity/epsilon)."""
    if not (epsilon > 0 and math.isfinite(epsilon)):
        raise ValidationError("epsilon must be positive and finite")
    if not (sensitivity > 0 and math.isfinite(sensitivity)):
        raise ValidationError("sensitivity must be positive and finite")
    seed = draw_seed(rng)
    train, _ = random_half_split(data, rng_stream(seed, "split"))
    theta = as_theta(alg(data.rows(train)))
    scale = sensitivity / epsilon
    noise = rng_stream(seed, "noise").laplace(0.0, scale, theta.size)
    return MechanismOutput(theta + noise, "laplace_dp", seed, scale, None)


def subset_publisher(
    data: DatasetTable, p: float, rng: int | np.random.Generator
) -> frozenset[int]:
    """Split, then publish each training record independently with probability p."""
    seed = draw_seed(rng)
    mech = SubsetPublisherMechanism(data, p)
    train, _ = random_half_split(data, rng_stream(seed, "split"))
    return mech.sample(train, rng_stream(seed, "publish"))


def binary_tight_dp(epsilon: float, rng: int | np.random.Generator) -> frozenset[int]:
    """One draw of the two-record tight-DP release (uniform singleton mask)."""
    seed = draw_seed(rng)
    mech = BinaryReleaseMechanism(epsilon)
    mask = mech.masks[int(rng_stream(seed, "split").integers(2))]
    return mech.sample(mask, rng_stream(seed, "release"))


def _covariance_outer_products(data: DatasetTable) -> np.ndarray:
    x = data.records
    return np.einsum("ni,nj->nij", x, x)


def _clipped_mean_gradient(
    A: np.ndarray, outer: np.ndarray, clip: float
) -> tuple[np.ndarray, np.ndarray]:
    # Per-sample gradient of ||A - x x^T||_F^2 averaged over samples is
    # 2 (A - S); clipping rescales each sample's gradient to norm <= clip.
    diff_sq = (
        np.einsum("ij,ij->", A, A)
        - 2.0 * np.einsum("nij,ij->n", outer, A)
        + np.einsum("nij,nij->n", outer, outer)
    )
    norms = 2.0 * np.sqrt(np.maximum(diff_sq, 0.0))
    if math.isinf(clip):
        factors = np.ones_like(norms)
    else:
        with np.errstate(divide="ignore", invalid="ignore"):
            factors = np.minimum(1.0, clip / norms)
        factors[norms == 0.0] = 1.0
    weighted = np.einsum("n,nij->ij", factors, outer) / outer.shape[0]
    grad = 2.0 * (factors.mean() * A - weighted)
    return grad, norms


def dpsgd_median_clip(
    data: DatasetTable,
    steps: int = 500,
    lr: float = 0.4,
    pool_limit: int = MEDIAN_POOL_LIMIT,
    rng: int | np.random.Generator = 0,
) -> float:
    """Median unclipped per-sample gradient norm over a noise-free pilot run.

    The pilot repeats the training trajectory without clipping or noise and
    pools the per-sample norms from every step. When n * steps exceeds the
    pool limit, a fixed-size random subsample per step stands in for the
    full pool; below the limit the median is exact.
    """
    outer = _covariance_outer_products(data)
    n = data.n
    per_step = n if n * steps <= pool_limit else max(1, pool_limit // steps)
    rng = as_rng(rng)
    A = np.zeros((data.n_columns, data.n_columns))
    pool = np.empty(per_step * steps)
    for t in range(steps):
        grad, norms = _clipped_mean_gradient(A, outer, math.inf)
        if per_step == n:
            pool[t * per_step : (t + 1) * per_step] = norms
        else:
            picks = rng.integers(0, n, per_step)
            pool[t * per_step : (t + 1) * per_step] = norms[picks]
        A = A - lr * grad
    return float(np.median(pool))


def dpsgd_train(
    data: DatasetTable,
    objective: str,
    steps: int,
    lr: float,
    clip: float | str,
    noise_multiplier: float,
    rng: int | np.random.Generator,
) -> MechanismOutput:
    """Full-batch gradient descent with per-sample clipping and Gaussian noise.

    Per-sample gradients are clipped to norm C and Gaussian noise of standard
    deviation noise_multiplier * C is added to the averaged gradient each
    step. C is a valid bound on the averaged clipped gradient's sensitivity
    (replacing one record moves it by at most 2C/n <= C), so the composed
    privacy cost over T steps is rho = T / (2 * noise_multiplier^2) in the
    zero-concentrated accounting; see dpsgd_privacy_report.
    """
    if objective != "covariance_fit":
        raise ValidationError(f"unsupported objective {objective!r}")
    if int(steps) < 1:
        raise ValidationError("steps must be >= 1")
    if not (lr > 0 and math.isfinite(lr)):
        raise ValidationError("learning rate must be positive and finite")
    if noise_multiplier < 0:
        raise ValidationError("noise multiplier must be nonnegative")
    seed = draw_seed(rng)
    if clip == "median_heuristic":
        C = dpsgd_median_clip(data, steps=int(steps), lr=lr, rng=rng_stream(seed, "pilot"))
    else:
        C = float(clip)
        if C <= 0:
            raise ValidationError("clip norm must be positive")
    if noise_multiplier > 0 and math.isinf(C):
        raise ValidationError("an infinite clip norm cannot be combined with noise")

    outer = _covariance_outer_products(data)
    d = data.n_columns
    noise_rng = rng_stream(seed, "noise")
    noise_std = noise_multiplier * C if noise_multiplier > 0 else 0.0
    A = np.zeros((d, d))
    with np.errstate(over="ignore", invalid="ignore"):
        for t in range(int(steps)):
            grad, _ = _clipped_mean_gradient(A, outer, C)
            if noise_std > 0:
                grad = grad + noise_rng.normal(0.0, noise_std, (d, d))
            A = A - lr * grad
            if not np.isfinite(A).all():
                raise RuntimeError(f"gradient descent diverged at step {t}")
    return MechanismOutput(A.ravel(), "dpsgd", seed, noise_std, None)


def dpsgd_privacy_report(
    steps: int, noise_multiplier: float, n: int, delta: float | None = None
) -> dict:
    """Composed privacy of a DP-SGD run, mapped onto the membership scale.

    Gaussian steps compose to rho = steps / (2 * noise_multiplier^2) in
    zero-concentrated form, converted to (epsilon, delta) with delta = 1/n by
    default. The membership level eta applies the pure-DP conversion to
    epsilon alone; delta is reported separately because the conversion is
    only proven for delta = 0.
    """
    from .attack import mip_eta_from_dp

    if noise_multiplier <= 0:
        raise ValidationError("privacy accounting needs a positive noise multiplier")
    delta = 1.0 / n if delta is None else float(delta)
    if not (0 < delta < 1):
        raise ValidationError("delta must lie in (0, 1)")
    rho = steps / (2.0 * noise_multiplier**2)
    epsilon = rho + 2.0 * math.sqrt(rho * math.log(1.0 / delta))
    return {
        "rho": rho,
        "epsilon": epsilon,
        "delta": delta,
        "eta": mip_eta_from_dp(epsilon),
        "eta_note": (
            "eta uses the pure-DP conversion applied to epsilon; "
            "the delta term is reported separately and is not covered by it"
        ),
    }


def dpsgd_noise_multiplier_for_eta(
    eta: float, steps: int, n: int, delta: float | None = None
) -> float:
    """Noise multiplier whose composed budget converts to the target eta."""
    from .attack import dp_epsilon_from_eta

    epsilon = dp_epsilon_from_eta(eta)
    if epsilon <= 0:
        raise ValidationError("eta must be positive")
    delta = 1.0 / n if delta is None else float(delta)
    log_term = math.log(1.0 / delta)
    sqrt_rho = math.sqrt(log_term + epsilon) - math.sqrt(log_term)
    rho = sqrt_rho**2
    return math.sqrt(steps / (2.0 * rho))
