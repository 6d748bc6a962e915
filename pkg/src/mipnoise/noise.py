"""Noise primitives: the weighted M-norm, direction sampling, and radii.

The additive mechanism draws a direction U on the unit sphere of a
per-coordinate weighted M-norm and stretches it by a heavy-tailed radius.
Two radius laws are provided:

* ``paper_literal``: a signed Laplace radius, exactly as the sampling recipe
  is written. Since the direction is symmetric, the sign flip is harmless.
* ``density_exact``: a Gamma(d, c) radius, which cancels the r^(d-1) surface
  Jacobian so the joint density on R^d is proportional to exp(-||x||/c).
  This is the variant whose closed-form density feeds the exact attacker.

In one dimension the two variants coincide (both reduce to Laplace noise).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaincinv

from .core import ValidationError, as_rng

# Numerically optimized calibration constant, valid for moment order >= 2.
DEFAULT_SCALE_NUMERATOR = 6.16
# Looser constant from the isotropic analysis, valid for any order.
ISOTROPIC_SCALE_NUMERATOR = 7.5

_ALLOWED_CONSTANTS = (DEFAULT_SCALE_NUMERATOR, ISOTROPIC_SCALE_NUMERATOR)
_VARIANTS = ("paper_literal", "density_exact")


@dataclass(frozen=True)
class MomentProfile:
    """Per-coordinate M-th central-moment bounds for a released vector.

    sigma[i] ** order bounds the order-th central moment of coordinate i of
    the base algorithm's output over random half-splits.
    """

    sigma: np.ndarray
    order: int

    def __post_init__(self) -> None:
        sigma = np.atleast_1d(np.asarray(self.sigma, dtype=float)).ravel()
        if sigma.size == 0:
            raise ValidationError("profile needs at least one coordinate")
        if not np.isfinite(sigma).all() or (sigma <= 0).any():
            raise ValidationError("all sigma entries must be positive and finite")
        if int(self.order) < 2:
            raise ValidationError("moment order must be an integer >= 2")
        sigma.setflags(write=False)
        object.__setattr__(self, "sigma", sigma)
        object.__setattr__(self, "order", int(self.order))

    @property
    def d(self) -> int:
        return self.sigma.size


def mip_scale_constant(eta: float, M: int, constant: float = DEFAULT_SCALE_NUMERATOR) -> float:
    """Radius scale c = (constant / eta) ** (1 + 2/M) for a target level eta."""
    if not (0.0 < eta <= 0.5):
        raise ValidationError(f"eta must lie in (0, 1/2], got {eta}")
    if int(M) < 2:
        raise ValidationError("moment order must be an integer >= 2")
    if constant not in _ALLOWED_CONSTANTS:
        raise ValidationError(f"constant must be one of {_ALLOWED_CONSTANTS}")
    return (constant / eta) ** (1.0 + 2.0 / int(M))


@dataclass(frozen=True)
class NoiseSpec:
    """Fully resolved noise parameters for one release."""

    scale: float
    profile: MomentProfile
    variant: str = "paper_literal"
    constant: float = DEFAULT_SCALE_NUMERATOR
    eta: float | None = None

    def __post_init__(self) -> None:
        if self.variant not in _VARIANTS:
            raise ValidationError(f"variant must be one of {_VARIANTS}")
        if self.constant not in _ALLOWED_CONSTANTS:
            raise ValidationError(f"constant must be one of {_ALLOWED_CONSTANTS}")
        if not (self.scale > 0 and math.isfinite(self.scale)):
            raise ValidationError("scale must be positive and finite")
        if self.eta is not None:
            expected = mip_scale_constant(self.eta, self.profile.order, self.constant)
            if not math.isclose(self.scale, expected, rel_tol=1e-9):
                raise ValidationError(
                    f"scale {self.scale} does not match eta={self.eta} "
                    f"(expected {expected})"
                )

    @classmethod
    def from_eta(
        cls,
        eta: float,
        profile: MomentProfile,
        variant: str = "paper_literal",
        constant: float = DEFAULT_SCALE_NUMERATOR,
    ) -> "NoiseSpec":
        scale = mip_scale_constant(eta, profile.order, constant)
        return cls(scale=scale, profile=profile, variant=variant, constant=constant, eta=eta)


def sigma_norm(x: np.ndarray, profile: MomentProfile) -> float:
    """Weighted M-norm: (sum_i |x_i|^M / (d * sigma_i^M)) ** (1/M).

    Zero exactly at x = 0, absolutely homogeneous, and a true norm for
    M >= 1. Computed with a max-rescaling so large arguments do not overflow.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float)).ravel()
    if x.size != profile.d:
        raise ValidationError(f"dimension mismatch: x has {x.size}, profile has {profile.d}")
    return float(sigma_norm_rows(x[None, :], profile)[0])


def sigma_norm_rows(x: np.ndarray, profile: MomentProfile) -> np.ndarray:
    """Row-wise weighted M-norm for a (rows, d) matrix."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 2 or x.shape[1] != profile.d:
        raise ValidationError("expected a (rows, d) matrix matching the profile")
    M = profile.order
    scaled = np.abs(x) / (profile.sigma * profile.d ** (1.0 / M))
    peak = scaled.max(axis=1)
    out = np.zeros(x.shape[0])
    live = peak > 0
    if live.any():
        ratio = scaled[live] / peak[live, None]
        out[live] = peak[live] * (ratio**M).sum(axis=1) ** (1.0 / M)
    return out


def _signed_magnitudes(
    alpha: np.ndarray | float, beta: float, rng: np.random.Generator, shape: tuple[int, ...]
) -> np.ndarray:
    # |Y| has CDF P(1/beta, (y/alpha)^beta); invert the regularized lower
    # incomplete gamma, then attach a fair sign.
    u = rng.random(shape)
    magnitude = alpha * gammaincinv(1.0 / beta, u) ** (1.0 / beta)
    signs = rng.integers(0, 2, shape) * 2 - 1
    return signs * magnitude


def sample_gen_normal(
    alpha: float,
    beta: float,
    rng: int | np.random.Generator,
    size: int | None = None,
) -> float | np.ndarray:
    """Draw from the symmetric density proportional to exp(-(|y|/alpha)^beta)."""
    if not (alpha > 0 and math.isfinite(alpha)):
        raise ValidationError("alpha must be positive and finite")
    if not (beta >= 1 and math.isfinite(beta)):
        raise ValidationError("beta must be >= 1 and finite")
    rng = as_rng(rng)
    draws = _signed_magnitudes(alpha, beta, rng, (1 if size is None else int(size),))
    return float(draws[0]) if size is None else draws


def gen_normal_abs_moment(alpha: float, beta: float, m: int) -> float:
    """Closed-form E|Y|^m = alpha^m * Gamma((m+1)/beta) / Gamma(1/beta)."""
    return alpha**m * math.gamma((m + 1) / beta) / math.gamma(1 / beta)


def sample_laplace(
    scale: float, rng: int | np.random.Generator, size: int | None = None
) -> float | np.ndarray:
    """Draw from the density (1/2b) exp(-|x|/b) with b = scale."""
    if not (scale > 0 and math.isfinite(scale)):
        raise ValidationError("scale must be positive and finite")
    rng = as_rng(rng)
    draws = rng.laplace(0.0, scale, 1 if size is None else int(size))
    return float(draws[0]) if size is None else draws


def sample_unit_direction(
    profile: MomentProfile, rng: int | np.random.Generator, size: int | None = None
) -> np.ndarray:
    """Directions with weighted M-norm exactly 1, via normalized draws.

    Coordinate i is drawn from the symmetric generalized normal with scale
    sigma_i and exponent M, then the vector is normalized. For equal sigmas
    and M = 2 this is the uniform distribution on the Euclidean sphere.
    """
    rng = as_rng(rng)
    rows = 1 if size is None else int(size)
    M = profile.order
    y = _signed_magnitudes(profile.sigma, float(M), rng, (rows, profile.d))
    norms = sigma_norm_rows(y, profile)
    # A zero draw has probability zero; redraw defensively if it happens.
    while (norms == 0).any():
        redo = norms == 0
        y[redo] = _signed_magnitudes(profile.sigma, float(M), rng, (int(redo.sum()), profile.d))
        norms = sigma_norm_rows(y, profile)
    u = y / norms[:, None]
    return u[0] if size is None else u


def sample_mip_noise(
    spec: NoiseSpec, rng: int | np.random.Generator, size: int | None = None
) -> np.ndarray:
    """Draw additive noise X = r * U for the configured variant.

    paper_literal: r is signed Laplace with scale c, so the weighted norm of
    X is folded-Laplace distributed. density_exact: r is Gamma(d, c), giving
    X the joint density proportional to exp(-||X|| / c).
    """
    rng = as_rng(rng)
    rows = 1 if size is None else int(size)
    u = sample_unit_direction(spec.profile, rng, rows)
    if spec.variant == "paper_literal":
        r = rng.laplace(0.0, spec.scale, rows)
    else:
        r = rng.gamma(spec.profile.d, spec.scale, rows)
    x = r[:, None] * u
    return x[0] if size is None else x
