"""The two simulation studies and their result plumbing.

fig1 compares the noise scale needed for a membership bound against the
scale a Laplace-DP baseline would need on the adversarial reciprocal-sum
dataset. synth trains a one-layer linear generator on Gaussian data and
compares the relative error of the raw, noise-wrapped, and DP-SGD releases
across privacy levels.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np

from .core import (
    BaseAlgorithm,
    DatasetTable,
    ValidationError,
    rng_stream,
)
from .attack import dp_epsilon_from_eta
from .mechanisms import (
    dpsgd_median_clip,
    dpsgd_noise_multiplier_for_eta,
    dpsgd_train,
    privatize_mip,
)
from .moments import (
    ReciprocalSum,
    build_pathological_dataset,
    estimate_moments,
    exact_moments,
    pathological_sensitivity_bound,
    pathological_variance_hybrid,
    sensitivity_exact,
)
from .noise import DEFAULT_SCALE_NUMERATOR

EXACT_ENUMERATION_MAX_N = 20


@dataclass
class ExperimentConfig:
    """Flat run configuration; mirrored one key per line in config files."""

    name: str = "fig1"
    eta_grid: list[float] = field(default_factory=list)
    n_values: list[int] = field(default_factory=list)
    M_set: list[int] = field(default_factory=lambda: [2, 4, 6])
    d: int = 3
    n_samples: int = 50_000
    runs: int = 5
    seed: int = 1234
    output_dir: str = "out"
    steps: int = 500
    lr: float = 0.4
    B: int = 128
    hybrid_samples: int = 20_000
    log_y: bool = True

    def __post_init__(self) -> None:
        if self.name not in ("fig1", "synth", "attack-eval", "moments", "privatize"):
            raise ValidationError(f"unknown experiment name {self.name!r}")
        if not self.eta_grid:
            self.eta_grid = default_eta_grid(self.name)
        for eta in self.eta_grid:
            if not (0.0 < eta <= 0.5):
                raise ValidationError(f"eta {eta} outside (0, 1/2]")
        if not self.n_values:
            self.n_values = [4, 12, 20, 36, 48] if self.name == "fig1" else []

    def config_hash(self) -> str:
        payload = json.dumps(asdict(self), sort_keys=True).encode()
        return hashlib.sha256(payload).hexdigest()[:16]


def default_eta_grid(name: str) -> list[float]:
    if name == "fig1":
        # The DP conversion diverges at eta = 1/2, so the grid stops short.
        return [round(x, 6) for x in np.linspace(0.01, 0.49, 50)]
    return [0.01, 0.02, 0.05, 0.1, 0.2, 0.3]


def _parse_value(raw: str) -> object:
    raw = raw.strip()
    if raw.lower() in ("true", "false"):
        return raw.lower() == "true"
    if "," in raw:
        return [_parse_value(item) for item in raw.split(",") if item.strip()]
    for cast in (int, float):
        try:
            return cast(raw)
        except ValueError:
            continue
    return raw


def load_config(path: str | None, name: str, overrides: dict | None = None) -> ExperimentConfig:
    """Build a config from a key=value file plus CLI overrides."""
    values: dict = {"name": name}
    if path is not None:
        for line in Path(path).read_text().splitlines():
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ValidationError(f"config line without '=': {line!r}")
            key, _, raw = line.partition("=")
            values[key.strip()] = _parse_value(raw)
    if overrides:
        values.update({k: v for k, v in overrides.items() if v is not None})
    known = {f for f in ExperimentConfig.__dataclass_fields__}
    unknown = set(values) - known
    if unknown:
        raise ValidationError(f"unknown config keys: {sorted(unknown)}")
    list_fields = {"eta_grid", "n_values", "M_set"}
    for key in list_fields & set(values):
        if not isinstance(values[key], list):
            values[key] = [values[key]]
    return ExperimentConfig(**values)


@dataclass(frozen=True)
class ResultRow:
    """One measured point: a noise scale (fig1) or a relative error (synth)."""

    method: str
    eta: float
    value: float
    run: int
    n: int

    def __post_init__(self) -> None:
        if not (math.isfinite(self.eta) and math.isfinite(self.value)):
            raise ValidationError("result rows must be finite")


class CovarianceFitGD(BaseAlgorithm):
    """Second-moment matrix fitted by full-batch gradient descent.

    Minimizes the squared Frobenius distance between a free matrix and the
    empirical second moment of the given rows; returns the flattened matrix.
    """

    def __init__(self, steps: int = 500, lr: float = 0.4) -> None:
        if steps < 1 or not (0 < lr < 1):
            raise ValidationError("need steps >= 1 and lr in (0, 1)")
        self.steps = int(steps)
        self.lr = float(lr)

    def __call__(self, rows: np.ndarray) -> np.ndarray:
        rows = np.asarray(rows, dtype=float)
        target = rows.T @ rows / rows.shape[0]
        A = np.zeros_like(target)
        for _ in range(self.steps):
            A = A - self.lr * covariance_objective_gradient(A, target)
            if np.linalg.norm(A) > 1e6:
                raise RuntimeError("covariance fit diverged")
        return A.ravel()


def covariance_objective(A: np.ndarray, S: np.ndarray) -> float:
    """Squared Frobenius distance ||A - S||_F^2."""
    return float(((A - S) ** 2).sum())


def covariance_objective_gradient(A: np.ndarray, S: np.ndarray) -> np.ndarray:
    """Analytic gradient of the squared Frobenius objective: 2 (A - S)."""
    return 2.0 * (A - S)


def psd_sqrt(A: np.ndarray) -> np.ndarray:
    """Principal square root of the symmetrization A + A^T, clamped to PSD.

    Negative eigenvalues of the symmetrization are clamped to zero, so W @ W
    reproduces the clamped symmetrization for any finite input.
    """
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1] or not np.isfinite(A).all():
        raise ValidationError("need a finite square matrix")
    sym = A + A.T
    eigvals, eigvecs = np.linalg.eigh(sym)
    eigvals = np.maximum(eigvals, 0.0)
    return (eigvecs * np.sqrt(eigvals)) @ eigvecs.T


def make_ground_truth_covariance(d: int, seed: int) -> np.ndarray:
    """Fixed non-identity SPD matrix: a seeded rotation of diag(1, 2, 5).

    For d != 3 the eigenvalues interpolate geometrically between 1 and 5.
    """
    if d < 1:
        raise ValidationError("dimension must be >= 1")
    eig = np.array([1.0, 2.0, 5.0]) if d == 3 else np.geomspace(1.0, 5.0, d)
    gauss = rng_stream(seed, "ground-truth").normal(size=(d, d))
    q, r = np.linalg.qr(gauss)
    q = q * np.sign(np.diag(r))
    return (q * eig) @ q.T


def relative_error(A: np.ndarray, truth: np.ndarray) -> float:
    return float(np.linalg.norm(A - truth) / np.linalg.norm(truth))


def fig1_noise_scales(
    n: int, eta_grid: list[float], seed: int, hybrid_samples: int = 20_000
) -> tuple[np.ndarray, np.ndarray, float, float]:
    """Noise-scale curves for one dataset size: (mip, dp, sigma, delta).

    Small n uses exact enumeration for both the variance and the
    sensitivity; larger n switches to the hybrid variance estimate and the
    analytic sensitivity lower bound, which understates the DP curve and so
    keeps comparisons against it conservative.
    """
    if n < 4 or n % 2 != 0:
        raise ValidationError("n must be an even integer >= 4")
    data = build_pathological_dataset(n)
    alg = ReciprocalSum()
    if n <= EXACT_ENUMERATION_MAX_N:
        sigma = float(exact_moments(data, alg, n // 2, 2).sigma[0])
        delta = sensitivity_exact(data, alg, n // 2)
    else:
        sigma = math.sqrt(
            pathological_variance_hybrid(n, rng_stream(seed, "fig1-sigma", n), hybrid_samples)
        )
        delta = pathological_sensitivity_bound(n)
    etas = np.asarray(eta_grid, dtype=float)
    mip = (DEFAULT_SCALE_NUMERATOR / etas) ** 2 * sigma
    dp = delta / np.array([dp_epsilon_from_eta(e) for e in etas])
    return mip, dp, sigma, delta


def run_fig1(config: ExperimentConfig) -> list[ResultRow]:
    """Noise scale against privacy level, one DP curve per dataset size."""
    rows: list[ResultRow] = []
    for n in config.n_values:
        mip, dp, _, _ = fig1_noise_scales(
            n, config.eta_grid, config.seed, config.hybrid_samples
        )
        for eta, mip_value, dp_value in zip(config.eta_grid, mip, dp):
            rows.append(ResultRow("mip", float(eta), float(mip_value), 0, n))
            rows.append(ResultRow("dp", float(eta), float(dp_value), 0, n))
    return rows


def run_synth(config: ExperimentConfig) -> list[ResultRow]:
    """Relative error of raw, noise-wrapped, and DP-SGD covariance releases.

    Streams are keyed by (seed, run, eta index, method), so every cell is
    reproducible in isolation. Across the moment orders within one cell the
    same stream key is reused on purpose: the noise draws are then coupled,
    which sharpens order comparisons between curves.
    """
    if config.d < 1:
        raise ValidationError("dimension must be >= 1")
    if config.n_samples < 1000:
        raise ValidationError("need at least 1000 samples")
    truth = make_ground_truth_covariance(config.d, config.seed)
    try:
        chol = np.linalg.cholesky(truth)
    except np.linalg.LinAlgError as exc:
        raise ValidationError(f"ground-truth covariance is not SPD: {exc}") from exc
    alg = CovarianceFitGD(config.steps, config.lr)
    rows: list[ResultRow] = []
    for run in range(config.runs):
        draws = rng_stream(config.seed, "synth-data", run).standard_normal(
            (config.n_samples, config.d)
        )
        data = DatasetTable(draws @ chol.T)
        raw = alg(data.records).reshape(config.d, config.d)
        raw_error = relative_error(raw, truth)
        profiles = {
            M: estimate_moments(
                data, alg, config.B, M, rng_stream(config.seed, "synth-sigma", run)
            )
            for M in config.M_set
        }
        clip = dpsgd_median_clip(
            data,
            steps=config.steps,
            lr=config.lr,
            rng=rng_stream(config.seed, "synth-clip", run),
        )
        for ei, eta in enumerate(config.eta_grid):
            rows.append(ResultRow("raw", float(eta), raw_error, run, config.n_samples))
            for M in config.M_set:
                released = privatize_mip(
                    data,
                    alg,
                    eta,
                    M,
                    rng_stream(config.seed, "synth-mip", run, ei),
                    profile=profiles[M],
                    variant="paper_literal",
                )
                value = relative_error(
                    released.theta_hat.reshape(config.d, config.d), truth
                )
                rows.append(ResultRow(f"mip_m{M}", float(eta), value, run, config.n_samples))
            multiplier = dpsgd_noise_multiplier_for_eta(
                eta, config.steps, config.n_samples
            )
            dp_out = dpsgd_train(
                data,
                "covariance_fit",
                config.steps,
                config.lr,
                clip,
                multiplier,
                rng_stream(config.seed, "synth-dpsgd", run, ei),
            )
            value = relative_error(dp_out.theta_hat.reshape(config.d, config.d), truth)
            rows.append(ResultRow("dpsgd", float(eta), value, run, config.n_samples))
    return rows


def summarize(rows: list[ResultRow]) -> list[dict]:
    """Mean and standard error of the mean per (method, n, eta) group."""
    groups: dict[tuple, list[float]] = {}
    for row in rows:
        groups.setdefault((row.method, row.n, row.eta), []).append(row.value)
    out = []
    for (method, n, eta) in sorted(groups):
        values = np.array(groups[(method, n, eta)])
        stderr = float(values.std(ddof=1) / math.sqrt(values.size)) if values.size > 1 else 0.0
        out.append(
            {
                "method": method,
                "n": n,
                "eta": eta,
                "mean": float(values.mean()),
                "stderr": stderr,
                "runs": int(values.size),
            }
        )
    return out


def emit_results(
    rows: list[ResultRow],
    fmt: str | list[str],
    output_dir: str | Path,
    name: str = "results",
    log_y: bool = True,
) -> list[Path]:
    """Write the result table as CSV, a JSON summary, or an SVG line chart.

    The CSV is byte-deterministic for a fixed table. Returns the paths
    written, one per requested format.
    """
    if not rows:
        raise ValidationError("nothing to emit: the result table is empty")
    formats = [fmt] if isinstance(fmt, str) else list(fmt)
    unknown = set(formats) - {"csv", "json", "svg_data"}
    if unknown:
        raise ValidationError(f"unknown output formats: {sorted(unknown)}")
    directory = Path(output_dir)
    try:
        directory.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {directory}: {exc}") from exc
    written = []
    if "csv" in formats:
        path = directory / f"{name}.csv"
        lines = ["method,eta,n,run,value"]
        lines += [
            f"{r.method},{float(r.eta)!r},{r.n},{r.run},{float(r.value)!r}" for r in rows
        ]
        path.write_text("\n".join(lines) + "\n")
        written.append(path)
    if "json" in formats:
        path = directory / f"{name}_summary.json"
        path.write_text(json.dumps({"name": name, "groups": summarize(rows)}, indent=2))
        written.append(path)
    if "svg_data" in formats:
        from .plots import render_line_chart

        path = directory / f"{name}.svg"
        render_line_chart(summarize(rows), path, log_y=log_y, title=name)
        written.append(path)
    return written
