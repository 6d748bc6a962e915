"""Acceptance suite: one test per criterion, each printing a pass/fail line.

Run with `pytest tests/test_acceptance.py -v -s` to see the per-criterion
lines as they complete.
"""

import functools
import math
import time
from itertools import combinations

import numpy as np
import pytest

from mipnoise.attack import (
    dp_epsilon_from_eta,
    mip_eta_from_dp,
    optimal_attacker_accuracy,
    optimal_attacker_accuracy_exact,
)
from mipnoise.core import DatasetTable, SubsetMask, rng_stream
from mipnoise.experiments import ExperimentConfig, emit_results, run_fig1
from mipnoise.mechanisms import (
    BinaryReleaseMechanism,
    MipNoiseMechanism,
    PostprocessedMechanism,
    SubsetPublisherMechanism,
)
from mipnoise.moments import (
    ReciprocalSum,
    build_pathological_dataset,
    exact_moments,
    sensitivity_exact,
)
from mipnoise.noise import (
    MomentProfile,
    NoiseSpec,
    gen_normal_abs_moment,
    sample_gen_normal,
    sample_mip_noise,
    sample_unit_direction,
    sigma_norm_rows,
)


def announce(name):
    def decorator(fn):
        @functools.wraps(fn)
        def wrapper(*args, **kwargs):
            try:
                result = fn(*args, **kwargs)
            except BaseException:
                print(f"[acceptance] {name}: FAIL")
                raise
            print(f"[acceptance] {name}: PASS")
            return result

        return wrapper

    return decorator


@announce("tight DP-to-membership bound at eps = ln 3")
def test_binary_tight_dp_accuracy():
    start = time.monotonic()
    mech = BinaryReleaseMechanism(math.log(3.0))
    report = optimal_attacker_accuracy(mech.data, mech, 0, 100_000, 2024)
    elapsed = time.monotonic() - start
    assert abs(report.accuracy - 0.75) <= 0.01
    assert elapsed < 10.0


@announce("conversion law and round trip")
def test_conversion_law():
    for eps in (0.001, 0.005, 0.01):
        ratio = mip_eta_from_dp(eps) / (eps / 4.0)
        assert 0.99 <= ratio <= 1.01
    for eps in (0.01, 0.1, 1.0, 5.0):
        back = dp_epsilon_from_eta(mip_eta_from_dp(eps))
        assert abs(back - eps) / eps <= 1e-12


@announce("membership bound on the mean query")
def test_membership_bound(mean_query_setup):
    start = time.monotonic()
    data, alg = mean_query_setup
    rounds = 10_000
    for eta in (0.05, 0.1, 0.2, 0.4):
        for M in (2, 4):
            profile = exact_moments(data, alg, 6, M)
            mech = MipNoiseMechanism(data, alg, eta, profile, variant="density_exact")
            for target in (0, 5, 11):
                report = optimal_attacker_accuracy(
                    data, mech, target, rounds, rng_stream(2024, "bound", int(eta * 100), M, target)
                )
                assert report.accuracy <= 0.5 + eta + 3 * report.std_error, (
                    f"eta={eta} M={M} target={target}: {report.accuracy}"
                )
    assert time.monotonic() - start < 300.0


@announce("membership-private but not DP witness")
def test_subset_publisher_witness():
    data = DatasetTable(np.arange(6.0))
    mech = SubsetPublisherMechanism(data, 0.01)
    for target in range(6):
        report = optimal_attacker_accuracy_exact(data, mech, target)
        assert report.accuracy <= 0.53
    # A published record pins the mask: adjacent masks get PMF 0 vs > 0.
    inside = SubsetMask(6, (0, 1, 2))
    adjacent = SubsetMask(6, (1, 2, 3))
    assert mech.pmf(frozenset({0}), inside) > 0.0
    assert mech.pmf(frozenset({0}), adjacent) == 0.0


def _oracle_variance(data, k):
    values = [1.0 / math.fsum(combo) for combo in combinations(data.records.ravel(), k)]
    mean = math.fsum(values) / len(values)
    return math.fsum((v - mean) ** 2 for v in values) / len(values)


def _oracle_sensitivity(data, k):
    # Adjacent subsets share a core of k-1 records; scanning cores visits
    # every adjacent pair exactly once.
    records = data.records.ravel().tolist()
    n = len(records)
    best = 0.0
    for core in combinations(range(n), k - 1):
        core_sum = math.fsum(records[i] for i in core)
        chosen = set(core)
        lo, hi = math.inf, -math.inf
        for x in range(n):
            if x in chosen:
                continue
            value = 1.0 / (core_sum + records[x])
            lo = min(lo, value)
            hi = max(hi, value)
        best = max(best, hi - lo)
    return best


@announce("variance-to-sensitivity gap on the adversarial dataset")
def test_pathological_gap():
    start = time.monotonic()
    for n in range(4, 22, 2):
        data = build_pathological_dataset(n)
        k = n // 2
        variance = float(exact_moments(data, ReciprocalSum(), k, 2).sigma[0]) ** 2
        delta = sensitivity_exact(data, ReciprocalSum(), k)
        assert variance == pytest.approx(_oracle_variance(data, k), rel=1e-9)
        assert delta == pytest.approx(_oracle_sensitivity(data, k), rel=1e-9)
        assert variance <= 3.0, f"n={n}: variance {variance}"
        assert delta >= 2.0 ** (n / 3.0 - 2.0), f"n={n}: delta {delta}"
    assert time.monotonic() - start < 120.0


@announce("noise-scale comparison at n = 36")
def test_fig1_reproduction(tmp_path):
    config = ExperimentConfig(name="fig1", n_values=[36], seed=1234)
    assert len(config.eta_grid) == 50 and min(config.eta_grid) >= 0.01
    rows = run_fig1(config)
    mip = {r.eta: r.value for r in rows if r.method == "mip"}
    dp = {r.eta: r.value for r in rows if r.method == "dp"}
    assert set(mip) == set(dp) and len(mip) == 50
    for eta in mip:
        assert mip[eta] < dp[eta], f"eta={eta}: mip {mip[eta]} vs dp {dp[eta]}"
    (csv_path,) = emit_results(rows, "csv", tmp_path, name="fig1")
    lines = csv_path.read_text().splitlines()
    assert len(lines) == 1 + 100
    assert any(line.startswith("mip,") for line in lines[1:])
    assert any(line.startswith("dp,") for line in lines[1:])


@announce("generator study orderings at desk scale")
def test_synth_reproduction(synth_results):
    summary = synth_results["summary"]
    etas = sorted({eta for (_, eta) in summary})
    # (a) both higher-order noise curves beat DP-SGD wherever eta >= 0.1.
    for eta in [e for e in etas if e >= 0.1]:
        dp = summary[("dpsgd", eta)]
        for method in ("mip_m4", "mip_m6"):
            mip = summary[(method, eta)]
            gap = dp["mean"] - mip["mean"]
            assert gap >= math.hypot(dp["stderr"], mip["stderr"]), (method, eta)
    # (b) DP-SGD never reaches relative error 1 at any tested eta.
    for eta in etas:
        dp = summary[("dpsgd", eta)]
        assert dp["mean"] - 1.0 >= dp["stderr"], eta
    # (c) the noise wrapper does reach relative error < 1 by eta = 0.3.
    attained = [
        summary[(m, eta)]
        for m in ("mip_m2", "mip_m4", "mip_m6")
        for eta in etas
        if eta <= 0.3
    ]
    assert any(g["mean"] + g["stderr"] < 1.0 for g in attained)
    assert synth_results["elapsed"] < 600.0


@announce("sampler correctness")
def test_sampler_correctness():
    draws = 10**6
    for beta in (1.0, 2.0, 4.0, 6.0):
        sample = sample_gen_normal(1.1, beta, rng_stream(2024, "gn", int(beta)), size=draws)
        for m in {2, int(beta)}:
            empirical = float(np.mean(np.abs(sample) ** m))
            reference = gen_normal_abs_moment(1.1, beta, m)
            assert abs(empirical - reference) / reference <= 0.02, (beta, m)

    profile = MomentProfile(np.array([0.7, 1.3, 2.0]), 4)
    directions = sample_unit_direction(profile, rng_stream(2024, "unit"), size=draws)
    assert np.abs(sigma_norm_rows(directions, profile) - 1.0).max() <= 1e-12

    for variant, M in (("paper_literal", 2), ("density_exact", 2), ("paper_literal", 4)):
        prof = MomentProfile(np.array([1.0, 0.5]), M)
        spec = NoiseSpec.from_eta(0.25, prof, variant)
        noise = sample_mip_noise(spec, rng_stream(2024, "cheb", M, variant), size=draws)
        norms = sigma_norm_rows(noise - noise.mean(axis=0), prof)
        sigma_hat = float(np.mean(norms**M)) ** (1.0 / M)
        for t in (2.0, 4.0, 8.0):
            bound = 1.0 / t**M
            freq = float(np.mean(norms > t * sigma_hat))
            band = 4.0 * math.sqrt(bound * (1.0 - bound) / draws)
            assert freq <= bound + band, (variant, M, t)


@announce("post-processing cannot help the attacker")
def test_post_processing(mean_query_setup):
    data, alg = mean_query_setup
    profile = exact_moments(data, alg, 6, 2)
    base = MipNoiseMechanism(data, alg, 0.2, profile, variant="density_exact")
    rounds, target, seed = 10_000, 11, 2024
    baseline = optimal_attacker_accuracy(data, base, target, rounds, seed)
    mid = float(np.median(base.theta_table))
    transforms = {
        "projection": PostprocessedMechanism(base, "identity"),
        "affine": PostprocessedMechanism(base, "affine", coeffs=(3.0, 0.7)),
        "quantize3": PostprocessedMechanism(base, "quantize3", edges=(mid - 0.4, mid + 0.4)),
    }
    for name, mech in transforms.items():
        processed = optimal_attacker_accuracy(data, mech, target, rounds, seed)
        tolerance = 2.0 * math.hypot(baseline.std_error, processed.std_error)
        assert processed.accuracy <= baseline.accuracy + tolerance, name
