import math

import numpy as np
import pytest
from scipy import stats

from mipnoise.attack import bayes_posterior, optimal_attacker_accuracy
from mipnoise.core import (
    DatasetTable,
    MeanQuery,
    SubsetMask,
    ValidationError,
    rng_stream,
)
from mipnoise.mechanisms import (
    BinaryReleaseMechanism,
    LaplaceDpMechanism,
    MipNoiseMechanism,
    SubsetPublisherMechanism,
    binary_tight_dp,
    dpsgd_median_clip,
    dpsgd_noise_multiplier_for_eta,
    dpsgd_privacy_report,
    dpsgd_train,
    privatize_laplace_dp,
    privatize_mip,
    subset_publisher,
)
from mipnoise.moments import exact_moments
from mipnoise.noise import MomentProfile, sigma_norm_rows


class ConstantSeven(MeanQuery):
    def __call__(self, rows):
        return np.array([7.0])

    def evaluate_subsets(self, data, index_matrix):
        return np.full((index_matrix.shape[0], 1), 7.0)


class TestPrivatizeMip:
    def test_constant_base_noise_norm_law(self):
        data = DatasetTable(np.arange(10.0))
        with pytest.warns(UserWarning):
            outputs = np.array(
                [
                    privatize_mip(data, ConstantSeven(), 0.1, 2, seed, B=8).theta_hat[0]
                    for seed in range(4000)
                ]
            )
        scale = (6.16 / 0.1) ** 2
        profile = MomentProfile(np.array([1e-12]), 2)
        norms = sigma_norm_rows((outputs - 7.0)[:, None], profile)
        ks = stats.kstest(norms, lambda t: 1.0 - np.exp(-t / scale)).statistic
        assert ks <= 0.05

    def test_bound_holds_in_attack_game(self, mean_query_setup):
        data, alg = mean_query_setup
        eta = 0.1
        profile = exact_moments(data, alg, 6, 2)
        mech = MipNoiseMechanism(data, alg, eta, profile, variant="density_exact")
        report = optimal_attacker_accuracy(data, mech, 0, 4000, 17)
        assert report.accuracy <= 0.6 + 3 * report.std_error

    def test_less_noise_never_hurts_attacker(self, mean_query_setup):
        data, alg = mean_query_setup
        profile = exact_moments(data, alg, 6, 2)
        accs = {}
        for eta in (0.05, 0.4):
            mech = MipNoiseMechanism(data, alg, eta, profile, variant="density_exact")
            accs[eta] = optimal_attacker_accuracy(data, mech, 0, 6000, 23)
        tolerance = 2 * math.hypot(accs[0.05].std_error, accs[0.4].std_error)
        assert accs[0.4].accuracy >= accs[0.05].accuracy - tolerance

    def test_output_law_depends_only_on_theta_and_profile(self):
        # Two different datasets arranged so the released statistic and the
        # profile agree must produce bit-identical releases at equal seeds.
        base = np.array([1.0, 2.0, 3.0, 4.0, 5.0, 6.0])
        data_a = DatasetTable(base)
        data_b = DatasetTable(2.0 * base + 1.0)

        class Unscale(MeanQuery):
            def __call__(self, rows):
                return np.atleast_1d(((rows - 1.0) / 2.0).mean(axis=0))

        profile = MomentProfile(np.array([0.5]), 2)
        out_a = privatize_mip(data_a, MeanQuery(), 0.2, 2, 99, profile=profile)
        out_b = privatize_mip(data_b, Unscale(), 0.2, 2, 99, profile=profile)
        np.testing.assert_array_equal(out_a.theta_hat, out_b.theta_hat)

    def test_profile_order_mismatch_rejected(self):
        data = DatasetTable(np.arange(6.0))
        with pytest.raises(ValidationError):
            privatize_mip(data, MeanQuery(), 0.1, 4, 1, profile=MomentProfile(np.ones(1), 2))

    def test_eta_out_of_range(self):
        data = DatasetTable(np.arange(6.0))
        with pytest.raises(ValidationError):
            privatize_mip(data, MeanQuery(), 0.7, 2, 1)

    def test_deterministic_given_seed(self):
        data = DatasetTable(np.arange(8.0))
        a = privatize_mip(data, MeanQuery(), 0.2, 2, 5, B=8)
        b = privatize_mip(data, MeanQuery(), 0.2, 2, 5, B=8)
        np.testing.assert_array_equal(a.theta_hat, b.theta_hat)


class TestPrivatizeLaplaceDp:
    def test_noise_variance(self):
        # The op adds Laplace(sensitivity / epsilon) per coordinate; at
        # delta=1, eps=1 the variance identity gives exactly 2.
        mech = LaplaceDpMechanism(
            DatasetTable(np.zeros((4, 1))), MeanQuery(), epsilon=1.0, sensitivity=1.0
        )
        assert mech.scale == 1.0
        draws = rng_stream(61, "lap-dp").laplace(0.0, mech.scale, 10**6)
        assert float(np.var(draws)) == pytest.approx(2.0, rel=0.02)
        # Wiring check on the op itself at a smaller draw count.
        data = DatasetTable(np.zeros((4, 1)))
        released = np.array(
            [
                privatize_laplace_dp(data, MeanQuery(), 1.0, 1.0, seed).theta_hat[0]
                for seed in range(5000)
            ]
        )
        assert float(np.var(released)) == pytest.approx(2.0, rel=0.1)

    def test_large_epsilon_limit(self):
        data = DatasetTable(np.arange(8.0))
        out = privatize_laplace_dp(data, MeanQuery(), 1e9, 1.0, 3)
        train_mean = float(out.theta_hat[0])
        resampled = privatize_laplace_dp(data, MeanQuery(), 1e12, 1.0, 3)
        assert train_mean == pytest.approx(float(resampled.theta_hat[0]), abs=1e-6)

    def test_zero_sensitivity_rejected(self):
        data = DatasetTable(np.arange(4.0))
        with pytest.raises(ValidationError):
            privatize_laplace_dp(data, MeanQuery(), 1.0, 0.0, 1)


class TestDpsgd:
    def test_noise_free_converges_to_second_moment(self):
        rng = rng_stream(31, "dpsgd-data")
        data = DatasetTable(rng.normal(0, 1, (200, 3)))
        out = dpsgd_train(data, "covariance_fit", 500, 0.4, math.inf, 0.0, 1)
        target = data.records.T @ data.records / data.n
        fitted = out.theta_hat.reshape(3, 3)
        assert np.linalg.norm(fitted - target) / np.linalg.norm(target) <= 1e-6

    def test_median_heuristic_matches_hand_pilot(self):
        rng = rng_stream(32, "dpsgd-clip")
        data = DatasetTable(rng.normal(0, 1, (12, 2)))
        steps, lr = 7, 0.4
        # Hand-rolled pilot: same trajectory, norms pooled over every step.
        outer = np.einsum("ni,nj->nij", data.records, data.records)
        target = outer.mean(axis=0)
        A = np.zeros((2, 2))
        pool = []
        for _ in range(steps):
            grads = 2.0 * (A[None] - outer)
            pool.extend(np.linalg.norm(grads.reshape(len(grads), -1), axis=1))
            A = A - lr * 2.0 * (A - target)
        expected = float(np.median(pool))
        assert dpsgd_median_clip(data, steps=steps, lr=lr) == pytest.approx(expected, rel=1e-12)

    def test_tight_clip_scales_gradients_to_exactly_clip_norm(self):
        rng = rng_stream(35, "dpsgd-tight")
        data = DatasetTable(rng.normal(3, 1, (6, 2)))
        outer = np.einsum("ni,nj->nij", data.records, data.records)
        grads = 2.0 * (0.0 - outer)
        norms = np.linalg.norm(grads.reshape(len(grads), -1), axis=1)
        clip = 0.5 * norms.min()
        clipped = grads * (clip / norms)[:, None, None]
        assert np.allclose(
            np.linalg.norm(clipped.reshape(len(grads), -1), axis=1), clip
        )
        expected_step = -0.4 * clipped.mean(axis=0)
        out = dpsgd_train(data, "covariance_fit", 1, 0.4, clip, 0.0, 2)
        np.testing.assert_allclose(out.theta_hat.reshape(2, 2), expected_step, rtol=1e-12)

    def test_divergence_reported_with_step(self):
        data = DatasetTable(np.ones((4, 1)))
        with pytest.raises(RuntimeError, match="step"):
            dpsgd_train(data, "covariance_fit", 50, 1e30, math.inf, 0.0, 1)

    def test_accounting_round_trip(self):
        multiplier = dpsgd_noise_multiplier_for_eta(0.2, 500, 50_000)
        report = dpsgd_privacy_report(500, multiplier, 50_000)
        assert report["eta"] == pytest.approx(0.2, rel=1e-9)
        assert report["delta"] == pytest.approx(1.0 / 50_000)
        assert "not covered" in report["eta_note"]

    def test_rho_formula(self):
        report = dpsgd_privacy_report(100, 5.0, 1000)
        assert report["rho"] == pytest.approx(100 / 50.0)


class TestSubsetPublisher:
    def test_p_zero_always_empty(self):
        data = DatasetTable(np.arange(6.0))
        assert all(subset_publisher(data, 0.0, seed) == frozenset() for seed in range(20))

    def test_p_one_publishes_train(self):
        data = DatasetTable(np.arange(6.0))
        released = subset_publisher(data, 1.0, 9)
        assert len(released) == 3

    def test_pmf_zero_outside_mask(self):
        data = DatasetTable(np.arange(6.0))
        mech = SubsetPublisherMechanism(data, 0.3)
        mask = SubsetMask(6, (0, 1, 2))
        assert mech.pmf(frozenset({5}), mask) == 0.0
        assert mech.pmf(frozenset({0, 1}), mask) == pytest.approx(0.3**2 * 0.7)

    def test_adjacent_mask_pmf_ratio_infinite(self):
        data = DatasetTable(np.arange(6.0))
        mech = SubsetPublisherMechanism(data, 0.01)
        inside = SubsetMask(6, (0, 1, 2))
        adjacent = SubsetMask(6, (1, 2, 3))
        released = frozenset({0})
        assert mech.pmf(released, inside) > 0.0
        assert mech.pmf(released, adjacent) == 0.0

    def test_enumerated_outputs_sum_to_one(self):
        data = DatasetTable(np.arange(6.0))
        mech = SubsetPublisherMechanism(data, 0.37)
        mask = SubsetMask(6, (1, 3, 5))
        total = sum(p for _, p in mech.enumerate_outputs(mask))
        assert total == pytest.approx(1.0, rel=1e-12)


class TestBinaryTightDp:
    def test_pmf_ratio_exactly_exp_epsilon(self):
        epsilon = 0.8
        mech = BinaryReleaseMechanism(epsilon)
        m0, m1 = mech.masks
        released = frozenset({0})
        ratio = mech.pmf(released, m0) / mech.pmf(released, m1)
        assert ratio == pytest.approx(math.exp(epsilon), rel=1e-12)

    def test_posterior_odds_bounded_by_exp_epsilon(self):
        # Posterior odds of membership never move more than e^eps away from
        # the (even) prior odds, checked exactly on both outputs and targets.
        epsilon = math.log(3.0)
        mech = BinaryReleaseMechanism(epsilon)
        for target in (0, 1):
            for released in (frozenset({0}), frozenset({1})):
                post = bayes_posterior(released, target, mech.data, mech)
                odds = (1.0 - post) / post
                assert odds <= math.exp(epsilon) + 1e-12
                assert odds >= math.exp(-epsilon) - 1e-12

    def test_small_epsilon_near_uniform(self):
        mech = BinaryReleaseMechanism(1e-9)
        assert mech.p == pytest.approx(0.5, abs=1e-9)

    def test_single_draws_are_singletons(self):
        for seed in range(10):
            released = binary_tight_dp(math.log(3.0), seed)
            assert released in (frozenset({0}), frozenset({1}))


class TestDensityConsistency:
    def test_conditional_density_ratio_matches_exponential_form(self, mean_query_setup):
        # Ratios across masks are the contract; the shared normalizer cancels.
        data, alg = mean_query_setup
        profile = exact_moments(data, alg, 6, 2)
        mech = MipNoiseMechanism(data, alg, 0.3, profile, variant="density_exact")
        output = np.array([0.4])
        m0, m1 = mech.masks[0], mech.masks[17]
        r0 = abs(0.4 - float(alg(data.rows(m0))[0])) / float(profile.sigma[0])
        r1 = abs(0.4 - float(alg(data.rows(m1))[0])) / float(profile.sigma[0])
        expected = math.exp(-(r0 - r1) / mech.spec.scale)
        ratio = mech.conditional_density(output, m0) / mech.conditional_density(output, m1)
        assert ratio == pytest.approx(expected, rel=1e-9)

    def test_mip_density_exact_scalar(self, mean_query_setup):
        data, alg = mean_query_setup
        profile = exact_moments(data, alg, 6, 2)
        mech = MipNoiseMechanism(data, alg, 0.3, profile, variant="density_exact")
        rng = rng_stream(51, "dens-1d")
        picks = rng.choice(mech.mask_count, 3, replace=False)
        for idx in picks:
            theta = float(mech.theta_table[idx, 0])
            draws = np.array(
                [float(mech.sample_by_index(int(idx), rng)[0]) for _ in range(20_000)]
            )
            # Coordinate-scale law: Laplace(c * sigma), since the direction
            # carries magnitude sigma when its weighted norm is 1.
            scale = mech.spec.scale * float(profile.sigma[0])
            ks = stats.kstest(draws - theta, stats.laplace(scale=scale).cdf)
            assert ks.statistic <= 0.02

    def test_mip_density_exact_planar_radius(self):
        data = DatasetTable(rng_stream(52, "dens-2d-data").normal(0, 1, (10, 2)))
        alg = MeanQuery()
        profile = exact_moments(data, alg, 5, 2)
        mech = MipNoiseMechanism(data, alg, 0.3, profile, variant="density_exact")
        rng = rng_stream(53, "dens-2d")
        for idx in rng.choice(mech.mask_count, 3, replace=False):
            theta = mech.theta_table[int(idx)]
            draws = np.stack(
                [mech.sample_by_index(int(idx), rng) for _ in range(20_000)]
            )
            radius = sigma_norm_rows(draws - theta, profile)
            ks = stats.kstest(radius, stats.gamma(a=2, scale=mech.spec.scale).cdf)
            assert ks.statistic <= 0.02

    def test_laplace_dp_density(self, mean_query_setup):
        data, alg = mean_query_setup
        mech = LaplaceDpMechanism(data, alg, epsilon=0.5, sensitivity=1.0)
        rng = rng_stream(54, "dens-lap")
        for idx in rng.choice(mech.mask_count, 3, replace=False):
            theta = float(mech.theta_table[int(idx), 0])
            draws = np.array(
                [float(mech.sample_by_index(int(idx), rng)[0]) for _ in range(20_000)]
            )
            ks = stats.kstest(draws - theta, stats.laplace(scale=mech.scale).cdf)
            assert ks.statistic <= 0.02

    def test_publisher_pmf_chi_square(self):
        data = DatasetTable(np.arange(6.0))
        mech = SubsetPublisherMechanism(data, 0.3)
        rng = rng_stream(55, "dens-pub")
        draws = 10**6
        for idx in rng.choice(mech.mask_count, 3, replace=False):
            mask = mech.masks[int(idx)]
            codes = mech.sample_bits(mask, rng, draws)
            counts = np.bincount(codes, minlength=2**mask.k)
            weights = np.array(
                [
                    mech.pmf(
                        frozenset(
                            mask.indices[j] for j in range(mask.k) if (code >> j) & 1
                        ),
                        mask,
                    )
                    for code in range(2**mask.k)
                ]
            )
            chi2 = float((((counts - draws * weights) ** 2) / (draws * weights)).sum())
            assert chi2 <= stats.chi2.ppf(0.999, df=2**mask.k - 1)

    def test_binary_release_frequencies(self):
        mech = BinaryReleaseMechanism(math.log(3.0))
        rng = rng_stream(56, "dens-bin")
        hits = sum(
            mech.sample(mech.masks[0], rng) == frozenset({0}) for _ in range(10_000)
        )
        assert hits / 10_000 == pytest.approx(0.75, abs=0.02)
