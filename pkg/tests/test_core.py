import numpy as np
import pytest

from holistic.core import (
    DimensionMismatchError,
    DiscreteDistribution,
    DistributionError,
    LossProfile,
    ParameterError,
    RobustnessParams,
    mean,
    merge_duplicates,
    quantile,
    scaled_cvar,
    scaled_cvar_minimization,
    validate_weights,
    variance,
)


@pytest.fixture
def running_profile():
    return LossProfile.from_losses([1.0, 2.0, 3.0, 4.0], worst_case=10.0)


def random_profile(rng, max_k=50):
    k = int(rng.integers(1, max_k + 1))
    losses = rng.uniform(0, 5, k)
    # repeated values exercise ties at the quantile
    if k > 2 and rng.random() < 0.3:
        losses[1] = losses[0]
    return LossProfile.from_losses(losses, rng.dirichlet(np.ones(k)))


class TestValidateWeights:
    def test_renormalizes_within_tolerance(self):
        w = validate_weights([0.5, 0.5 + 1e-13])

        assert w.sum() == pytest.approx(1.0, abs=1e-15)
        assert not w.flags.writeable

    def test_bad_sum(self):
        with pytest.raises(DistributionError, match="sum"):
            validate_weights([0.5, 0.6])

    def test_negative(self):
        with pytest.raises(DistributionError, match="Negative"):
            validate_weights([1.5, -0.5])

    def test_empty(self):
        with pytest.raises(DistributionError):
            validate_weights([])


class TestDiscreteDistribution:
    def test_from_samples_merges_in_first_occurrence_order(self):
        dist = DiscreteDistribution.from_samples([[3, 4], [1, 2], [3, 4]])

        assert dist.atoms.tolist() == [[3, 4], [1, 2]]
        assert dist.weights == pytest.approx([2 / 3, 1 / 3])

    def test_atom_weight_mismatch(self):
        with pytest.raises(DimensionMismatchError):
            DiscreteDistribution([1.0, 2.0], [1.0])

    def test_expectation_ignores_zero_weight(self):
        dist = DiscreteDistribution([1.0, 2.0], [1.0, 0.0])

        assert dist.expectation([5.0, np.inf]) == 5.0

    def test_sample_is_seeded(self):
        dist = DiscreteDistribution([2.0, 5.0, 8.0], [0.3, 0.4, 0.3])
        a = dist.sample(np.random.default_rng(7), 100)
        b = dist.sample(np.random.default_rng(7), 100)

        assert a.shape == (100,)
        assert np.array_equal(a, b)
        assert set(a.tolist()) <= {2.0, 5.0, 8.0}

    def test_csv(self, tmp_path):
        dist = DiscreteDistribution([[0.1, 1.0], [0.2, -1.0]], [0.25, 0.75])
        path = tmp_path / "dist.csv"
        dist.to_csv(path)

        assert path.read_text().splitlines()[0] == "atom_id,weight,xi_0,xi_1"
        parsed = DiscreteDistribution.from_csv(path)
        assert np.array_equal(parsed.atoms, dist.atoms)
        assert np.array_equal(parsed.weights, dist.weights)

    def test_csv_unordered_rows(self, tmp_path):
        path = tmp_path / "dist.csv"
        path.write_text(
            "atom_id,weight,xi_0\n1,0.75,0.30000000000000004\n0,0.25,2\n"
        )
        parsed = DiscreteDistribution.from_csv(path)

        assert parsed.atoms.tolist() == [2.0, 0.1 + 0.2]
        assert parsed.weights.tolist() == [0.25, 0.75]

    def test_json(self):
        dist = DiscreteDistribution([1.0, 2.0], [0.5, 0.5])
        parsed = DiscreteDistribution.from_json(dist.to_json())

        assert parsed.atoms.tolist() == [1.0, 2.0]


class TestMergeDuplicates:
    def test_counts(self):
        unique, counts = merge_duplicates([5.0, 5.0, 1.0])

        assert unique.tolist() == [5.0, 1.0]
        assert counts.tolist() == [2.0, 1.0]

    def test_empty(self):
        with pytest.raises(DistributionError):
            merge_duplicates(np.zeros((0, 2)))


class TestLossProfile:
    def test_base_above_inflated(self):
        with pytest.raises(DistributionError, match="Base loss"):
            LossProfile([1.0], [2.0], [1.0], 3.0)

    def test_inflated_above_worst_case(self):
        with pytest.raises(DistributionError, match="worst-case"):
            LossProfile([4.0], [2.0], [1.0], 3.0)

    def test_shape_mismatch(self):
        with pytest.raises(DimensionMismatchError):
            LossProfile([1.0, 2.0], [1.0], [0.5, 0.5], 3.0)

    def test_non_finite_loss(self):
        with pytest.raises(DistributionError, match="finite"):
            LossProfile([np.nan], [0.0], [1.0], 3.0)

    def test_from_losses_defaults(self):
        profile = LossProfile.from_losses([1.0, 3.0])

        assert profile.weights.tolist() == [0.5, 0.5]
        assert profile.worst_case == 3.0

    def test_csv_worst_case_default(self, tmp_path, running_profile):
        path = tmp_path / "profile.csv"
        running_profile.to_csv(path)

        assert LossProfile.from_csv(path).worst_case == 4.0
        assert LossProfile.from_csv(path, 10.0).worst_case == 10.0

    def test_csv_missing_column(self, tmp_path):
        path = tmp_path / "profile.csv"
        path.write_text("atom_id,weight,loss\n0,1,2\n")

        with pytest.raises(DistributionError, match="Missing columns"):
            LossProfile.from_csv(path)

    def test_csv_malformed_value(self, tmp_path):
        path = tmp_path / "profile.csv"
        path.write_text("atom_id,weight,base_loss,inflated_loss\n0,1,x,2\n")

        with pytest.raises(DistributionError, match="Non-numeric"):
            LossProfile.from_csv(path)

    def test_csv_rejects_nan(self, tmp_path):
        path = tmp_path / "profile.csv"
        path.write_text("atom_id,weight,base_loss,inflated_loss\n0,1,nan,2\n")

        with pytest.raises(DistributionError, match="NaN"):
            LossProfile.from_csv(path)

    def test_csv_round_trip_is_exact(self, tmp_path):
        losses = np.random.default_rng(0).uniform(0, 1, 8)
        profile = LossProfile.from_losses(losses / 3, worst_case=1.0)
        path = tmp_path / "profile.csv"
        profile.to_csv(path)
        parsed = LossProfile.from_csv(path, 1.0)

        assert np.array_equal(parsed.inflated_losses, profile.inflated_losses)
        assert np.array_equal(parsed.weights, profile.weights)


class TestRobustnessParams:
    def test_epsilon_prime_defaults_to_epsilon(self):
        assert RobustnessParams(epsilon=0.2).epsilon_prime == 0.2

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"epsilon": 0.2, "epsilon_prime": 0.1},
            {"epsilon": -0.1},
            {"alpha": 1.5},
            {"r": -1.0},
            {"r": float("inf")},
        ],
    )
    def test_invalid(self, kwargs):
        with pytest.raises(ParameterError):
            RobustnessParams(**kwargs)

    def test_json(self):
        params = RobustnessParams(0.1, 0.3, 0.2, 0.5)

        assert RobustnessParams.from_json(params.to_json()) == params


class TestQuantile:
    def test_first_quarter(self, running_profile):
        assert quantile(running_profile, 0.25) == 1.0

    def test_single_atom(self):
        assert quantile(LossProfile.from_losses([5.0]), 0.7) == 5.0

    def test_full_mass_is_max(self, running_profile):
        assert quantile(running_profile, 1.0) == 4.0

    def test_nondecreasing(self):
        rng = np.random.default_rng(0)
        for _ in range(100):
            profile = random_profile(rng)
            values = [quantile(profile, a) for a in np.linspace(0, 1, 21)]

            assert np.all(np.diff(values) >= 0)
            assert set(values) <= set(profile.inflated_losses.tolist())


class TestScaledCVaR:
    def test_running_example(self, running_profile):
        assert scaled_cvar(running_profile, 0.25) == pytest.approx(2.25)

    def test_level_zero_is_mean(self, running_profile):
        assert scaled_cvar(running_profile, 0.0) == pytest.approx(2.5)

    def test_level_one_is_zero(self, running_profile):
        assert scaled_cvar(running_profile, 1.0) == pytest.approx(0.0)

    def test_invalid_level(self, running_profile):
        with pytest.raises(ParameterError):
            scaled_cvar(running_profile, 1.2)

    def test_sorted_sum_matches_minimization(self):
        rng = np.random.default_rng(1)
        for _ in range(1000):
            profile = random_profile(rng)
            alpha = float(rng.uniform())

            assert scaled_cvar(profile, alpha) == pytest.approx(
                scaled_cvar_minimization(profile, alpha), abs=1e-10
            )

    def test_nonincreasing_in_level(self):
        rng = np.random.default_rng(2)
        for _ in range(100):
            profile = random_profile(rng)
            values = [scaled_cvar(profile, a) for a in np.linspace(0, 1, 11)]

            assert np.all(np.diff(values) <= 1e-12)


class TestMoments:
    def test_uniform(self, running_profile):
        assert mean(running_profile) == 2.5
        assert variance(running_profile) == pytest.approx(1.25)

    def test_single_atom(self):
        profile = LossProfile.from_losses([5.0])

        assert mean(profile) == 5.0
        assert variance(profile) == 0.0

    def test_zero_weight_atom_ignored(self):
        profile = LossProfile.from_losses([2.0, 9.0], [1.0, 0.0])

        assert mean(profile) == 2.0

    def test_inflated_selection(self):
        profile = LossProfile([2.0, 4.0], [1.0, 3.0], [0.5, 0.5], 5.0)

        assert mean(profile) == 2.0
        assert mean(profile, inflated=True) == 3.0
