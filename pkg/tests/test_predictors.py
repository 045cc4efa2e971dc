import math

import numpy as np
import pytest

from holistic.core import (
    LossProfile,
    ParameterError,
    RobustnessParams,
    mean,
    scaled_cvar,
)
from holistic.losses import L1RegressionOracle, RegressionData, build_profile
from holistic.predictors import (
    PredictorKind,
    PredictorKindError,
    WorstCaseSolution,
    certify,
    constraint_violation,
    hd,
    hd_dual,
    hd_dual_objective,
    hd_univariate,
    hr,
    hr_dual,
    hr_dual_objective,
    kl_dro,
    lp_dro,
    predictor_family,
    saa,
    svp,
    univariate_bracket,
    values_close,
)


@pytest.fixture
def running_profile():
    return LossProfile.from_losses([1.0, 2.0, 3.0, 4.0], worst_case=10.0)


def random_profile(rng, max_k=20, tied=False):
    k = int(rng.integers(1, max_k + 1))
    losses = rng.uniform(0, 5, k)
    worst_case = losses.max()
    if not tied:
        worst_case += rng.uniform(0.1, 3)
    return LossProfile.from_losses(losses, rng.dirichlet(np.ones(k)), worst_case)


def random_profiles(seed, count, max_k=20):
    """Every other profile has its worst case attained by an atom."""

    rng = np.random.default_rng(seed)
    for i in range(count):
        yield rng, random_profile(rng, max_k, tied=i % 2 == 0)


class TestSAA:
    def test_mean(self, running_profile):
        assert saa(running_profile) == 2.5

    def test_single_atom(self):
        assert saa(LossProfile.from_losses([7.0])) == 7.0

    def test_no_inflation(self, running_profile):
        assert saa(running_profile, use_inflated=False) == saa(running_profile)


class TestSVP:
    def test_no_penalty(self, running_profile):
        assert svp(running_profile, 0.0) == 2.5

    def test_constant_losses(self):
        assert svp(LossProfile.from_losses([3.0, 3.0]), 5.0) == 3.0

    def test_two_atoms(self):
        assert svp(LossProfile.from_losses([1.0, 3.0]), 1.0) == pytest.approx(3)

    def test_negative_penalty(self, running_profile):
        with pytest.raises(ParameterError):
            svp(running_profile, -1.0)

    def test_solution_weights_reproduce_value(self):
        profile = LossProfile.from_losses([1.0, 3.0, 4.0])
        params = RobustnessParams()
        solution = predictor_family(profile, params, PredictorKind.SVP, 0.7)

        assert solution.value == pytest.approx(svp(profile, 0.7))
        assert solution.objective(profile) == pytest.approx(solution.value)


class TestLPDRO:
    def test_running_example(self, running_profile):
        solution = lp_dro(running_profile, 0.25)

        assert solution.value == pytest.approx(4.75)
        assert solution.p_prime == pytest.approx([0, 0.25, 0.25, 0.25, 0.25])
        assert solution.s == pytest.approx([0.25, 0, 0, 0])

    def test_no_misspecification(self, running_profile):
        solution = lp_dro(running_profile, 0.0)

        assert solution.value == 2.5
        assert solution.p_prime.tolist() == [0.25] * 4 + [0.0]

    def test_full_misspecification(self, running_profile):
        solution = lp_dro(running_profile, 1.0)

        assert solution.value == 10.0
        assert solution.p_prime.tolist() == [0.0] * 4 + [1.0]

    def test_partial_boundary_weight(self, running_profile):
        solution = lp_dro(running_profile, 0.3)

        assert solution.p_prime == pytest.approx([0, 0.2, 0.25, 0.25, 0.3])

    def test_cvar_form(self):
        for rng, profile in random_profiles(0, 200):
            alpha = float(rng.uniform())

            assert lp_dro(profile, alpha).value == pytest.approx(
                scaled_cvar(profile, alpha) + alpha * profile.worst_case,
                abs=1e-10,
            )

    def test_invalid_alpha(self, running_profile):
        with pytest.raises(ParameterError):
            lp_dro(running_profile, 1.5)


class TestKLDRO:
    def test_zero_radius_is_mean(self, running_profile):
        assert kl_dro(running_profile, 0.0).value == 2.5

    def test_single_atom_closed_form(self):
        profile = LossProfile.from_losses([2.0], worst_case=10.0)
        solution = kl_dro(profile, math.log(2))

        assert solution.value == pytest.approx(6)
        assert solution.p_prime == pytest.approx([0.5, 0.5])

    def test_large_radius_reaches_worst_case(self, running_profile):
        assert kl_dro(running_profile, 20.0).value == pytest.approx(
            10, abs=1e-3
        )

    def test_strong_duality(self):
        for rng, profile in random_profiles(1, 200):
            r = float(rng.choice([0.01, 0.1, 1.0]))
            solution = kl_dro(profile, r)

            assert solution.p_prime.sum() == pytest.approx(1, abs=1e-12)
            assert solution.certificate.dual_value == pytest.approx(
                solution.value, rel=1e-6
            )

    def test_radius_is_spent(self):
        for rng, profile in random_profiles(2, 100):
            r = float(rng.choice([0.01, 0.1, 1.0]))
            p_prime = kl_dro(profile, r).p_prime
            support = profile.support
            divergence = float(
                np.dot(
                    profile.weights[support],
                    np.log(profile.weights[support] / p_prime[support]),
                )
            )

            assert divergence <= r + 1e-8


class TestHD:
    def test_zero_radius_is_lp(self, running_profile):
        assert hd(running_profile, 0.25, 0.0).value == pytest.approx(4.75)

    def test_no_misspecification_is_kl(self, running_profile):
        assert hd(running_profile, 0.0, 0.5).value == pytest.approx(
            kl_dro(running_profile, 0.5).value, rel=1e-12
        )

    def test_decomposition(self, running_profile):
        worst_case_profile = LossProfile.from_losses(
            [2.0, 3.0, 4.0, 10.0], worst_case=10.0
        )

        assert hd(running_profile, 0.25, math.log(2)).value == pytest.approx(
            kl_dro(worst_case_profile, math.log(2)).value, rel=1e-9
        )

    def test_univariate_route(self, running_profile):
        r = math.log(2)
        result = hd_univariate(running_profile, 0.25, r)

        assert result.value == pytest.approx(
            hd(running_profile, 0.25, r).value, rel=1e-8
        )

    def test_univariate_constant_losses(self):
        profile = LossProfile.from_losses([3.0, 3.0], worst_case=3.0)

        assert hd_univariate(profile, 0.2, 0.5).value == 3.0

    def test_univariate_small_radius(self, running_profile):
        value = hd_univariate(running_profile, 0.25, 1e-8).value

        assert 4.75 <= value + 1e-9
        assert value - 4.75 < 1e-3

    def test_univariate_needs_radius(self, running_profile):
        with pytest.raises(ParameterError):
            univariate_bracket(running_profile, 0.25, 0.0)

    def test_dual_route(self, running_profile):
        certificate = hd_dual(running_profile, 0.25, math.log(2))

        assert certificate.dual_value == pytest.approx(
            hd(running_profile, 0.25, math.log(2)).value, rel=1e-5
        )

    def test_routes_agree(self):
        for rng, profile in random_profiles(3, 200):
            alpha = float(rng.uniform(0, 0.9))
            r = float(rng.choice([0.01, 0.1, 1.0]))
            value = hd(profile, alpha, r).value
            univariate = hd_univariate(profile, alpha, r)
            lo, hi = univariate_bracket(profile, alpha, r)

            assert univariate.value == pytest.approx(value, rel=1e-7)
            assert lo <= univariate.argmin <= hi * (1 + 1e-12)
            assert hd_dual(profile, alpha, r).dual_value == pytest.approx(
                value, rel=1e-5
            )

    def test_dual_objective_at_certificate(self, running_profile):
        certificate = hd_dual(running_profile, 0.25, 0.3)

        assert hd_dual_objective(
            running_profile,
            0.25,
            0.3,
            certificate.lam,
            certificate.beta,
            certificate.eta,
        ) == pytest.approx(certificate.dual_value, rel=1e-9)

    def test_primal_constraints(self):
        for rng, profile in random_profiles(4, 100):
            alpha = float(rng.uniform(0, 0.9))
            r = float(rng.choice([0.0, 0.01, 0.1, 1.0]))
            solution = hd(profile, alpha, r)

            assert (
                constraint_violation(
                    solution, profile, alpha, r, PredictorKind.HD
                )
                <= 1e-7
            )


class TestHR:
    def test_zero_radius_is_lp(self, running_profile):
        assert hr(running_profile, 0.25, 0.0).value == pytest.approx(4.75)

    def test_no_misspecification_is_kl(self, running_profile):
        assert hr(running_profile, 0.0, 0.5).value == pytest.approx(
            kl_dro(running_profile, 0.5).value, rel=1e-8
        )

    def test_running_example(self, running_profile):
        value = hr(running_profile, 0.25, 0.1).value

        assert 4.75 < value <= 10
        assert hr_dual(running_profile, 0.25, 0.1).dual_value == pytest.approx(
            value, rel=1e-5
        )

    def test_routes_agree(self):
        for rng, profile in random_profiles(5, 200):
            alpha = float(rng.uniform(0, 0.9))
            r = float(rng.choice([0.01, 0.1, 1.0]))
            solution = hr(profile, alpha, r)
            certificate = hr_dual(profile, alpha, r)

            assert certificate.dual_value == pytest.approx(
                solution.value, rel=1e-5
            )
            assert 0 <= certificate.beta <= profile.worst_case - min(
                profile.inflated_losses
            ) + 1e-12
            assert certificate.eta >= profile.worst_case
            assert (
                constraint_violation(
                    solution, profile, alpha, r, PredictorKind.HR
                )
                <= 1e-7
            )

    def test_worst_case_attained_by_atom(self):
        profile = LossProfile.from_losses([1.0, 4.0], [0.5, 0.5], 4.0)
        solution = hr(profile, 0.3, 1.0)

        assert solution.value == pytest.approx(4.0)
        assert solution.value > kl_dro(profile, 1.0).value
        assert hr_dual(profile, 0.3, 1.0).dual_value == pytest.approx(
            4.0, rel=1e-5
        )
        assert (
            constraint_violation(solution, profile, 0.3, 1.0, PredictorKind.HR)
            <= 1e-9
        )

    def test_saturation_threshold(self):
        profile = LossProfile.from_losses([2.0], worst_case=10.0)

        assert hr(profile, 0.5, 1.0).value == pytest.approx(10.0)
        assert hr(profile, 0.5, 0.5).value == pytest.approx(
            10 - 8 * (math.exp(-0.5) - 0.5), rel=1e-6
        )

    def test_default_noise_support(self):
        rng = np.random.default_rng(11)
        X = rng.normal(size=(20, 2))
        data = RegressionData(X, X @ [1.0, -1.0] + rng.normal(size=20))
        oracle = L1RegressionOracle(data, 0.1)
        for _ in range(10):
            profile = build_profile(oracle, rng.normal(size=2), data.samples)
            solution = hr(profile, 0.3, 1.0)

            assert profile.worst_case == pytest.approx(
                profile.inflated_losses.max()
            )
            assert solution.value >= kl_dro(profile, 1.0).value - 1e-9
            assert hr_dual(profile, 0.3, 1.0).dual_value == pytest.approx(
                solution.value, rel=1e-5
            )
            assert (
                constraint_violation(
                    solution, profile, 0.3, 1.0, PredictorKind.HR
                )
                <= 1e-7
            )

    def test_dual_objective_at_certificate(self, running_profile):
        certificate = hr_dual(running_profile, 0.25, 0.3)

        assert hr_dual_objective(
            running_profile,
            0.25,
            0.3,
            certificate.lam,
            certificate.beta,
            certificate.eta,
        ) == pytest.approx(certificate.dual_value, rel=1e-9)

    def test_weak_duality(self, running_profile):
        rng = np.random.default_rng(6)
        value = hr(running_profile, 0.25, 0.3).value
        for _ in range(200):
            lam, beta = rng.uniform(0.01, 5), rng.uniform(0, 5)
            eta = running_profile.worst_case + rng.uniform(0.01, 10)

            assert (
                hr_dual_objective(running_profile, 0.25, 0.3, lam, beta, eta)
                >= value - 1e-7
            )

    def test_dual_objective_domain(self, running_profile):
        assert hr_dual_objective(running_profile, 0.1, 0.1, 1, 0, 9) == math.inf

    def test_dual_needs_radius(self, running_profile):
        with pytest.raises(ParameterError):
            hr_dual(running_profile, 0.25, 0.0)


class TestSpecialCases:
    def test_collapses(self):
        for rng, profile in random_profiles(7, 100):
            alpha = float(rng.uniform())
            r = float(rng.uniform(0.01, 1))
            lp = lp_dro(profile, alpha).value
            kl = kl_dro(profile, r).value

            assert hr(profile, alpha, 0.0).value == pytest.approx(lp, abs=1e-8)
            assert hd(profile, alpha, 0.0).value == pytest.approx(lp, abs=1e-8)
            assert hr(profile, 0.0, r).value == pytest.approx(kl, abs=1e-8)
            assert hd(profile, 0.0, r).value == pytest.approx(kl, abs=1e-8)
            assert hr(profile, 0.0, 0.0).value == pytest.approx(
                mean(profile, inflated=True), abs=1e-12
            )

    def test_ordering(self):
        for rng, profile in random_profiles(8, 200):
            alpha = float(rng.uniform(0.05, 0.9))
            r = float(rng.uniform(0.05, 1))
            plain = saa(profile)
            lp = lp_dro(profile, alpha).value
            kl = kl_dro(profile, r).value
            robust = hr(profile, alpha, r).value
            deterministic = hd(profile, alpha, r).value

            assert plain <= lp + 1e-9
            assert lp <= robust + 1e-9
            assert plain <= kl + 1e-9
            assert kl <= robust + 1e-9
            assert lp <= deterministic + 1e-9
            assert max(robust, deterministic) <= profile.worst_case + 1e-9


class TestMonotonicity:
    @pytest.mark.parametrize("predictor", [hr, hd])
    def test_alpha_and_radius(self, predictor):
        for _, profile in random_profiles(9, 100, max_k=10):
            for r in (0.0, 0.05, 0.5):
                values = [predictor(profile, a, r).value for a in (0, 0.1, 0.3)]
                assert np.all(np.diff(values) >= -1e-9)
            for alpha in (0.0, 0.1, 0.3):
                values = [predictor(profile, alpha, r).value for r in (0, 0.05, 0.5)]
                assert np.all(np.diff(values) >= -1e-9)

    @pytest.mark.parametrize("predictor", [hr, hd])
    def test_noise_radius(self, predictor):
        rng = np.random.default_rng(10)
        X = rng.normal(size=(15, 2))
        data = RegressionData(X, X @ [1.0, 0.5] + rng.normal(size=15))
        for _ in range(20):
            theta = rng.normal(size=2)
            values = [
                predictor(
                    build_profile(
                        L1RegressionOracle(data, epsilon, 0.5),
                        theta,
                        data.samples,
                    ),
                    0.1,
                    0.2,
                ).value
                for epsilon in (0.0, 0.1, 0.3)
            ]

            assert np.all(np.diff(values) >= -1e-9)


class TestPredictorFamily:
    def test_winf_without_noise_is_saa(self, running_profile):
        params = RobustnessParams(alpha=0.3)

        assert predictor_family(
            running_profile, params, PredictorKind.WINF
        ).value == saa(running_profile)

    def test_tv_extremes(self, running_profile):
        tv = PredictorKind.TV

        assert predictor_family(
            running_profile, RobustnessParams(), tv
        ).value == saa(running_profile)
        assert (
            predictor_family(
                running_profile, RobustnessParams(alpha=1.0), tv
            ).value
            == 10
        )

    def test_tv_needs_uninflated_profile(self):
        profile = LossProfile([2.0, 3.0], [1.0, 3.0], [0.5, 0.5], 4.0)

        with pytest.raises(PredictorKindError, match="tv"):
            predictor_family(profile, RobustnessParams(), PredictorKind.TV)

    def test_accepts_kind_values(self, running_profile):
        params = RobustnessParams(alpha=0.25)

        assert predictor_family(running_profile, params, "lp").value == 4.75

    def test_unknown_kind(self, running_profile):
        with pytest.raises(ValueError):
            predictor_family(running_profile, RobustnessParams(), "cvar")

    def test_certify(self, running_profile):
        params = RobustnessParams(alpha=0.25, r=0.1)
        solution = predictor_family(running_profile, params, PredictorKind.HR)
        certified = certify(running_profile, params, PredictorKind.HR, solution)

        assert solution.certificate is None
        assert certified.certificate.dual_value >= solution.value - 1e-6
        assert certify(
            running_profile, RobustnessParams(alpha=0.25), "hr", solution
        ).certificate is None

    @pytest.mark.parametrize("kind", [PredictorKind.HR, PredictorKind.HD])
    def test_certify_without_duality_gap(self, caplog, kind):
        for rng, profile in random_profiles(9, 40, max_k=8):
            params = RobustnessParams(
                alpha=float(rng.uniform(0, 0.5)), r=float(rng.uniform(0.01, 1))
            )
            with caplog.at_level("WARNING", logger="holistic.predictors"):
                certify(
                    profile, params, kind, predictor_family(profile, params, kind)
                )

        assert not caplog.records

    def test_json(self, running_profile):
        params = RobustnessParams(alpha=0.25, r=0.1)
        solution = certify(
            running_profile,
            params,
            PredictorKind.HD,
            predictor_family(running_profile, params, PredictorKind.HD),
        )
        parsed = WorstCaseSolution.from_json(solution.to_json())

        assert parsed.value == solution.value
        assert np.array_equal(parsed.p_prime, solution.p_prime)
        assert parsed.certificate == solution.certificate
        assert parsed.to_json()["certificate"]["lambda"] == solution.certificate.lam


def test_values_close():
    assert values_close(1.0, 1.0 + 1e-6)
    assert not values_close(1.0, 1.1)
    assert values_close(0.0, 1e-10)
