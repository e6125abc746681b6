from fractions import Fraction

import numpy as np
import pytest
from scipy.stats import spearmanr

from grassopt.errors import ContractViolation
from grassopt.evaluate import (
    auc, channel_scores, fd_gradient_check, fk_visualization, fukunaga_koontz,
    log_likelihood_ratio, rate_fit,
)
from grassopt.grassmann import GrassmannPoint, project_tangent, random_point
from grassopt.objective import (
    ChannelizedStats, ClassStats, Objective, jeffreys, jeffreys_grad_ambient, random_class_stats,
    random_spd,
)
from grassopt.simulate import sample_images


def brute_auc(s1, s2):
    wins = sum((a > b) * 2 + (a == b) for a in s1 for b in s2)
    return Fraction(int(wins), 2 * len(s1) * len(s2))


class TestFukunagaKoontz:
    def test_identical_classes(self, rng):
        k = random_spd(6, rng)
        fk = fukunaga_koontz(ClassStats(k, k), 2)
        assert fk.j_closed_form == pytest.approx(0.0, abs=1e-12)
        assert np.allclose(fk.gen_eigs, 1.0)

    def test_two_by_two(self):
        fk = fukunaga_koontz(ClassStats(np.diag([4.0, 1.0]), np.eye(2)), 1)
        assert fk.gen_eigs[0] == pytest.approx(4.0)
        assert fk.j_closed_form == pytest.approx(2.25)
        assert np.allclose(np.abs(fk.t_star.basis[:, 0]), [1.0, 0.0])

    def test_picks_small_eigenvalues_when_farther(self):
        # lambda + 1/lambda is 10.1 for 0.1 and 4.25 for 4
        fk = fukunaga_koontz(ClassStats(np.diag([4.0, 0.1, 1.0]), np.eye(3)), 1)
        assert fk.gen_eigs[0] == pytest.approx(0.1)

    def test_tie_prefers_larger_eigenvalue(self):
        fk = fukunaga_koontz(ClassStats(np.diag([0.5, 2.0, 1.0]), np.eye(3)), 1)
        assert fk.gen_eigs[0] == pytest.approx(2.0)

    def test_closed_form_and_stationarity(self, rng):
        stats = random_class_stats(16, rng, spread=1.5)
        fk = fukunaga_koontz(stats, 3)
        j = jeffreys(stats, fk.t_star)
        assert j == pytest.approx(fk.j_closed_form, rel=1e-8)
        g = project_tangent(fk.t_star, jeffreys_grad_ambient(stats, fk.t_star)).mat
        assert np.linalg.norm(g) < 1e-6 * (1 + j)

    def test_beats_random_subspaces(self, rng):
        stats = random_class_stats(16, rng)
        fk = fukunaga_koontz(stats, 2)
        assert max(jeffreys(stats, random_point(16, 2, rng)) for _ in range(1000)) <= fk.j_closed_form

    def test_rejects_mean_difference(self, rng):
        with pytest.raises(ContractViolation):
            fukunaga_koontz(random_class_stats(5, rng, with_mean=True), 2)


class TestLikelihoodRatio:
    def test_equal_classes_zero(self, rng):
        c = random_spd(3, rng)
        ch = ChannelizedStats(c, c, np.zeros(3))
        m = rng.standard_normal(3)
        assert np.allclose(log_likelihood_ratio(ch, (m, m), rng.standard_normal((7, 3))), 0.0, atol=1e-12)

    def test_scalar(self):
        a, b, v = 2.0, 0.5, 1.3
        ch = ChannelizedStats(np.array([[a]]), np.array([[b]]), np.zeros(1))
        expected = v * v * (1 / b - 1 / a) + np.log(b / a)
        assert log_likelihood_ratio(ch, (np.zeros(1), np.zeros(1)), np.array([v])) == pytest.approx(expected)

    def test_label_swap_negates(self, rng):
        c1, c2 = random_spd(3, rng), random_spd(3, rng)
        m1, m2 = rng.standard_normal(3), rng.standard_normal(3)
        v = rng.standard_normal((5, 3))
        fwd = log_likelihood_ratio(ChannelizedStats(c1, c2, np.zeros(3)), (m1, m2), v)
        back = log_likelihood_ratio(ChannelizedStats(c2, c1, np.zeros(3)), (m2, m1), v)
        assert np.allclose(fwd, -back, atol=1e-12)


class TestAuc:
    def test_separated(self):
        assert auc([5, 6, 7], [1, 2]).auc == 1.0

    def test_identical(self):
        assert auc([1, 2, 2, 3], [3, 2, 1, 2]).auc == 0.5

    def test_hand_example(self):
        assert auc([3, 1], [2]).auc == 0.5

    def test_brute_force_exact(self, rng):
        for _ in range(100):
            s1 = rng.integers(0, 6, int(rng.integers(1, 51))).astype(float)
            s2 = rng.integers(0, 6, int(rng.integers(1, 51))).astype(float)
            res = auc(s1, s2)
            assert res.exact == brute_auc(s1, s2)
            assert (res.n_pos, res.n_neg) == (s1.size, s2.size)

    def test_monotone_transform(self, rng):
        s1, s2 = rng.standard_normal(300), rng.standard_normal(200) + 0.3
        assert auc(np.exp(3 * s1), np.exp(3 * s2)).exact == auc(s1, s2).exact

    def test_empty_and_nan(self):
        with pytest.raises(ValueError):
            auc([], [1.0])
        with pytest.raises(ValueError):
            auc([np.nan], [1.0])


class TestRateFit:
    def test_power_laws(self):
        k = np.arange(1, 101)
        assert rate_fit(k, 1.0 / k) == pytest.approx(-1.0, abs=1e-9)
        assert rate_fit(k, np.full(100, 3.0)) == pytest.approx(0.0, abs=1e-12)
        assert rate_fit(k, k ** -2.0) == pytest.approx(-2.0, abs=1e-9)

    def test_window(self):
        k = np.arange(1, 101)
        vals = np.where(k < 50, 1.0, 1.0 / k)
        assert rate_fit(k, vals, 50, 100) == pytest.approx(-1.0, abs=1e-9)

    def test_preconditions(self):
        k = np.arange(1, 20)
        with pytest.raises(ValueError):
            rate_fit(k, np.ones(19), 15, 19)
        with pytest.raises(ValueError):
            rate_fit(k, -np.ones(19))


class TestFdCheck:
    def test_constant_objective(self, rng):
        obj = Objective(value=lambda x: 4.0, grad=lambda x: np.zeros(x.shape))
        assert fd_gradient_check(obj, random_point(6, 2, rng), rng=rng) == 0.0

    def test_detects_wrong_gradient(self, rng):
        stats = random_class_stats(8, rng)
        obj = Objective(value=lambda x: jeffreys(stats, x),
                        grad=lambda x: 0.5 * jeffreys_grad_ambient(stats, x))
        assert fd_gradient_check(obj, random_point(8, 2, rng), rng=rng) > 1e-3

    def test_bad_arguments(self, rng):
        obj = Objective(value=lambda x: 0.0, grad=lambda x: np.zeros(x.shape))
        with pytest.raises(ValueError):
            fd_gradient_check(obj, random_point(4, 1, rng), h=0.0)


def test_visualization_in_subspace(rng):
    stats = random_class_stats(12, rng)
    x = random_point(12, 4, rng)
    vis = fk_visualization(stats, x, 3)
    assert vis.shape == (12, 3)
    assert np.allclose(x.basis @ (x.basis.T @ vis), vis, atol=1e-12)


def test_divergence_and_auc_rank_together():
    rhos = []
    for inst in range(20):
        rng = np.random.default_rng([inst, 77])
        stats = random_class_stats(16, rng)
        images = (sample_images(stats.k1, None, 2000, rng).images,
                  sample_images(stats.k2, None, 2000, rng).images)
        points = [random_point(16, 2, rng) for _ in range(10)]
        js = [jeffreys(stats, x) for x in points]
        aucs = [auc(*channel_scores(stats, x, *images)).auc for x in points]
        rhos.append(spearmanr(js, aucs)[0])
    assert np.median(rhos) > 0.8
