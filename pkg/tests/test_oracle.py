import numpy as np
import pytest

from grassopt.errors import ConfigError, OracleFailure
from grassopt.grassmann import project_tangent, random_point
from grassopt.objective import ClassStats, jeffreys_grad_ambient, neg_objective, random_class_stats, rayleigh_objective, random_spd
from grassopt.oracle import (
    MAX_RETRIES, AdditiveSchedule, Exact, PerturbPolicy, RelativeBounded, SurrogateStats,
    gradient_at, uniform_perturb,
)


@pytest.fixture
def problem(rng):
    stats = random_class_stats(10, rng)
    return stats, neg_objective(stats), random_point(10, 3, rng)


def test_exact_matches_objective(problem):
    stats, obj, x = problem
    g, err = gradient_at(Exact(), obj, x, 0)
    assert np.array_equal(g, -jeffreys_grad_ambient(stats, x))
    assert err == 0.0


def test_negative_iteration_rejected(problem):
    _, obj, x = problem
    with pytest.raises(ValueError):
        gradient_at(Exact(), obj, x, -1)


class TestAdditive:
    def test_schedule_arithmetic(self, problem):
        _, obj, x = problem
        orc = AdditiveSchedule(1.0, 1.0, seed=0)
        for k, expected in ((0, 1.0), (9, 0.1)):
            g, logged = orc.gradient(obj, x, k)
            assert logged == expected
            assert np.linalg.norm(g - obj.grad(x)) == pytest.approx(expected, rel=1e-12)

    def test_logged_sequence_exact(self, problem):
        _, obj, x = problem
        orc = AdditiveSchedule(2.5, 0.75, seed=3)
        logged = [orc.gradient(obj, x, k)[1] for k in range(50)]
        assert logged == [2.5 / (k + 1) ** 0.75 for k in range(50)]

    @pytest.mark.parametrize("c, exponent", [(0.0, 1.0), (-1.0, 1.0), (1.0, -0.1)])
    def test_bad_parameters(self, c, exponent):
        with pytest.raises(ConfigError):
            AdditiveSchedule(c, exponent)


class TestRelative:
    def test_bound_holds(self, rng):
        orc = RelativeBounded(0.3, seed=1)
        for _ in range(100):
            obj = rayleigh_objective(random_spd(8, rng))
            x = random_point(8, 2, rng)
            g, err = orc.gradient(obj, x, 0)
            true = project_tangent(x, obj.grad(x)).mat
            realized = np.linalg.norm(project_tangent(x, g).mat - true) / np.linalg.norm(true)
            assert 0 < realized <= 0.3 + 1e-12
            assert err == pytest.approx(realized * np.linalg.norm(true), rel=1e-10)

    @pytest.mark.parametrize("delta", [1.0, 1.5, -0.1])
    def test_delta_range(self, delta):
        with pytest.raises(ConfigError):
            RelativeBounded(delta)


class TestUniformPerturb:
    def test_symmetric_and_bounded(self, rng):
        k = random_spd(12, rng)
        kh = uniform_perturb(k, 4, rng)
        assert np.array_equal(kh, kh.T)
        d = kh - k
        assert d.min() >= 0 and d.max() <= 0.25

    def test_large_k_limit(self, rng):
        k = random_spd(12, rng)
        assert np.max(np.abs(uniform_perturb(k, 10**6, rng) - k)) <= 1e-6

    def test_mean_perturbation(self, rng):
        d = uniform_perturb(np.zeros((400, 400)), 5, rng)
        assert d.mean() == pytest.approx(1 / 10, rel=0.01)

    def test_frobenius_concentration_full_size(self, rng):
        # E |D|_F^2 = n^2 E[Y^2] = n^2 / 3 also under mirroring
        n = 2500
        d = uniform_perturb(np.zeros((n, n)), 1, rng)
        assert np.linalg.norm(d) == pytest.approx(n / np.sqrt(3), rel=0.05)

    def test_index_must_be_positive(self):
        with pytest.raises(ConfigError):
            uniform_perturb(np.eye(2), 0)

    def test_policy_deterministic(self, rng):
        stats = random_class_stats(6, rng)
        a = PerturbPolicy(5).perturbed(stats, 3)
        b = PerturbPolicy(5).perturbed(stats, 3)
        c = PerturbPolicy(5).perturbed(stats, 4)
        assert np.array_equal(a.k1, b.k1) and not np.array_equal(a.k1, c.k1)


class TestSurrogate:
    def test_fixed_stats_gradient(self, rng):
        truth = random_class_stats(8, rng)
        other = random_class_stats(8, rng)
        x = random_point(8, 2, rng)
        orc = SurrogateStats(other)
        g, err = orc.gradient(neg_objective(truth), x, 0, reference=neg_objective(truth))
        assert np.array_equal(g, -jeffreys_grad_ambient(other, x))
        expected = project_tangent(x, g + jeffreys_grad_ambient(truth, x)).mat
        assert err == pytest.approx(np.linalg.norm(expected), rel=1e-12)

    def test_no_reference_no_error(self, rng):
        truth = random_class_stats(8, rng)
        _, err = SurrogateStats(truth).gradient(neg_objective(truth), random_point(8, 2, rng), 0)
        assert err is None

    def test_error_trend_decreases(self, rng):
        truth = random_class_stats(16, rng)
        obj = neg_objective(truth)
        x = random_point(16, 3, rng)
        early, late = [], []
        for seed in range(20):
            orc = SurrogateStats(truth, PerturbPolicy(seed))
            early.append(orc.gradient(obj, x, 0, reference=obj)[1])
            late.append(orc.gradient(obj, x, 99, reference=obj)[1])
        assert np.median(late) < np.median(early)

    def test_value_objective_tracks_draw(self, rng):
        truth = random_class_stats(8, rng)
        obj = neg_objective(truth)
        x = random_point(8, 2, rng)
        orc = SurrogateStats(truth, PerturbPolicy(2))
        with pytest.raises(OracleFailure):
            orc.value_objective(obj, 0)
        orc.gradient(obj, x, 4)
        drawn = PerturbPolicy(2).perturbed(truth, 5)
        assert orc.value_objective(obj, 4).value(x) == neg_objective(drawn).value(x)

    def test_retries_exhausted(self):
        # a channel that every draw leaves singular: huge negative diagonal
        k = -1e6 * np.eye(3)
        stats = ClassStats(k, k, check=False)
        x = random_point(3, 1, 0)
        orc = SurrogateStats(stats, PerturbPolicy(0))
        with pytest.raises(OracleFailure, match=str(MAX_RETRIES + 1)):
            orc.gradient(neg_objective(stats), x, 0)
