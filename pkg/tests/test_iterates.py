import numpy as np
import pytest
from scipy.optimize import minimize

from gordonse.iterates import (AlgorithmSpec, IterationError, RankDeficientError,
                               least_squares, run_trajectory, state_of, step)
from gordonse.models import (Algorithm, GroundTruth, ModelSpec, directional_init,
                             make_stream, sample_batch)

MODEL = {a: a.model.value for a in Algorithm}


def test_algorithm_spec_stepsize_rules():
    assert AlgorithmSpec("gd_pr").eta == 0.5
    assert AlgorithmSpec("am_pr").eta is None
    with pytest.raises(ValueError):
        AlgorithmSpec("am_pr", 0.5)
    with pytest.raises(ValueError):
        AlgorithmSpec("gd_pr", 0.0)


def test_state_of(rng):
    truth = GroundTruth.random(12, rng)
    th = directional_init(truth, 0.3, rng) * 2.0
    s = state_of(th, truth)
    assert s.alpha == pytest.approx(0.6) and s.beta == pytest.approx(2 * np.sqrt(0.91))
    assert state_of(-truth.theta_star, truth).beta == pytest.approx(0.0, abs=1e-15)


def test_least_squares_matches_reference(rng):
    X = rng.standard_normal((60, 7))
    b = rng.standard_normal(60)
    assert np.allclose(least_squares(X, b), np.linalg.lstsq(X, b, rcond=None)[0], atol=1e-12)


def test_least_squares_rejects_rank_deficiency(rng):
    X = rng.standard_normal((30, 4))
    X[:, 3] = X[:, 0]
    with pytest.raises(RankDeficientError) as info:
        least_squares(X, rng.standard_normal(30))
    assert info.value.condition > 1e12
    with pytest.raises(RankDeficientError):
        least_squares(rng.standard_normal((3, 5)), np.ones(3))


@pytest.mark.parametrize("alg", list(Algorithm))
def test_truth_is_a_noiseless_fixed_point(alg, rng):
    truth = GroundTruth.random(25, rng)
    batch = sample_batch(ModelSpec(MODEL[alg], 0.0, 25, 400), truth, rng)
    out = step(truth.theta_star, batch, AlgorithmSpec(alg))
    assert np.max(np.abs(out - truth.theta_star)) < 1e-10


@pytest.mark.parametrize("alg", list(Algorithm))
def test_steps_are_sign_equivariant(alg, rng):
    truth = GroundTruth.random(20, rng)
    batch = sample_batch(ModelSpec(MODEL[alg], 0.2, 20, 300), truth, rng)
    th = rng.standard_normal(20)
    a = AlgorithmSpec(alg)
    assert np.max(np.abs(step(-th, batch, a) + step(th, batch, a))) < 1e-12


def test_higher_order_step_minimizes_the_root_loss(rng):
    # minimizer of ||X c - w|| (no square) equals the least-squares solution
    truth = GroundTruth.random(6, rng)
    batch = sample_batch(ModelSpec("phase_retrieval", 0.1, 6, 80), truth, rng)
    th = rng.standard_normal(6)
    target = np.sign(batch.X @ th) * batch.y
    res = minimize(lambda c: np.linalg.norm(batch.X @ c - target), np.zeros(6),
                   method="BFGS", options={"gtol": 1e-10})
    assert np.allclose(step(th, batch, AlgorithmSpec("am_pr")), res.x, atol=1e-5)


def test_first_order_step_is_gradient_of_square_loss(rng):
    truth = GroundTruth.random(6, rng)
    batch = sample_batch(ModelSpec("phase_retrieval", 0.1, 6, 80), truth, rng)
    th = rng.standard_normal(6)
    loss = lambda c: np.mean((np.abs(batch.X @ c) - batch.y) ** 2)
    h = 1e-6
    grad = np.array([(loss(th + h * e) - loss(th - h * e)) / (2 * h) for e in np.eye(6)])
    assert np.allclose(step(th, batch, AlgorithmSpec("gd_pr", 0.3)), th - 0.3 * grad, atol=1e-7)


def test_trajectory_lengths_and_replay():
    spec = ModelSpec("mixture_of_regressions", 0.1, 30, 600, seed=4)
    truth = GroundTruth.basis(30)
    th0 = directional_init(truth, 0.7, make_stream(4, 99))
    with pytest.raises(ValueError):
        run_trajectory(spec, AlgorithmSpec("am_mlr"), th0, 0, truth)
    one = run_trajectory(spec, AlgorithmSpec("am_mlr"), th0, 1, truth)
    assert len(one) == 2
    a = run_trajectory(spec, AlgorithmSpec("am_mlr"), th0, 5, truth, trial=3)
    b = run_trajectory(spec, AlgorithmSpec("am_mlr"), th0, 5, truth, trial=3)
    c = run_trajectory(spec, AlgorithmSpec("am_mlr"), th0, 5, truth, trial=4)
    assert np.array_equal(a.thetas, b.thetas) and np.array_equal(a.d_l2, b.d_l2)
    assert not np.array_equal(a.thetas, c.thetas)
    assert a.states[0].alpha == pytest.approx(0.7)


def test_prefix_of_a_longer_run_is_the_shorter_run():
    spec = ModelSpec("phase_retrieval", 0.1, 20, 400, seed=8)
    truth = GroundTruth.basis(20)
    th0 = directional_init(truth, 0.5, make_stream(8, 99))
    short = run_trajectory(spec, AlgorithmSpec("gd_pr"), th0, 3, truth)
    long = run_trajectory(spec, AlgorithmSpec("gd_pr"), th0, 6, truth)
    assert np.array_equal(short.thetas, long.thetas[:4])


def test_step_errors_carry_the_iteration_index():
    spec = ModelSpec("phase_retrieval", 0.1, 20, 10)
    truth = GroundTruth.basis(20)
    with pytest.raises(IterationError) as info:
        run_trajectory(spec, AlgorithmSpec("am_pr"), truth.theta_star * 0.5, 3, truth)
    assert info.value.iteration == 1
    assert isinstance(info.value.cause, RankDeficientError)


@pytest.mark.parametrize("alg", list(Algorithm))
def test_noiseless_trajectory_from_truth_stays_put(alg):
    spec = ModelSpec(MODEL[alg], 0.0, 15, 200, seed=2)
    truth = GroundTruth.basis(15)
    rec = run_trajectory(spec, AlgorithmSpec(alg), truth.theta_star, 4, truth)
    assert np.max(rec.d_l2) < 1e-10
