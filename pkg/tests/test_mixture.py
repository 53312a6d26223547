import numpy as np
import pytest
from hypothesis import given, strategies as st

from oracles import fd_grad, gmm_em_update, gmm_loglik_direct, gmm_responsibilities
from kullprox import PreconditionError
from kullprox.models import GaussianMixtureModel, gmm_em_step, gmm_problem, gmm_sample


def _random_theta(rng, K):
    w = rng.dirichlet(np.ones(K))
    return np.concatenate((w[:-1], rng.uniform(-3, 3, K)))


@pytest.fixture
def model3():
    return GaussianMixtureModel(gmm_sample(40, [0.2, 0.3, 0.5], [-2.0, 0.0, 3.0], 0.7, seed=8),
                                n_components=3, known_variance=0.7)


def test_empty_data_is_a_precondition_error():
    with pytest.raises(PreconditionError):
        GaussianMixtureModel([])


@pytest.mark.parametrize("kwargs", [dict(n_components=0), dict(known_variance=0.0)])
def test_model_validation(kwargs):
    with pytest.raises(ValueError):
        GaussianMixtureModel([1.0, 2.0], **kwargs)


def test_parameter_layout(model3):
    assert model3.dimension == 5
    assert model3.param_names() == ("w_1", "w_2", "mu_1", "mu_2", "mu_3")
    th = model3.pack([0.2, 0.3, 0.5], [1.0, 2.0, 3.0])
    w, mu = model3.split(th)
    np.testing.assert_allclose(w, [0.2, 0.3, 0.5])
    np.testing.assert_array_equal(mu, [1.0, 2.0, 3.0])


def test_initial_point_is_feasible(model3):
    th = model3.initial_point()
    assert model3.domain_guard(th)
    w, mu = model3.split(th)
    np.testing.assert_allclose(w, 1 / 3)
    assert np.all(np.diff(mu) > 0)


def test_guard_rejects_invalid_weights(model3):
    assert not model3.domain_guard(model3.pack([0.5, 0.5, 0.0], [0, 0, 0]))
    assert not model3.domain_guard(np.array([0.6, 0.5, 0.0, 0.0, 0.0]))
    assert not model3.domain_guard(np.array([0.3, 0.3, np.nan, 0.0, 0.0]))
    batch = model3.domain_guard(np.array([[0.3, 0.3, 0, 0, 0], [0.7, 0.3, 0, 0, 0]]))
    np.testing.assert_array_equal(batch, [True, False])


def test_loglik_and_responsibilities_match_oracle(model3):
    rng = np.random.default_rng(1)
    for _ in range(10):
        th = _random_theta(rng, 3)
        w, mu = model3.split(th)
        ref = gmm_loglik_direct(model3.data, w, mu, 0.7)
        assert model3.loglik(th) == pytest.approx(ref, rel=1e-12)
        np.testing.assert_allclose(model3.responsibilities(th),
                                   gmm_responsibilities(model3.data, w, mu, 0.7), rtol=1e-12)


def test_far_outliers_do_not_underflow():
    model = GaussianMixtureModel([-60.0, 60.0])
    th = model.pack([0.5, 0.5], [0.0, 1.0])
    assert np.isfinite(model.loglik(th))
    np.testing.assert_allclose(model.responsibilities(th).sum(axis=1), 1.0)


def test_em_step_matches_oracle(model3):
    rng = np.random.default_rng(2)
    th = _random_theta(rng, 3)
    w, mu = model3.split(th)
    ref_w, ref_mu = gmm_em_update(model3.data, w, mu, 0.7)
    new_w, new_mu = model3.split(gmm_em_step(model3, th))
    np.testing.assert_allclose(new_w, ref_w, rtol=1e-12)
    np.testing.assert_allclose(new_mu, ref_mu, rtol=1e-12)


def test_symmetric_data_keeps_symmetric_means():
    x = np.array([-3.0, -1.0, -0.5, 0.5, 1.0, 3.0])
    model = GaussianMixtureModel(x)
    th = model.pack([0.5, 0.5], [-1.0, 1.0])
    for _ in range(5):
        th = gmm_em_step(model, th)
        w, mu = model.split(th)
        assert mu[0] == pytest.approx(-mu[1], abs=1e-14)
        assert w[0] == pytest.approx(0.5, abs=1e-14)


def test_one_component_update_is_sample_mean():
    x = gmm_sample(25, [1.0], [2.0], 1.0, seed=0)
    model = GaussianMixtureModel(x, n_components=1)
    th = gmm_em_step(model, np.array([-5.0]))
    assert th[0] == pytest.approx(x.mean(), rel=1e-14)


def test_loglik_gradient_matches_differences(model3):
    rng = np.random.default_rng(3)
    for _ in range(20):
        th = _random_theta(rng, 3)
        fd = np.array(fd_grad(lambda v: model3.loglik(np.array(v)), th))
        assert np.linalg.norm(model3.loglik_grad(th) - fd) <= 1e-6 * np.linalg.norm(fd)


def test_responsibility_jacobian_matches_differences(model3):
    div = model3.divergence()
    block = div.blocks[0]
    rng = np.random.default_rng(4)
    th = _random_theta(rng, 3)
    jac = block.jacobian(th)
    n = model3.data.size * 3
    assert jac.shape == (n, 5)
    for d in range(5):
        h = 1e-6
        up, down = th.copy(), th.copy()
        up[d] += h
        down[d] -= h
        col = (block.statistics(up) - block.statistics(down)) / (2 * h)
        np.testing.assert_allclose(jac[:, d], col, atol=1e-7)


@given(seed=st.integers(0, 2 ** 32 - 1))
def test_em_decomposition(seed):
    model = GaussianMixtureModel(gmm_sample(15, [0.5, 0.5], [-1.0, 1.0], 1.0, seed=seed % 1000))
    rng = np.random.default_rng(seed)
    th, tb = _random_theta(rng, 2), _random_theta(rng, 2)
    lhs = model.loglik(th) - model.loglik(tb)
    rhs = model.q_function(th, tb) - model.q_function(tb, tb) + model.divergence().evaluate(th, tb)
    assert lhs == pytest.approx(rhs, abs=1e-8)


def test_problem_bundle(model3):
    problem = gmm_problem(model3)
    th = model3.initial_point()
    assert problem.dimension == 5
    assert problem.loglik(th) == model3.loglik(th)
    assert problem.divergence.n_terms == model3.data.size * 3


def test_sampler_is_deterministic():
    np.testing.assert_array_equal(gmm_sample(10, [0.5, 0.5], [0, 1], 1.0, seed=3),
                                  gmm_sample(10, [0.5, 0.5], [0, 1], 1.0, seed=3))
