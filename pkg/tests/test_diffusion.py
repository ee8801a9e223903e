"""
Tests for the diffusion core: schedules, closed-form Gaussians, the hybrid
objective and ancestral sampling.
"""
import math

import numpy as np
import pytest

from emodiff.autodiff.tensor import Tensor
from emodiff.diffusion.gaussian import (
    ReverseStepDistribution,
    p_mean_variance,
    predict_x0_from_eps,
    q_posterior,
    q_sample,
)
from emodiff.diffusion.losses import LossMode, loss_terms, vlb_term
from emodiff.diffusion.sampling import sample_loop
from emodiff.diffusion.schedule import (
    StridedSchedule,
    load_schedule,
    make_cosine_schedule,
    make_linear_schedule,
    make_schedule,
    make_strided_schedule,
    save_schedule,
)
from emodiff.errors import ConfigError, NonFiniteError


def cosine_reference(T, s=0.008):
    f = [math.cos(((t / T + s) / (1 + s)) * math.pi / 2) ** 2 for t in range(T + 1)]
    alpha_bar = [value / f[0] for value in f]
    betas = [min(1 - alpha_bar[t] / alpha_bar[t - 1], 0.999) for t in range(1, T + 1)]
    return alpha_bar, betas


def test_cosine_schedule_matches_formula():
    schedule = make_cosine_schedule(10)
    alpha_bar, betas = cosine_reference(10)
    assert schedule.alpha_bar[0] == 1.0
    np.testing.assert_allclose(schedule.betas[1:], betas, rtol=0, atol=1e-12)
    # The last step is clipped, so only the unclipped prefix follows f(t)/f(0).
    np.testing.assert_allclose(schedule.alpha_bar[:10], alpha_bar[:10], rtol=0, atol=1e-12)


@pytest.mark.parametrize("T", [10, 100, 4000])
def test_cosine_betas_clipped(T):
    schedule = make_cosine_schedule(T)
    assert schedule.betas[1:].max() <= 0.999
    assert np.all(np.diff(schedule.alpha_bar) < 0)


@pytest.mark.parametrize("kind", ["cosine", "linear"])
def test_schedule_invariants(kind):
    schedule = make_schedule(kind, 50)
    np.testing.assert_allclose(schedule.alpha_bar[1:], schedule.alpha_bar[:-1] * schedule.alphas[1:], rtol=1e-14)
    assert schedule.beta_tilde[1] == 0.0
    assert np.all(np.isfinite(schedule.betas))
    assert schedule.num_steps == 50


def test_schedule_errors():
    with pytest.raises(ValueError):
        make_cosine_schedule(0)
    with pytest.raises(ValueError):
        make_linear_schedule(10, beta_start=0.3, beta_end=0.1)
    with pytest.raises(ConfigError):
        make_schedule("quadratic", 10)


def test_linear_schedule_values():
    np.testing.assert_allclose(make_linear_schedule(3, 0.1, 0.3).betas[1:], [0.1, 0.2, 0.3])
    assert make_linear_schedule(1, 1e-4, 0.02).betas[1] == pytest.approx(1e-4)


def test_q_sample_without_noise(f64, rng):
    schedule = make_cosine_schedule(20)
    x0 = rng.uniform(-1, 1, (2, 3, 4))
    out = q_sample(x0, 7, np.zeros_like(x0), schedule)
    np.testing.assert_allclose(out.data, schedule.sqrt_alpha_bar[7] * x0)


def test_q_sample_rejects_bad_timesteps(f64):
    schedule = make_cosine_schedule(5)
    x0 = np.zeros((1, 2))
    for t in (0, 6, np.array([1, 9])):
        with pytest.raises(ValueError):
            q_sample(x0, t, x0, schedule)


def test_q_sample_per_example_timesteps(f64, rng):
    schedule = make_cosine_schedule(20)
    x0 = rng.uniform(-1, 1, (3, 2, 5))
    eps = rng.standard_normal((3, 2, 5))
    t = np.array([1, 10, 20])
    batched = q_sample(x0, t, eps, schedule).data
    for i, step in enumerate(t):
        np.testing.assert_allclose(batched[i], q_sample(x0[i], int(step), eps[i], schedule).data)


def test_q_sample_matches_sequential_noising():
    schedule = make_cosine_schedule(50)
    rng = np.random.default_rng(0)
    n, t, x0 = 100_000, 20, 0.5
    sequential = np.full(n, x0)
    for step in range(1, t + 1):
        sequential = np.sqrt(schedule.alphas[step]) * sequential + np.sqrt(schedule.betas[step]) * rng.standard_normal(n)
    mean = schedule.sqrt_alpha_bar[t] * x0
    variance = 1 - schedule.alpha_bar[t]
    assert sequential.mean() == pytest.approx(mean, abs=0.015)
    assert sequential.var() == pytest.approx(variance, rel=0.02)


def test_posterior_at_first_step(f64, rng):
    schedule = make_cosine_schedule(30)
    x0 = rng.uniform(-1, 1, (2, 4))
    xt = rng.standard_normal((2, 4))
    mean, variance = q_posterior(x0, xt, 1, schedule)
    assert float(variance) == 0.0
    np.testing.assert_allclose(mean.data, x0, rtol=1e-9, atol=1e-12)


def test_predict_x0_inverts_q_sample(f64, rng):
    schedule = make_cosine_schedule(40)
    x0 = rng.uniform(-1, 1, (8, 8))
    eps = rng.standard_normal((8, 8))
    xt = q_sample(x0, 13, eps, schedule)
    np.testing.assert_allclose(predict_x0_from_eps(xt, 13, eps, schedule, clip=False).data, x0, atol=1e-12)
    zero = predict_x0_from_eps(xt, 13, np.zeros_like(eps), schedule).data
    np.testing.assert_allclose(zero, np.clip(xt.data / schedule.sqrt_alpha_bar[13], -1, 1), atol=1e-12)


@pytest.mark.parametrize("t", [1, 2, 25, 50])
def test_p_mean_with_true_noise_is_posterior_mean(f64, rng, t):
    schedule = make_cosine_schedule(50)
    x0 = rng.uniform(-1, 1, (2, 3, 6))
    eps = rng.standard_normal((2, 3, 6))
    xt = q_sample(x0, t, eps, schedule)
    dist = p_mean_variance(eps, np.zeros_like(eps), xt, t, schedule)
    expected, _ = q_posterior(x0, xt, t, schedule)
    np.testing.assert_allclose(dist.mean.data, expected.data, atol=1e-9)


def test_variance_interpolation_endpoints(f64, rng):
    schedule = make_cosine_schedule(50)
    xt = rng.standard_normal((2, 4))
    eps = rng.standard_normal((2, 4))
    small = p_mean_variance(eps, np.zeros((2, 4)), xt, 5, schedule)
    large = p_mean_variance(eps, np.ones((2, 4)), xt, 5, schedule)
    np.testing.assert_allclose(small.variance, schedule.beta_tilde[5], rtol=1e-12)
    np.testing.assert_allclose(large.variance, schedule.betas[5], rtol=1e-12)
    v = rng.uniform(0, 1, (2, 4))
    log_variance = p_mean_variance(eps, v, xt, 5, schedule).log_variance.data
    assert np.all(log_variance >= schedule.log_beta_tilde_clipped[5] - 1e-12)
    assert np.all(log_variance <= schedule.log_beta[5] + 1e-12)


def test_fixed_variance_modes_ignore_v(f64, rng):
    schedule = make_cosine_schedule(50)
    xt = rng.standard_normal((2, 4))
    eps = rng.standard_normal((2, 4))
    small = p_mean_variance(eps, np.zeros((2, 4)), xt, 9, schedule, "fixed_small")
    large = p_mean_variance(eps, np.ones((2, 4)), xt, 9, schedule, "fixed_large")
    np.testing.assert_allclose(small.variance, schedule.beta_tilde[9], rtol=1e-12)
    np.testing.assert_allclose(large.variance, schedule.betas[9], rtol=1e-12)


def test_vlb_of_true_posterior_vanishes(f64, rng):
    schedule = make_cosine_schedule(50)
    x0 = rng.uniform(-1, 1, (2, 3, 4))
    eps = rng.standard_normal((2, 3, 4))
    for t in range(2, 51):
        xt = q_sample(x0, t, eps, schedule)
        mean, _ = q_posterior(x0, xt, t, schedule)
        log_variance = Tensor(np.full(x0.shape, schedule.log_beta_tilde_clipped[t]))
        assert vlb_term(ReverseStepDistribution(mean, log_variance), x0, xt, t, schedule).item() < 1e-8


def test_vlb_first_step_is_positive_nll(f64, rng):
    schedule = make_cosine_schedule(50)
    x0 = rng.uniform(-1, 1, (2, 4))
    eps = rng.standard_normal((2, 4))
    xt = q_sample(x0, 1, eps, schedule)
    dist = p_mean_variance(eps, np.zeros_like(eps), xt, 1, schedule)
    assert vlb_term(dist, x0, xt, 1, schedule).item() > 0


def test_hybrid_loss_zero_at_optimum(f64, rng):
    schedule = make_cosine_schedule(50)
    x0 = rng.uniform(-1, 1, (2, 3, 4))
    eps = rng.standard_normal((2, 3, 4))
    t = np.array([5, 30])
    xt = q_sample(x0, t, eps, schedule)
    terms = loss_terms(eps, np.zeros_like(eps), eps, x0, xt, t, schedule)
    assert terms.total.item() == pytest.approx(0.0, abs=1e-8)


def test_simple_loss_of_constant_offset(f64, rng):
    schedule = make_cosine_schedule(50)
    x0 = rng.uniform(-1, 1, (2, 3, 4))
    eps = rng.standard_normal((2, 3, 4))
    xt = q_sample(x0, 10, eps, schedule)
    terms = loss_terms(eps + 1.0, np.full_like(eps, 0.5), eps, x0, xt, 10, schedule)
    assert terms.simple.item() == pytest.approx(1.0, abs=1e-12)
    assert terms.total.item() == pytest.approx(1.0 + 0.001 * terms.vlb.item(), abs=1e-12)
    simple_only = loss_terms(eps + 1.0, None, eps, x0, xt, 10, schedule, mode=LossMode.SIMPLE.value)
    assert simple_only.vlb.item() == 0.0


def test_hybrid_loss_trains_variance_head_only_through_vlb(f64, rng):
    schedule = make_cosine_schedule(50)
    x0 = rng.uniform(-1, 1, (1, 2, 3))
    eps = rng.standard_normal((1, 2, 3))
    xt = q_sample(x0, 12, eps, schedule)
    eps_hat = Tensor(eps + 0.1, requires_grad=True)
    v = Tensor(np.full((1, 2, 3), 0.3), requires_grad=True)
    terms = loss_terms(eps_hat, v, eps, x0, xt, 12, schedule)
    terms.vlb.backward()
    assert eps_hat.grad is None or not np.any(eps_hat.grad)
    assert np.any(v.grad)


def test_strided_identity():
    parent = make_cosine_schedule(30)
    strided = make_strided_schedule(parent, 30)
    np.testing.assert_array_equal(strided.tau, np.arange(31))
    np.testing.assert_array_equal(strided.betas, parent.betas)
    np.testing.assert_array_equal(strided.alpha_bar, parent.alpha_bar)


def test_strided_spacing():
    parent = make_cosine_schedule(4000)
    strided = make_strided_schedule(parent, 100)
    assert strided.tau[-1] == 4000
    assert set(np.diff(strided.tau[1:]).tolist()) == {40}
    np.testing.assert_array_equal(strided.alpha_bar, parent.alpha_bar[strided.tau])
    assert strided.header() == {"kind": "cosine", "T": 4000, "S": 100}
    with pytest.raises(ValueError):
        make_strided_schedule(parent, 4001)


def test_schedule_persistence(tmp_path):
    strided = make_strided_schedule(make_cosine_schedule(40), 8)
    save_schedule(tmp_path / "sched", strided)
    loaded = load_schedule(tmp_path / "sched")
    assert isinstance(loaded, StridedSchedule)
    np.testing.assert_array_equal(loaded.tau, strided.tau)
    np.testing.assert_array_equal(loaded.betas, strided.betas)


def zero_denoiser(x, t, cond):
    return Tensor(np.zeros(x.shape)), Tensor(np.zeros(x.shape))


def scaled_denoiser(x, t, cond):
    scale = (t / 100.0).reshape(-1, 1, 1)
    return Tensor(0.1 * x.data * scale), Tensor(np.full(x.shape, 0.5))


def test_single_step_sampling_returns_clamped_mean(f64):
    schedule = make_linear_schedule(1, 0.1, 0.1)
    out = sample_loop(zero_denoiser, np.zeros((2, 1)), schedule, seed=5, shape=(2, 3, 4))
    start = np.random.default_rng(5).standard_normal((2, 3, 4))
    np.testing.assert_allclose(out, np.clip(start / math.sqrt(0.9), -1, 1), atol=1e-12)


def test_sampling_is_deterministic(f64):
    schedule = make_cosine_schedule(20)
    cond = np.zeros((2, 1))
    first = sample_loop(scaled_denoiser, cond, schedule, seed=11, shape=(2, 3, 8))
    second = sample_loop(scaled_denoiser, cond, schedule, seed=11, shape=(2, 3, 8))
    other = sample_loop(scaled_denoiser, cond, schedule, seed=12, shape=(2, 3, 8))
    np.testing.assert_array_equal(first, second)
    assert not np.array_equal(first, other)
    assert first.min() >= -1 and first.max() <= 1


def test_strided_full_length_matches_unstrided(f64):
    parent = make_cosine_schedule(25)
    cond = np.zeros((1, 1))
    full = sample_loop(scaled_denoiser, cond, parent, seed=3, shape=(3, 6))
    strided = sample_loop(scaled_denoiser, cond, make_strided_schedule(parent, 25), seed=3, shape=(3, 6))
    assert full.shape == (3, 6)
    np.testing.assert_array_equal(full, strided)


def test_sampling_aborts_on_non_finite(f64):
    def broken(x, t, cond):
        return Tensor(np.full(x.shape, np.nan)), Tensor(np.zeros(x.shape))

    with pytest.raises(NonFiniteError) as excinfo:
        sample_loop(broken, np.zeros((1, 1)), make_cosine_schedule(10), seed=0, shape=(1, 2, 3))
    assert excinfo.value.step == 10
