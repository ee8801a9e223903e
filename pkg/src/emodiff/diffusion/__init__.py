"""Diffusion mathematics: schedules, posteriors, losses and sampling."""
from .gaussian import (
    ReverseStepDistribution,
    VarianceMode,
    p_mean_variance,
    predict_x0_from_eps,
    q_mean_variance,
    q_posterior,
    q_sample,
)
from .losses import LossMode, hybrid_loss, loss_terms, normal_kl, vlb_term
from .sampling import sample_loop
from .schedule import (
    NoiseSchedule,
    StridedSchedule,
    load_schedule,
    make_cosine_schedule,
    make_linear_schedule,
    make_schedule,
    make_schedule_from_timesteps,
    make_strided_schedule,
    save_schedule,
)

__all__ = [
    'ReverseStepDistribution',
    'VarianceMode',
    'p_mean_variance',
    'predict_x0_from_eps',
    'q_mean_variance',
    'q_posterior',
    'q_sample',
    'LossMode',
    'hybrid_loss',
    'loss_terms',
    'normal_kl',
    'vlb_term',
    'sample_loop',
    'NoiseSchedule',
    'StridedSchedule',
    'load_schedule',
    'make_cosine_schedule',
    'make_linear_schedule',
    'make_schedule',
    'make_schedule_from_timesteps',
    'make_strided_schedule',
    'save_schedule',
]
