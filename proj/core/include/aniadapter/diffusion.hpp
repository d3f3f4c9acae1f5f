#pragma once

#include "aniadapter/linalg.hpp"
#include "aniadapter/rng.hpp"
#include "aniadapter/schedule.hpp"

namespace aniadapter {

// x_t = sqrt(abar_t) x0 + sqrt(1 - abar_t) eps
Mat forward_diffuse(const Mat& x0, int t, const Mat& eps, const NoiseSchedule& schedule);
Mat forward_diffuse(const Mat& x0, int t, const NoiseSchedule& schedule, Rng& rng);

// x_{t-1} = (x_t - beta_t/sqrt(1-abar_t) eps_hat)/sqrt(alpha_t) + sigma_t z;
// sigma_1 is 0 so the last step is deterministic.
Mat ddpm_step(const Mat& x_t, const Mat& eps_hat, int t, const NoiseSchedule& schedule,
              const Mat& z);
Mat ddpm_step(const Mat& x_t, const Mat& eps_hat, int t, const NoiseSchedule& schedule, Rng& rng);

// Deterministic stepper (eta = 0): moves to t-1 along the predicted-x0 ray.
Mat ddim_step(const Mat& x_t, const Mat& eps_hat, int t, const NoiseSchedule& schedule);

// Predicted clean sample (x_t - sqrt(1-abar_t) eps_hat)/sqrt(abar_t).
Mat predict_x0(const Mat& x_t, const Mat& eps_hat, int t, const NoiseSchedule& schedule);

// Mean squared error over all elements.
double training_loss(const Mat& eps, const Mat& eps_hat);

// w * eps_cond + (1 - w) * eps_uncond
Mat cfg_combine(const Mat& eps_cond, const Mat& eps_uncond, double w);

Mat random_normal_like(const Mat& shape_of, Rng& rng);

}  // namespace aniadapter
