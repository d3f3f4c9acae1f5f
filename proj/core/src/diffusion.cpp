#include "aniadapter/diffusion.hpp"

#include <cmath>

#include "aniadapter/error.hpp"

namespace aniadapter {

Mat random_normal_like(const Mat& shape_of, Rng& rng) {
    Mat out(shape_of.rows(), shape_of.cols());
    for (Eigen::Index r = 0; r < out.rows(); ++r)
        for (Eigen::Index c = 0; c < out.cols(); ++c) out(r, c) = rng.normal();
    return out;
}

Mat forward_diffuse(const Mat& x0, int t, const Mat& eps, const NoiseSchedule& schedule) {
    if (eps.rows() != x0.rows() || eps.cols() != x0.cols())
        throw DataError("forward_diffuse: eps shape differs from x0");
    double bar = schedule.alpha_bar(t);
    return std::sqrt(bar) * x0 + std::sqrt(1.0 - bar) * eps;
}

Mat forward_diffuse(const Mat& x0, int t, const NoiseSchedule& schedule, Rng& rng) {
    return forward_diffuse(x0, t, random_normal_like(x0, rng), schedule);
}

Mat ddpm_step(const Mat& x_t, const Mat& eps_hat, int t, const NoiseSchedule& schedule,
              const Mat& z) {
    if (eps_hat.rows() != x_t.rows() || eps_hat.cols() != x_t.cols())
        throw DataError("ddpm_step: eps_hat shape differs from x_t");
    if (z.rows() != x_t.rows() || z.cols() != x_t.cols())
        throw DataError("ddpm_step: z shape differs from x_t");
    double a = schedule.alpha(t);
    double bar = schedule.alpha_bar(t);
    Mat mean = (x_t - schedule.beta(t) / std::sqrt(1.0 - bar) * eps_hat) / std::sqrt(a);
    return mean + schedule.sigma(t) * z;
}

Mat ddpm_step(const Mat& x_t, const Mat& eps_hat, int t, const NoiseSchedule& schedule,
              Rng& rng) {
    return ddpm_step(x_t, eps_hat, t, schedule, random_normal_like(x_t, rng));
}

Mat predict_x0(const Mat& x_t, const Mat& eps_hat, int t, const NoiseSchedule& schedule) {
    double bar = schedule.alpha_bar(t);
    return (x_t - std::sqrt(1.0 - bar) * eps_hat) / std::sqrt(bar);
}

Mat ddim_step(const Mat& x_t, const Mat& eps_hat, int t, const NoiseSchedule& schedule) {
    if (eps_hat.rows() != x_t.rows() || eps_hat.cols() != x_t.cols())
        throw DataError("ddim_step: eps_hat shape differs from x_t");
    Mat x0 = predict_x0(x_t, eps_hat, t, schedule);
    double prev = schedule.alpha_bar_prev(t);
    return std::sqrt(prev) * x0 + std::sqrt(1.0 - prev) * eps_hat;
}

double training_loss(const Mat& eps, const Mat& eps_hat) {
    if (eps.rows() != eps_hat.rows() || eps.cols() != eps_hat.cols())
        throw DataError("training_loss: shape mismatch");
    return (eps - eps_hat).squaredNorm() / double(eps.size());
}

Mat cfg_combine(const Mat& eps_cond, const Mat& eps_uncond, double w) {
    if (eps_cond.rows() != eps_uncond.rows() || eps_cond.cols() != eps_uncond.cols())
        throw DataError("cfg_combine: shape mismatch");
    return w * eps_cond + (1.0 - w) * eps_uncond;
}

}  // namespace aniadapter
