#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "aniadapter/diffusion.hpp"
#include "aniadapter/error.hpp"

using namespace aniadapter;

namespace {

Mat colvec(std::initializer_list<double> v) {
    Mat m(Eigen::Index(v.size()), 1);
    Eigen::Index i = 0;
    for (double x : v) m(i++, 0) = x;
    return m;
}

// Handcrafted rows exercise the alpha_bar extremes that real constructors
// refuse to build.
NoiseSchedule crafted() {
    return NoiseSchedule::from_text(
        "T 3\n"
        "1 0.99 1 0\n"     // alpha_bar = 1: noiseless
        "2 0.5 0 0.1\n"    // alpha_bar = 0: pure noise
        "3 0.8 0.64 0.2\n");
}

}  // namespace

TEST_CASE("schedule invariants") {
    NoiseSchedule lin = NoiseSchedule::linear(1000, 1e-4, 0.02);
    CHECK(lin.T() == 1000);
    double prev = 1.0;
    for (int t = 1; t <= lin.T(); ++t) {
        CHECK(lin.alpha(t) > 0.0);
        CHECK(lin.alpha(t) < 1.0);
        CHECK(lin.beta(t) == doctest::Approx(1.0 - lin.alpha(t)).epsilon(1e-15));
        CHECK(lin.alpha_bar(t) < prev);  // strictly decreasing
        prev = lin.alpha_bar(t);
    }
    CHECK(lin.alpha_bar(lin.T()) < 1e-3);
    CHECK(lin.sigma(1) == 0.0);
    CHECK(lin.sigma(2) == doctest::Approx(std::sqrt(lin.beta(2))).epsilon(1e-15));

    NoiseSchedule geo = NoiseSchedule::geometric(10, 0.5);
    CHECK(geo.T() == 10);
    for (int t = 1; t <= 10; ++t)
        CHECK(geo.alpha_bar(t) == doctest::Approx(std::pow(0.5, t)).epsilon(1e-12));
    CHECK(geo.alpha_bar(10) < 1e-3);
    CHECK(geo.alpha_bar_prev(1) == 1.0);
    CHECK(geo.alpha_bar_prev(5) == geo.alpha_bar(4));

    CHECK_THROWS_AS(NoiseSchedule::geometric(10, 1.5), DataError);
    CHECK_THROWS_AS(NoiseSchedule::linear(0), DataError);
    CHECK_THROWS_AS(lin.alpha(0), DataError);
    CHECK_THROWS_AS(lin.alpha(1001), DataError);
}

TEST_CASE("posterior sigma option") {
    NoiseSchedule s = NoiseSchedule::geometric(10, 0.5, SigmaKind::posterior);
    CHECK(s.sigma(1) == 0.0);
    for (int t = 2; t <= 10; ++t) {
        double want = std::sqrt((1.0 - s.alpha_bar_prev(t)) / (1.0 - s.alpha_bar(t)) * s.beta(t));
        CHECK(s.sigma(t) == doctest::Approx(want).epsilon(1e-15));
    }
}

TEST_CASE("schedule serialization round-trips") {
    namespace fs = std::filesystem;
    NoiseSchedule s = NoiseSchedule::linear(50, 1e-4, 0.02);
    NoiseSchedule back = NoiseSchedule::from_text(s.to_text());
    REQUIRE(back.T() == s.T());
    for (int t = 1; t <= s.T(); ++t) {
        CHECK(back.alpha(t) == s.alpha(t));  // %.17g keeps doubles exact
        CHECK(back.alpha_bar(t) == s.alpha_bar(t));
        CHECK(back.sigma(t) == s.sigma(t));
    }

    fs::path p = fs::temp_directory_path() / "aniadapter_schedule.txt";
    s.save(p.string());
    NoiseSchedule loaded = NoiseSchedule::load(p.string());
    CHECK(loaded.to_text() == s.to_text());
    fs::remove(p);

    CHECK_THROWS_AS(NoiseSchedule::from_text(""), DataError);
    CHECK_THROWS_AS(NoiseSchedule::from_text("T 2\n1 0.5 0.5 0\n"), DataError);  // row count
    CHECK_THROWS_AS(NoiseSchedule::from_text("2 0.5 0.5 0\n"), DataError);       // order
}

TEST_CASE("forward diffusion endpoints and inversion") {
    NoiseSchedule s = crafted();
    Mat x0 = colvec({0.5, -1.25, 2.0});
    Mat eps = colvec({1.0, 0.25, -0.5});

    CHECK((forward_diffuse(x0, 1, eps, s) - x0).cwiseAbs().maxCoeff() == 0.0);   // abar = 1
    CHECK((forward_diffuse(x0, 2, eps, s) - eps).cwiseAbs().maxCoeff() == 0.0);  // abar = 0

    // abar = 0.64: x_t = 0.8 x0 + 0.6 eps, invertible in closed form
    Mat x_t = forward_diffuse(x0, 3, eps, s);
    CHECK((x_t - (0.8 * x0 + 0.6 * eps)).cwiseAbs().maxCoeff() <= 1e-15);
    Mat recovered = (x_t - 0.6 * eps) / 0.8;
    CHECK((recovered - x0).cwiseAbs().maxCoeff() <= 1e-10);
    // predict_x0 is that inversion
    CHECK((predict_x0(x_t, eps, 3, s) - x0).cwiseAbs().maxCoeff() <= 1e-10);

    CHECK_THROWS_AS(forward_diffuse(x0, 0, eps, s), DataError);
    CHECK_THROWS_AS(forward_diffuse(x0, 4, eps, s), DataError);
    CHECK_THROWS_AS(forward_diffuse(x0, 1, colvec({1.0}), s), DataError);
}

TEST_CASE("ddpm step") {
    NoiseSchedule s = NoiseSchedule::geometric(10, 0.5);
    Rng rng(1);
    Mat x0 = random_matrix(rng, 4, 3);
    Mat eps = random_matrix(rng, 4, 3);
    Mat zero = Mat::Zero(4, 3);

    // t=1 with the true noise recovers x0; sigma_1 = 0 ignores z
    Mat x1 = forward_diffuse(x0, 1, eps, s);
    Mat z_any = random_matrix(rng, 4, 3);
    CHECK((ddpm_step(x1, eps, 1, s, z_any) - x0).cwiseAbs().maxCoeff() <= 1e-10);

    // z=0 is deterministic
    Mat x5 = forward_diffuse(x0, 5, eps, s);
    CHECK((ddpm_step(x5, eps, 5, s, zero) - ddpm_step(x5, eps, 5, s, zero)).cwiseAbs().maxCoeff() ==
          0.0);

    // zeros map to zeros
    CHECK(ddpm_step(zero, zero, 5, s, zero).cwiseAbs().maxCoeff() == 0.0);

    // the rng overload is reproducible from the seed
    Rng ra(9), rb(9);
    CHECK((ddpm_step(x5, eps, 5, s, ra) - ddpm_step(x5, eps, 5, s, rb)).cwiseAbs().maxCoeff() ==
          0.0);

    CHECK_THROWS_AS(ddpm_step(x5, eps, 0, s, zero), DataError);
    CHECK_THROWS_AS(ddpm_step(x5, colvec({1.0}), 5, s, zero), DataError);
}

TEST_CASE("ddim step is the predicted-x0 ray") {
    NoiseSchedule s = NoiseSchedule::geometric(10, 0.5);
    Rng rng(2);
    Mat x0 = random_matrix(rng, 3, 3);
    Mat eps = random_matrix(rng, 3, 3);
    Mat x4 = forward_diffuse(x0, 4, eps, s);
    Mat stepped = ddim_step(x4, eps, 4, s);
    // with the true eps the step lands on the forward expression at t-1
    CHECK((stepped - forward_diffuse(x0, 3, eps, s)).cwiseAbs().maxCoeff() <= 1e-12);
    // t=1 goes all the way to the prediction (alpha_bar_prev = 1)
    Mat x1 = forward_diffuse(x0, 1, eps, s);
    CHECK((ddim_step(x1, eps, 1, s) - predict_x0(x1, eps, 1, s)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("training loss") {
    Mat a = colvec({1, 1, 1, 1});
    CHECK(training_loss(a, a) == 0.0);
    CHECK(training_loss(a, Mat::Zero(4, 1)) == 1.0);

    Rng rng(3);
    Mat eps = random_matrix(rng, 5, 4);
    Mat eps_hat = random_matrix(rng, 5, 4);
    double acc = 0;
    for (Eigen::Index r = 0; r < 5; ++r)
        for (Eigen::Index c = 0; c < 4; ++c) {
            double d = eps(r, c) - eps_hat(r, c);
            acc += d * d;
        }
    CHECK(training_loss(eps, eps_hat) == doctest::Approx(acc / 20.0).epsilon(1e-12));

    CHECK_THROWS_AS(training_loss(a, Mat::Zero(3, 1)), DataError);
}

TEST_CASE("cfg combination") {
    Rng rng(4);
    Mat c = random_matrix(rng, 3, 2);
    Mat u = random_matrix(rng, 3, 2);
    CHECK((cfg_combine(c, u, 1.0) - c).cwiseAbs().maxCoeff() == 0.0);
    CHECK((cfg_combine(c, u, 0.0) - u).cwiseAbs().maxCoeff() == 0.0);
    CHECK((cfg_combine(c, c, 7.5) - c).cwiseAbs().maxCoeff() <= 1e-12);

    // affine in w: midpoint of two guidance weights equals guidance at midpoint
    Mat lhs = 0.5 * (cfg_combine(c, u, 2.0) + cfg_combine(c, u, 6.0));
    CHECK((lhs - cfg_combine(c, u, 4.0)).cwiseAbs().maxCoeff() <= 1e-12);

    CHECK_THROWS_AS(cfg_combine(c, Mat::Zero(2, 2), 1.0), DataError);
}

TEST_CASE("variance statistic over many draws") {
    // unit-variance x0 and eps keep x_t at unit variance for every t
    NoiseSchedule s = NoiseSchedule::geometric(10, 0.5);
    const int n = 100000;
    Rng rng(20260823);
    Mat x0(1, 1), eps(1, 1);
    double sum = 0, sumsq = 0;
    for (int i = 0; i < n; ++i) {
        x0(0, 0) = rng.normal();
        eps(0, 0) = rng.normal();
        double xt = forward_diffuse(x0, 6, eps, s)(0, 0);
        sum += xt;
        sumsq += xt * xt;
    }
    double mean = sum / n;
    double var = sumsq / n - mean * mean;
    double se3 = 3.0 * std::sqrt(2.0 / (n - 1));  // 3 standard errors of a variance estimate
    CHECK(std::abs(var - 1.0) < se3);
}

TEST_CASE("oracle-denoiser chains reconstruct x0") {
    NoiseSchedule s = NoiseSchedule::geometric(10, 0.5);
    Rng rng(5);
    Mat x0 = random_matrix(rng, 6, 4);
    Mat eps0 = random_matrix(rng, 6, 4);
    // a denoiser that always reports the noise consistent with the current state
    auto oracle = [&](const Mat& x_t, int t) {
        double bar = s.alpha_bar(t);
        return ((x_t - std::sqrt(bar) * x0) / std::sqrt(1.0 - bar)).eval();
    };

    Mat x = forward_diffuse(x0, s.T(), eps0, s);
    for (int t = s.T(); t >= 1; --t) x = ddim_step(x, oracle(x, t), t, s);
    CHECK((x - x0).cwiseAbs().maxCoeff() <= 1e-6);

    Mat y = forward_diffuse(x0, s.T(), eps0, s);
    Mat zero = Mat::Zero(6, 4);
    for (int t = s.T(); t >= 1; --t) y = ddpm_step(y, oracle(y, t), t, s, zero);
    CHECK((y - x0).cwiseAbs().maxCoeff() <= 1e-6);
}
