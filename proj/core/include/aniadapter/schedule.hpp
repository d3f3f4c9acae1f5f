#pragma once

#include <string>
#include <vector>

namespace aniadapter {

enum class SigmaKind { beta, posterior };

// Per-step diffusion constants, 1-indexed t in [1, T].
class NoiseSchedule {
public:
    static NoiseSchedule linear(int T = 1000, double beta_start = 1e-4, double beta_end = 0.02,
                                SigmaKind sigma = SigmaKind::beta);
    // Constant alpha so that alpha_bar decays geometrically; the desk-scale
    // default (T=10, alpha=0.5) pushes alpha_bar_T below 1e-3.
    static NoiseSchedule geometric(int T = 10, double alpha = 0.5,
                                   SigmaKind sigma = SigmaKind::beta);

    int T() const { return T_; }
    double alpha(int t) const { return at(alphas_, t); }
    double beta(int t) const { return at(betas_, t); }
    double alpha_bar(int t) const { return at(alpha_bars_, t); }
    // alpha_bar(t-1), with the t=1 convention alpha_bar(0) = 1.
    double alpha_bar_prev(int t) const;
    double sigma(int t) const { return at(sigmas_, t); }

    std::string to_text() const;
    static NoiseSchedule from_text(const std::string& text);
    void save(const std::string& path) const;
    static NoiseSchedule load(const std::string& path);

private:
    NoiseSchedule() = default;
    void finalize(SigmaKind sigma);
    double at(const std::vector<double>& v, int t) const;

    int T_ = 0;
    std::vector<double> alphas_, betas_, alpha_bars_, sigmas_;
};

}  // namespace aniadapter
