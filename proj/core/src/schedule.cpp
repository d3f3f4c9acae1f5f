#include "aniadapter/schedule.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "aniadapter/error.hpp"

namespace aniadapter {

double NoiseSchedule::at(const std::vector<double>& v, int t) const {
    if (t < 1 || t > T_)
        throw DataError("schedule step " + std::to_string(t) + " outside [1, " +
                        std::to_string(T_) + "]");
    return v[size_t(t - 1)];
}

double NoiseSchedule::alpha_bar_prev(int t) const {
    if (t < 1 || t > T_) throw DataError("schedule step out of range");
    return t == 1 ? 1.0 : alpha_bars_[size_t(t - 2)];
}

void NoiseSchedule::finalize(SigmaKind sigma) {
    T_ = int(alphas_.size());
    betas_.resize(alphas_.size());
    alpha_bars_.resize(alphas_.size());
    sigmas_.resize(alphas_.size());
    double bar = 1.0;
    for (size_t i = 0; i < alphas_.size(); ++i) {
        double a = alphas_[i];
        if (!(a > 0.0 && a < 1.0)) throw DataError("schedule alpha outside (0, 1)");
        betas_[i] = 1.0 - a;
        bar *= a;
        alpha_bars_[i] = bar;
        if (sigma == SigmaKind::beta) {
            sigmas_[i] = std::sqrt(betas_[i]);
        } else {
            double prev_bar = i == 0 ? 1.0 : alpha_bars_[i - 1];
            sigmas_[i] = std::sqrt((1.0 - prev_bar) / (1.0 - alpha_bars_[i]) * betas_[i]);
        }
    }
    sigmas_[0] = 0.0;  // final denoising step is deterministic
}

NoiseSchedule NoiseSchedule::linear(int T, double beta_start, double beta_end, SigmaKind sigma) {
    if (T < 1) throw DataError("schedule needs T >= 1");
    NoiseSchedule s;
    for (int t = 1; t <= T; ++t) {
        double frac = T == 1 ? 0.0 : double(t - 1) / double(T - 1);
        s.alphas_.push_back(1.0 - (beta_start + (beta_end - beta_start) * frac));
    }
    s.finalize(sigma);
    return s;
}

NoiseSchedule NoiseSchedule::geometric(int T, double alpha, SigmaKind sigma) {
    if (T < 1) throw DataError("schedule needs T >= 1");
    NoiseSchedule s;
    s.alphas_.assign(size_t(T), alpha);
    s.finalize(sigma);
    return s;
}

std::string NoiseSchedule::to_text() const {
    std::ostringstream out;
    out << "# t alpha alpha_bar sigma\n";
    out << "T " << T_ << "\n";
    char buf[128];
    for (int t = 1; t <= T_; ++t) {
        std::snprintf(buf, sizeof buf, "%d %.17g %.17g %.17g\n", t, alphas_[size_t(t - 1)],
                      alpha_bars_[size_t(t - 1)], sigmas_[size_t(t - 1)]);
        out << buf;
    }
    return out.str();
}

NoiseSchedule NoiseSchedule::from_text(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    NoiseSchedule s;
    int expect_T = -1;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ls(line);
        if (line[0] == 'T') {
            std::string word;
            ls >> word >> expect_T;
            continue;
        }
        int t;
        double a, bar, sig;
        if (!(ls >> t >> a >> bar >> sig)) throw DataError("malformed schedule line: " + line);
        if (t != int(s.alphas_.size()) + 1) throw DataError("schedule rows out of order");
        s.alphas_.push_back(a);
        s.alpha_bars_.push_back(bar);
        s.sigmas_.push_back(sig);
        s.betas_.push_back(1.0 - a);
    }
    s.T_ = int(s.alphas_.size());
    if (s.T_ == 0) throw DataError("schedule text holds no rows");
    if (expect_T >= 0 && expect_T != s.T_)
        throw DataError("schedule header T does not match row count");
    return s;
}

void NoiseSchedule::save(const std::string& path) const {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot write schedule: " + path);
    f << to_text();
}

NoiseSchedule NoiseSchedule::load(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw DataError("cannot open schedule: " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    return from_text(ss.str());
}

}  // namespace aniadapter
