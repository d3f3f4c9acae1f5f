#include "aniadapter/denoiser.hpp"

#include <cmath>

#include "aniadapter/error.hpp"

namespace aniadapter {

const char* controller_kind_name(ControllerKind k) {
    switch (k) {
        case ControllerKind::none: return "none";
        case ControllerKind::t2i_adapter: return "t2i";
        case ControllerKind::controlnet: return "controlnet";
    }
    return "none";
}

ControllerKind controller_kind_from_name(const std::string& name) {
    if (name == "none") return ControllerKind::none;
    if (name == "t2i" || name == "t2i_adapter") return ControllerKind::t2i_adapter;
    if (name == "controlnet") return ControllerKind::controlnet;
    throw DataError("unknown controller kind: " + name);
}

PoseController::PoseController(ControllerKind kind, const UnetSpec& unet, int dim, uint64_t seed)
    : kind_(kind), dim_(dim) {
    Rng rng(seed ^ 0xc0117011e5ULL);
    int in = 3 * kJointCount;
    double scale = 1.0 / std::sqrt(double(in));
    if (kind_ == ControllerKind::t2i_adapter) {
        Rng r = rng.fork("input");
        w_["input"] = random_matrix(r, in, dim_, scale);
    } else if (kind_ == ControllerKind::controlnet) {
        for (const SiteInfo& s : unet.sites) {
            if (s.placement == SitePlacement::down) continue;
            Rng r = rng.fork(s.id);
            w_[s.id] = random_matrix(r, in, dim_, scale);
        }
    }
}

static Vec skeleton_vector(const PoseSkeleton& skeleton) {
    Vec v = Vec::Zero(3 * kJointCount);
    for (int i = 0; i < kJointCount; ++i) {
        const Joint& j = skeleton.joints[size_t(i)];
        if (!j.detected) continue;
        v[3 * i] = j.x;
        v[3 * i + 1] = j.y;
        v[3 * i + 2] = j.confidence;
    }
    return v;
}

std::map<std::string, Vec> PoseController::residuals(const PoseSkeleton& skeleton) const {
    std::map<std::string, Vec> out;
    if (kind_ == ControllerKind::none) return out;
    Vec v = skeleton_vector(skeleton);
    for (const auto& [key, w] : w_) out[key] = (w.transpose() * v).array().tanh();
    return out;
}

void PoseController::hash_parameters(std::map<std::string, uint64_t>& out,
                                     const std::string& prefix) const {
    for (const auto& [key, w] : w_) out[prefix + "." + key] = hash_matrix(w);
}

Mat& PoseController::mutable_weight(const std::string& key) {
    auto it = w_.find(key);
    if (it == w_.end()) throw DataError("controller has no weight: " + key);
    return it->second;
}

SurrogateDenoiser::SurrogateDenoiser(const UnetSpec& unet, int latent_h, int latent_w,
                                     uint64_t seed)
    : unet_(unet), lh_(latent_h), lw_(latent_w), d_(unet.query_dim) {
    Rng rng(seed ^ 0xde4015e7ULL);
    int m = lh_ * lw_;
    Rng pr = rng.fork("positional");
    pos_ = random_matrix(pr, m, d_, 1.0);
    Rng wr = rng.fork("skip");
    w_in_ = random_matrix(wr, d_, 1, 1.0).col(0);
    w_out_ = random_matrix(wr, d_, 1, 1.0).col(0);
    // Orthogonalize the output head against the input coupling so additive
    // input noise cannot leak straight into the predicted clean field.
    w_out_ -= w_out_.dot(w_in_) / w_in_.squaredNorm() * w_in_;
    w_out_ /= std::sqrt(double(d_));
    Rng tr = rng.fork("timestep");
    temb_freq_.resize(d_);
    temb_phase_.resize(d_);
    for (int i = 0; i < d_; ++i) {
        temb_freq_[i] = tr.uniform(0.1, 1.0);
        temb_phase_[i] = tr.uniform(0.0, 2.0 * M_PI);
    }
    for (const SiteInfo& s : unet_.sites) {
        Rng sr = rng.fork("text proj " + s.id);
        double scale = 1.0 / std::sqrt(double(d_));
        text_proj_[s.id] = {random_matrix(sr, d_, d_, scale), random_matrix(sr, d_, d_, scale)};
    }
}

Mat SurrogateDenoiser::initial_hidden(const Vec& x_col, int t,
                                      const std::map<std::string, Vec>& residuals) const {
    Mat h = pos_;
    h += 0.25 * x_col * w_in_.transpose();
    Vec temb(d_);
    for (int i = 0; i < d_; ++i) temb[i] = std::sin(temb_freq_[i] * t + temb_phase_[i]);
    h.rowwise() += (0.1 * temb).transpose();
    auto it = residuals.find("input");
    if (it != residuals.end()) h.rowwise() += it->second.transpose();
    return h;
}

Mat SurrogateDenoiser::predict_eps(const Mat& x_t, int t, const NoiseSchedule& schedule,
                                   const Mat& text_tokens,
                                   const std::vector<MaskedReference>& refs,
                                   const InjectionSites& sites, const InjectionConfig& cfg,
                                   const std::map<std::string, Vec>& controller_residuals,
                                   DenoiserCache* cache) const {
    if (x_t.rows() != lh_ || x_t.cols() != lw_)
        throw DataError("denoiser latent shape mismatch");
    if (text_tokens.cols() != d_) throw DataError("text token width does not match denoiser dim");
    Vec x_col = Eigen::Map<const Vec>(x_t.data(), x_t.size());
    Mat h = initial_hidden(x_col, t, controller_residuals);
    if (cache) {
        cache->x_col = x_col;
        cache->t = t;
        cache->h_pre.clear();
        cache->site_caches.clear();
    }
    static const std::vector<MaskedReference> kNoRefs;
    for (const SiteInfo& info : unet_.sites) {
        const auto& [ka, vb] = text_proj_.at(info.id);
        const InjectionSites::Site* attached = sites.find(info.id);
        AttentionIO io;
        io.Q = h;
        io.K = text_tokens * ka;
        io.V = text_tokens * vb;
        if (attached) {
            io.Wk = attached->Wk;
            io.Wv = attached->Wv;
        } else {
            io.Wk = Mat::Zero(0, 0);
            io.Wv = Mat::Zero(0, 0);
        }
        const std::vector<MaskedReference>& use_refs = attached ? refs : kNoRefs;
        InjectionCache local;
        InjectionCache* cc = cache ? &local : nullptr;
        if (cache) cache->h_pre.push_back(h);
        Mat z = masked_multi_reference_attention(io, use_refs, cfg, cc);
        h += z;
        auto rit = controller_residuals.find(info.id);
        if (rit != controller_residuals.end()) h.rowwise() += rit->second.transpose();
        if (cache) cache->site_caches.push_back(std::move(local));
    }
    Vec f_col = h * w_out_;
    double bar = schedule.alpha_bar(t);
    double c1 = 1.0 / std::sqrt(1.0 - bar);
    double c2 = std::sqrt(bar) / std::sqrt(1.0 - bar);
    if (cache) cache->c2 = c2;
    Vec eps_col = c1 * x_col - c2 * f_col;
    return Eigen::Map<const Mat>(eps_col.data(), lh_, lw_);
}

DenoiserGrads SurrogateDenoiser::backward(const DenoiserCache& cache, const InjectionSites& sites,
                                          const InjectionConfig& cfg,
                                          const Mat& d_eps_hat) const {
    DenoiserGrads g;
    Vec d_eps_col = Eigen::Map<const Vec>(d_eps_hat.data(), d_eps_hat.size());
    Vec d_f = -cache.c2 * d_eps_col;
    Mat dh = d_f * w_out_.transpose();
    for (int i = int(unet_.sites.size()) - 1; i >= 0; --i) {
        const SiteInfo& info = unet_.sites[size_t(i)];
        const InjectionSites::Site* attached = sites.find(info.id);
        AttentionIO io;
        io.Q = cache.h_pre[size_t(i)];
        if (attached) {
            io.Wk = attached->Wk;
            io.Wv = attached->Wv;
        } else {
            io.Wk = Mat::Zero(0, 0);
            io.Wv = Mat::Zero(0, 0);
        }
        AttentionGrads ag = masked_attention_backward(cache.site_caches[size_t(i)], io, cfg, dh);
        if (attached) {
            auto [it, fresh] = g.dsites.try_emplace(info.id, ag.dWk, ag.dWv);
            if (!fresh) {
                it->second.first += ag.dWk;
                it->second.second += ag.dWv;
            }
            if (g.dI.empty()) {
                g.dI = ag.dI;
            } else {
                for (size_t r = 0; r < ag.dI.size(); ++r) g.dI[r] += ag.dI[r];
            }
        }
        dh += ag.dQ;  // residual connection: dh_in = dh_out + dQ
    }
    return g;
}

void SurrogateDenoiser::hash_parameters(std::map<std::string, uint64_t>& out,
                                        const std::string& prefix) const {
    out[prefix + ".pos"] = hash_matrix(pos_);
    out[prefix + ".w_in"] = hash_matrix(w_in_);
    out[prefix + ".w_out"] = hash_matrix(w_out_);
    out[prefix + ".temb_freq"] = hash_matrix(temb_freq_);
    out[prefix + ".temb_phase"] = hash_matrix(temb_phase_);
    for (const auto& [id, kv] : text_proj_) {
        out[prefix + ".text." + id + ".k"] = hash_matrix(kv.first);
        out[prefix + ".text." + id + ".v"] = hash_matrix(kv.second);
    }
}

}  // namespace aniadapter
